"""Zero-shot object localization over frozen encoder outputs.

The pipeline: a text self-similarity branch turns a prompt into a single
support vector, a trained linear projection scores image patches against
it, scores become pixel densities through bilinear upsampling, and local
density maxima decode into object points that the metrics suite scores
against ground truth.
"""

from .align import (
    AdamW,
    ProjectionModel,
    TrainConfig,
    contrastive_loss,
    mse_loss,
    optimizer_step,
    predict_density,
    similarity_map,
    split_patches,
    train,
    training_target,
)
from .data import ImageSample, TrainSample, WindowPatches, crops_from_image
from .errors import DataError, NumericalError, ZsolError
from .estimator import ZeroShotLocalizer
from .fileio import (
    read_history_csv,
    read_model,
    read_points,
    read_tensor,
    read_tokens,
    write_history_csv,
    write_model,
    write_points,
    write_tensor,
    write_tokens,
)
from .grid import (
    PointSet,
    bilinear_upsample,
    cosine_similarity,
    gaussian_splat,
    max_pool,
    resample_bilinear,
    resample_bilinear_adjoint,
)
from .locate import (
    DecodeConfig,
    decode_points,
    fuse_windows,
    localize,
    plan_windows,
)
from .manifest import Manifest, ManifestRecord, load_manifest, load_sample, load_samples, write_manifest
from .metrics import (
    EvalReport,
    MatchResult,
    THRESHOLD_PRESETS,
    average_precision,
    average_recall,
    counting_errors,
    evaluate,
    f1_score,
    match_points,
    sigma_from_image,
)
from .synth import SyntheticSceneSpec, gen_synthetic
from .tssm import (
    MockTextEncoder,
    MockTokenizer,
    TextBundle,
    TokenSequence,
    build_prompt,
    build_text_bundle,
    pad_tokens,
    title_embedding,
    tssm_fuse,
)

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "DataError",
    "DecodeConfig",
    "EvalReport",
    "ImageSample",
    "Manifest",
    "ManifestRecord",
    "MatchResult",
    "MockTextEncoder",
    "MockTokenizer",
    "NumericalError",
    "PointSet",
    "ProjectionModel",
    "SyntheticSceneSpec",
    "TextBundle",
    "THRESHOLD_PRESETS",
    "TokenSequence",
    "TrainConfig",
    "TrainSample",
    "WindowPatches",
    "ZeroShotLocalizer",
    "ZsolError",
    "average_precision",
    "average_recall",
    "bilinear_upsample",
    "build_prompt",
    "build_text_bundle",
    "contrastive_loss",
    "cosine_similarity",
    "counting_errors",
    "crops_from_image",
    "decode_points",
    "evaluate",
    "f1_score",
    "fuse_windows",
    "gaussian_splat",
    "gen_synthetic",
    "load_manifest",
    "load_sample",
    "load_samples",
    "localize",
    "match_points",
    "max_pool",
    "mse_loss",
    "optimizer_step",
    "pad_tokens",
    "plan_windows",
    "predict_density",
    "read_history_csv",
    "read_model",
    "read_points",
    "read_tensor",
    "read_tokens",
    "resample_bilinear",
    "resample_bilinear_adjoint",
    "sigma_from_image",
    "similarity_map",
    "split_patches",
    "title_embedding",
    "train",
    "training_target",
    "tssm_fuse",
    "write_history_csv",
    "write_manifest",
    "write_model",
    "write_points",
    "write_tensor",
    "write_tokens",
]
