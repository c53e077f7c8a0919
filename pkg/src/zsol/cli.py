"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from .align import TrainConfig
from .errors import DataError, NumericalError
from .estimator import ZeroShotLocalizer
from .fileio import (
    read_model,
    read_points,
    read_tensor,
    read_tokens,
    write_history_csv,
    write_model,
    write_points,
    write_tensor,
)
from .grid import gaussian_splat
from .locate import DecodeConfig, localize
from .manifest import load_manifest, load_sample, load_samples
from .metrics import THRESHOLD_PRESETS, evaluate, per_image_csv, report_csv, report_text
from .synth import SyntheticSceneSpec, gen_synthetic
from .tssm import MockTextEncoder, MockTokenizer, build_text_bundle

USAGE_ERROR = 2
DATA_ERROR = 3
NUMERICAL_ERROR = 4


def _resolve_threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    env = os.environ.get("ZSOL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as e:
            raise DataError(f"ZSOL_THREADS must be an integer, got {env!r}") from e
    return 1


def _map_maybe_parallel(fn, items, threads):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


_CONFIG_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def parse_config(text: str) -> dict:
    """Parse line-oriented ``key = value`` training configuration.

    Keys are TrainConfig field names; ``#`` starts a comment. Unknown keys
    and malformed lines are data errors.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_TYPES:
            raise DataError(
                f"config line {lineno}: unknown key {key!r} "
                f"(valid: {', '.join(sorted(_CONFIG_TYPES))})"
            )
        out[key] = _coerce(key, value, lineno)
    return out


def _coerce(key, value, lineno):
    ftype = str(_CONFIG_TYPES[key])
    try:
        if "int" in ftype:
            return int(value)
        if "float" in ftype:
            return float(value)
    except ValueError as e:
        raise DataError(f"config line {lineno}: bad value for {key}: {value!r}") from e
    return value


def cmd_gen_density(args) -> int:
    pts = read_points(args.points)
    density = gaussian_splat(pts.points, args.height, args.width, args.sigma)
    write_tensor(args.out, density)
    print(f"wrote {args.out}: {args.height}x{args.width}, mass {float(density.sum()):.6f}")
    return 0


def cmd_train(args) -> int:
    overrides = {}
    if args.config is not None:
        overrides = parse_config(Path(args.config).read_text())
    if args.seed is not None:
        overrides["seed"] = args.seed
    manifest = load_manifest(args.manifest)
    samples = load_samples(manifest)
    est = ZeroShotLocalizer(**overrides)
    est.fit(samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_model(out / "model.zsmd", est.model_)
    write_history_csv(out / "history.csv", est.history_)
    last = est.history_[-1][1] if est.history_ else float("nan")
    print(f"trained on {len(samples)} images, {len(est.history_)} epochs, final loss {last:.6g}")
    return 0


def cmd_localize(args) -> int:
    manifest = load_manifest(args.manifest)
    model = read_model(args.checkpoint)
    config = DecodeConfig(regime=args.regime)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    threads = _resolve_threads(args)
    print(f"regime={args.regime} alpha={config.alpha:.6f} beta={config.beta:.6f}")

    def run(rec):
        sample = load_sample(manifest, rec)
        points, density = localize(model, sample, config)
        return rec.id, points, density

    for rec_id, points, density in _map_maybe_parallel(run, manifest.records, threads):
        write_points(out / f"{rec_id}.zspt", points)
        if args.save_density:
            write_tensor(out / f"{rec_id}_density.zsol", density)
        print(f"{rec_id}: {len(points)} points")
    return 0


def cmd_evaluate(args) -> int:
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    pred_files = sorted(pred_dir.glob("*.zspt"))
    if not pred_files:
        raise DataError(f"no .zspt prediction files in {pred_dir}")
    sigma_small, sigma_large = THRESHOLD_PRESETS[args.preset]
    if args.sigma_small is not None:
        sigma_small = args.sigma_small
    if args.sigma_large is not None:
        sigma_large = args.sigma_large
    threads = _resolve_threads(args)

    def load_pair(pf):
        gt_path = gt_dir / pf.name
        if not gt_path.is_file():
            raise DataError(f"missing ground-truth file {gt_path}")
        return read_points(pf), read_points(gt_path).points

    pairs = _map_maybe_parallel(load_pair, pred_files, threads)
    ids = [pf.stem for pf in pred_files]
    preds = [p for p, _ in pairs]
    gts = [g for _, g in pairs]
    report = evaluate(ids, preds, gts, sigma_small, sigma_large)
    text = report_text(report)
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report_csv(report))
        (out / "report.txt").write_text(text)
        (out / "per_image.csv").write_text(per_image_csv(report))
    return 0


def cmd_tssm_inspect(args) -> int:
    if args.tokens is not None:
        if args.embeddings is None:
            raise DataError("--embeddings is required with --tokens")
        seq = read_tokens(args.tokens)
        emb = read_tensor(args.embeddings).astype(np.float64)
        sentence = emb[seq.end_index]
    else:
        if args.title is None:
            raise DataError("either --title or --tokens/--embeddings is required")
        seq = MockTokenizer().encode(args.title)
        emb, sentence = MockTextEncoder(dim=args.dim, seed=args.seed or 0).embed(seq)
    bundle = build_text_bundle(seq, emb, sentence)
    span = (seq.title_start, seq.title_start + seq.title_length)
    print(f"W = {bundle.weight:.6f}")
    print(f"support_norm = {float(np.linalg.norm(bundle.self_support)):.6f}")
    print(f"title_span = [{span[0]}, {span[1]})")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSceneSpec(
        n_scenes=args.scenes,
        count_range=(args.count_min, args.count_max),
        image_size=args.size,
        embedding_dim=args.dim,
        snr=args.snr,
        seed=args.seed if args.seed is not None else 0,
        title=args.title,
    )
    path = gen_synthetic(spec, args.out)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsol",
        description="Zero-shot object localization over frozen encoder outputs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-density", help="rasterize a point file into a density tensor")
    p.add_argument("points", help="input .zspt point file")
    p.add_argument("out", help="output .zsol tensor file")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--sigma", type=float, default=2.0)
    p.set_defaults(func=cmd_gen_density)

    p = sub.add_parser("train", help="fit the projection on a manifest")
    p.add_argument("manifest")
    p.add_argument("out", help="output directory for model.zsmd and history.csv")
    p.add_argument("--config", help="key = value training configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("localize", help="decode object points for every manifest image")
    p.add_argument("manifest")
    p.add_argument("checkpoint", help="model .zsmd file")
    p.add_argument("out", help="output directory for per-image .zspt files")
    p.add_argument("--regime", choices=("dense", "sparse"), default="dense")
    p.add_argument("--save-density", action="store_true", help="also write fused density tensors")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="score predicted points against ground truth")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--preset", choices=sorted(THRESHOLD_PRESETS), required=True)
    p.add_argument("--sigma-small", type=float, help="override the preset small threshold")
    p.add_argument("--sigma-large", type=float, help="override the preset large threshold")
    p.add_argument("--out", help="directory for report.csv / report.txt / per_image.csv")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tssm-inspect", help="print the text-branch fusion quantities")
    p.add_argument("--title", help="object title, run through the mock text stack")
    p.add_argument("--tokens", help=".zstk token file (with --embeddings)")
    p.add_argument("--embeddings", help="77 x dim token-embedding .zsol tensor")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_tssm_inspect)

    p = sub.add_parser("synth", help="generate a synthetic scene manifest")
    p.add_argument("out", help="output directory")
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--count-min", type=int, default=2)
    p.add_argument("--count-max", type=int, default=6)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--title", default="widget")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
