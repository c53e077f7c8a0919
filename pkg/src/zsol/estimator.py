"""Estimator-style front end over the training and inference pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .align import ProjectionModel, TrainConfig, train
from .data import ImageSample, crops_from_image
from .locate import DecodeConfig, localize


def _check_samples(X, need_gt=False):
    samples = list(X)
    if not samples:
        raise ValueError("X must contain at least one sample")
    for s in samples:
        if not isinstance(s, ImageSample):
            raise TypeError(f"expected ImageSample, got {type(s).__name__}")
        if need_gt and s.gt_points is None:
            raise ValueError(f"sample {s.image_id!r} has no ground-truth points")
    return samples


class ZeroShotLocalizer(BaseEstimator):
    """Fits the linear patch-to-text projection and decodes object points.

    ``X`` is a list of ImageSample objects; ground truth rides inside the
    samples, so ``y`` is accepted only for interface compatibility and must
    be None. All constructor arguments are hyperparameters in the usual
    estimator sense.
    """

    def __init__(
        self,
        contrastive_epochs=20,
        mse_epochs=200,
        lr=1e-4,
        lr_decay=0.33,
        decay_every=100,
        weight_decay=0.0,
        temperature=0.07,
        pos_mass_threshold=0.5,
        batch_size=3,
        gt_sigma=2.0,
        target_peak=2.0,
        init_scale=1e-3,
        seed=0,
        regime="dense",
    ):
        self.contrastive_epochs = contrastive_epochs
        self.mse_epochs = mse_epochs
        self.lr = lr
        self.lr_decay = lr_decay
        self.decay_every = decay_every
        self.weight_decay = weight_decay
        self.temperature = temperature
        self.pos_mass_threshold = pos_mass_threshold
        self.batch_size = batch_size
        self.gt_sigma = gt_sigma
        self.target_peak = target_peak
        self.init_scale = init_scale
        self.seed = seed
        self.regime = regime

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            contrastive_epochs=self.contrastive_epochs,
            mse_epochs=self.mse_epochs,
            lr=self.lr,
            lr_decay=self.lr_decay,
            decay_every=self.decay_every,
            weight_decay=self.weight_decay,
            temperature=self.temperature,
            pos_mass_threshold=self.pos_mass_threshold,
            batch_size=self.batch_size,
            gt_sigma=self.gt_sigma,
            target_peak=self.target_peak,
            init_scale=self.init_scale,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        if y is not None:
            raise ValueError("y must be None; ground truth lives in the samples")
        samples = _check_samples(X, need_gt=True)
        crops = [c for s in samples for c in crops_from_image(s)]
        d_img = crops[0].patches.shape[1]
        d_txt = crops[0].text_embedding.shape[0]
        config = self._train_config()
        model = ProjectionModel.create(
            d_img,
            d_txt,
            temperature=config.temperature,
            init_scale=config.init_scale,
            rng=np.random.default_rng(config.seed),
        )
        self.model_, history = train(model, crops, config)
        self.history_ = history
        return self

    def _fitted_model(self) -> ProjectionModel:
        model = getattr(self, "model_", None)
        if model is None:
            raise NotFittedError("this ZeroShotLocalizer instance is not fitted yet")
        return model

    def predict(self, X):
        """Decoded point sets, one per sample."""
        model = self._fitted_model()
        config = DecodeConfig(regime=self.regime)
        return [localize(model, s, config)[0] for s in _check_samples(X)]

    def predict_density(self, X):
        """Fused pixel-density maps, one per sample."""
        model = self._fitted_model()
        config = DecodeConfig(regime=self.regime)
        return [localize(model, s, config)[1] for s in _check_samples(X)]
