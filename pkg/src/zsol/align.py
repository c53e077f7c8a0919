"""Trainable linear patch-to-text alignment.

A single linear layer projects frozen patch embeddings into the text space;
patch scores are temperature-scaled cosines against the text self-support
vector. Training is two-stage: an InfoNCE contrastive stage over
positive/negative patches, then a pixel-level MSE stage against rasterized
ground-truth targets. All gradients are analytic (no autodiff).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import TrainSample
from .errors import NumericalError
from .grid import (
    NORM_EPS,
    gaussian_splat,
    resample_bilinear,
    resample_bilinear_adjoint,
)
from .validation import check_density_map, check_embedding_matrix, check_vector


@dataclass
class ProjectionModel:
    """Linear map from patch-embedding space into text-embedding space."""

    weights: np.ndarray  # D_img x D_txt
    bias: np.ndarray  # D_txt
    temperature: float = 0.07

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")
        if self.bias.shape != (self.weights.shape[1],):
            raise ValueError("bias must match the output dimension")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @classmethod
    def create(cls, d_img, d_txt, temperature=0.07, init_scale=1e-3, rng=None):
        rng = np.random.default_rng(rng)
        w = rng.standard_normal((d_img, d_txt)) * init_scale
        return cls(weights=w, bias=np.zeros(d_txt), temperature=temperature)

    def project(self, patches):
        return patches @ self.weights + self.bias

    def copy(self):
        return ProjectionModel(self.weights.copy(), self.bias.copy(), self.temperature)


@dataclass
class TrainConfig:
    """Hyperparameters for the two-stage schedule.

    ``target_peak`` sets the height of the MSE regression targets, which are
    built on the patch grid and bilinearly upsampled so the model family can
    reach them exactly; the peak sits far above the decode floor while
    keeping the target cosine well inside its range.
    """

    contrastive_epochs: int = 20
    mse_epochs: int = 200
    lr: float = 1e-4
    lr_decay: float = 0.33
    decay_every: int = 100
    weight_decay: float = 0.0
    temperature: float = 0.07
    pos_mass_threshold: float = 0.5
    batch_size: int = 3
    gt_sigma: float = 2.0
    target_peak: float = 2.0
    init_scale: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.contrastive_epochs < 0 or self.mse_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 < self.lr_decay <= 1):
            raise ValueError("lr_decay must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.target_peak <= 0:
            raise ValueError("target_peak must be positive")


def _cosines(model: ProjectionModel, patches, text):
    """Per-patch cosine against the text vector, with backprop cache."""
    z = model.project(patches)  # N x D_txt
    norms = np.linalg.norm(z, axis=1)
    t_norm = float(np.linalg.norm(text))
    cos = np.zeros(z.shape[0], dtype=np.float64)
    live = norms >= NORM_EPS
    if t_norm >= NORM_EPS:
        cos[live] = (z[live] @ text) / (norms[live] * t_norm)
        np.clip(cos, -1.0, 1.0, out=cos)
        # rows bitwise-equal to the text vector are exactly parallel; pin
        # them to 1 so the identity survives float rounding
        cos[live & np.all(z == text, axis=1)] = 1.0
    return cos, (z, norms, t_norm, live)


def _cosine_backward(g_cos, cache, text):
    """Gradient of the cosines w.r.t. the projected vectors z."""
    z, norms, t_norm, live = cache
    g_z = np.zeros_like(z)
    if t_norm < NORM_EPS:
        return g_z
    idx = np.where(live)[0]
    zi = z[idx]
    ni = norms[idx]
    cos_i = (zi @ text) / (ni * t_norm)
    term = text[None, :] / (ni[:, None] * t_norm) - (cos_i / ni**2)[:, None] * zi
    g_z[idx] = g_cos[idx, None] * term
    return g_z


def similarity_map(model: ProjectionModel, patches, text, grid):
    """Temperature-scaled cosine of each projected patch against the text,
    reshaped onto the patch grid."""
    gh, gw = int(grid[0]), int(grid[1])
    patches = check_embedding_matrix(patches, "patches")
    text = check_vector(text, "text embedding", dim=model.weights.shape[1])
    if patches.shape[0] != gh * gw:
        raise ValueError(f"{patches.shape[0]} patches do not fill a {gh}x{gw} grid")
    if patches.shape[1] != model.weights.shape[0]:
        raise ValueError("patch dimension does not match the model input dimension")
    cos, _ = _cosines(model, patches, text)
    return (cos / model.temperature).reshape(gh, gw)


def predict_density(model: ProjectionModel, patches, text, grid, out_height, out_width):
    """Pixel-resolution predicted density: bilinear-upsampled similarity map
    clamped at zero."""
    s = similarity_map(model, patches, text, grid)
    up = resample_bilinear(s, out_height, out_width)
    return np.asarray(np.maximum(up, 0.0), dtype=np.float32)


def split_patches(gt, grid, mass_threshold=0.5):
    """Partition patch indices by ground-truth density mass.

    Patches whose summed density exceeds the threshold are positives, the
    rest negatives. Indices are row-major over the grid.
    """
    gt = check_density_map(gt, "gt density")
    gh, gw = int(grid[0]), int(grid[1])
    h, w = gt.shape
    if h % gh or w % gw:
        raise ValueError(f"map {h}x{w} not divisible into a {gh}x{gw} grid")
    ph, pw = h // gh, w // gw
    mass = gt.reshape(gh, ph, gw, pw).sum(axis=(1, 3)).reshape(-1)
    idx = np.arange(gh * gw)
    positives = idx[mass > mass_threshold]
    negatives = idx[mass <= mass_threshold]
    return positives, negatives


def contrastive_loss(model: ProjectionModel, patches, text, positives, negatives):
    """InfoNCE over patch scores: each positive against all negatives.

    Returns ``(loss, (grad_weights, grad_bias))``; gradients are exact.
    """
    patches = check_embedding_matrix(patches, "patches")
    text = check_vector(text, "text embedding", dim=model.weights.shape[1])
    pos = np.asarray(positives, dtype=np.int64).reshape(-1)
    neg = np.asarray(negatives, dtype=np.int64).reshape(-1)
    if pos.size == 0:
        raise ValueError("contrastive loss needs at least one positive patch")
    if neg.size == 0:
        raise ValueError("contrastive loss needs at least one negative patch")

    cos, cache = _cosines(model, patches, text)
    scores = cos / model.temperature
    s_pos = scores[pos]
    s_neg = scores[neg]

    # loss_i = -s_i + logsumexp(s_i, s_neg...)
    stacked = np.concatenate([s_pos[:, None], np.broadcast_to(s_neg, (pos.size, neg.size))], axis=1)
    m = stacked.max(axis=1, keepdims=True)
    logz = m[:, 0] + np.log(np.exp(stacked - m).sum(axis=1))
    loss = float(np.mean(logz - s_pos))

    prob = np.exp(stacked - logz[:, None])  # softmax rows over {pos_i} U neg
    g_scores = np.zeros_like(scores)
    g_scores[pos] += (prob[:, 0] - 1.0) / pos.size
    np.add.at(g_scores, neg, prob[:, 1:].sum(axis=0) / pos.size)

    g_z = _cosine_backward(g_scores / model.temperature, cache, text)
    grad_w = patches.T @ g_z
    grad_b = g_z.sum(axis=0)
    return loss, (grad_w, grad_b)


def mse_loss(pred, gt):
    """Mean squared error between two same-shape maps.

    Returns ``(loss, grad_map)`` with ``grad_map = 2 (pred - gt) / (H W)``.
    """
    pred = check_density_map(pred, "pred", allow_negative=True)
    gt = check_density_map(gt, "gt", allow_negative=True)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    diff = pred - gt
    loss = float(np.mean(diff**2))
    return loss, 2.0 * diff / diff.size


def density_loss(model: ProjectionModel, sample: TrainSample, target):
    """Stage-2 loss for one crop: MSE of the upsampled, clamped similarity
    map against the rasterized target, with parameter gradients."""
    gh, gw = sample.grid
    patches = check_embedding_matrix(sample.patches, "patches")
    text = check_vector(sample.text_embedding, "text embedding")
    cos, cache = _cosines(model, patches, text)
    s = (cos / model.temperature).reshape(gh, gw)
    up = resample_bilinear(s, sample.height, sample.width)
    pred = np.maximum(up, 0.0)
    loss, g_pred = mse_loss(pred, target)
    g_up = g_pred * (up > 0.0)
    g_s = resample_bilinear_adjoint(g_up, gh, gw)
    g_cos = g_s.reshape(-1) / model.temperature
    g_z = _cosine_backward(g_cos, cache, text)
    grad_w = patches.T @ g_z
    grad_b = g_z.sum(axis=0)
    return loss, (grad_w, grad_b)


def training_target(points, height, width, grid, peak):
    """Rasterized MSE target aligned with the model's output family.

    Each ground-truth point marks its patch cell with ``peak`` on the grid;
    the grid is then bilinearly upsampled to pixel resolution. The result is
    exactly representable by the similarity-map pipeline, so regression can
    drive peaks all the way to ``peak`` instead of compromising between an
    unreachable shape and a flat map.
    """
    gh, gw = int(grid[0]), int(grid[1])
    if height % gh or width % gw:
        raise ValueError(f"map {height}x{width} not divisible into a {gh}x{gw} grid")
    ph, pw = height // gh, width // gw
    cells = np.zeros((gh, gw), dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    for x, y in pts:
        r, c = int(y) // ph, int(x) // pw
        if not (0 <= r < gh and 0 <= c < gw):
            raise ValueError(f"point ({x}, {y}) outside the {height}x{width} map")
        cells[r, c] += peak
    return resample_bilinear(cells, height, width)


class AdamW:
    """Decoupled-weight-decay adaptive-moment optimizer with step decay.

    The effective learning rate at step t (1-based) is
    ``lr * lr_decay ** (t // decay_every)``; every step's rate is recorded
    in ``lr_trace``.
    """

    def __init__(
        self,
        model: ProjectionModel,
        lr=1e-4,
        beta1=0.9,
        beta2=0.999,
        eps=1e-8,
        weight_decay=0.0,
        lr_decay=0.33,
        decay_every=100,
    ):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.lr_decay = float(lr_decay)
        self.decay_every = int(decay_every)
        self.step_count = 0
        self.m_w = np.zeros_like(model.weights)
        self.v_w = np.zeros_like(model.weights)
        self.m_b = np.zeros_like(model.bias)
        self.v_b = np.zeros_like(model.bias)
        self.lr_trace: list[float] = []

    def effective_lr(self, step: int) -> float:
        return self.lr * self.lr_decay ** (step // self.decay_every)

    def step(self, model: ProjectionModel, grad_w, grad_b):
        grad_w = np.asarray(grad_w, dtype=np.float64)
        grad_b = np.asarray(grad_b, dtype=np.float64)
        if not (np.all(np.isfinite(grad_w)) and np.all(np.isfinite(grad_b))):
            raise NumericalError("non-finite gradient in optimizer step")
        self.step_count += 1
        t = self.step_count
        lr_t = self.effective_lr(t)
        self.lr_trace.append(lr_t)
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for param, grad, m, v in (
            (model.weights, grad_w, self.m_w, self.v_w),
            (model.bias, grad_b, self.m_b, self.v_b),
        ):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / bc1
            v_hat = v / bc2
            param -= lr_t * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * param)
        return model


def optimizer_step(model: ProjectionModel, state: AdamW, grads):
    """Apply one update; ``grads`` is ``(grad_weights, grad_bias)``."""
    return state.step(model, grads[0], grads[1])


@dataclass
class _PreparedSample:
    sample: TrainSample
    positives: np.ndarray
    negatives: np.ndarray
    target: np.ndarray


def _prepare(samples, config: TrainConfig):
    prepared = []
    for s in samples:
        gt = gaussian_splat(s.gt_points, s.height, s.width, config.gt_sigma)
        pos, neg = split_patches(gt, s.grid, config.pos_mass_threshold)
        target = training_target(s.gt_points, s.height, s.width, s.grid, config.target_peak)
        prepared.append(_PreparedSample(s, pos, neg, target))
    return prepared


def train(model: ProjectionModel, samples, config: TrainConfig, optimizer: AdamW | None = None):
    """Run the two-stage schedule and return ``(model, history)``.

    ``history`` is a list of ``(stage, mean_epoch_loss)`` tuples, one per
    epoch, contrastive stage first. Deterministic for a fixed seed.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("empty training set")
    model = model.copy()
    if optimizer is None:
        optimizer = AdamW(
            model,
            lr=config.lr,
            weight_decay=config.weight_decay,
            lr_decay=config.lr_decay,
            decay_every=config.decay_every,
        )
    rng = np.random.default_rng(config.seed)
    prepared = _prepare(samples, config)
    history: list[tuple[str, float]] = []

    def run_stage(stage, epochs, batch_fn):
        for _ in range(epochs):
            order = rng.permutation(len(prepared))
            epoch_losses = []
            for start in range(0, len(order), config.batch_size):
                batch = [prepared[i] for i in order[start : start + config.batch_size]]
                losses, grads_w, grads_b = [], [], []
                for item in batch:
                    out = batch_fn(item)
                    if out is None:
                        continue
                    loss, (gw, gb) = out
                    losses.append(loss)
                    grads_w.append(gw)
                    grads_b.append(gb)
                if not losses:
                    continue
                optimizer.step(
                    model,
                    np.mean(grads_w, axis=0),
                    np.mean(grads_b, axis=0),
                )
                epoch_losses.append(float(np.mean(losses)))
            history.append((stage, float(np.mean(epoch_losses)) if epoch_losses else float("nan")))

    def contrastive_batch(item: _PreparedSample):
        if item.positives.size == 0 or item.negatives.size == 0:
            return None  # nothing to contrast; skip this crop
        return contrastive_loss(
            model, item.sample.patches, item.sample.text_embedding, item.positives, item.negatives
        )

    def mse_batch(item: _PreparedSample):
        return density_loss(model, item.sample, item.target)

    run_stage("contrastive", config.contrastive_epochs, contrastive_batch)
    run_stage("mse", config.mse_epochs, mse_batch)
    return model, history
