"""Point-localization and counting metrics.

Matching follows the optimal-assignment-then-filter protocol: a one-to-one
minimum-cost assignment on Euclidean distances, after which pairs farther
apart than sigma are dropped. The assignment itself does not depend on
sigma, so recall can only grow as sigma grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .grid import PointSet
from .validation import check_positive

# (sigma_small, sigma_large) per dataset family
THRESHOLD_PRESETS = {
    "fsc147": (5.0, 10.0),
    "carpk": (5.0, 10.0),
    "shtechA": (4.0, 8.0),
    "shtechB": (4.0, 8.0),
}


def _as_points(p):
    if isinstance(p, PointSet):
        return p.points
    return np.asarray(p, dtype=np.float64).reshape(-1, 2)


@dataclass
class MatchResult:
    pairs: list  # (pred index, gt index, distance)
    tp: int
    fp: int
    fn: int
    sigma: float

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0


def match_points(pred, gt, sigma) -> MatchResult:
    """Optimal one-to-one matching, then discard pairs farther than sigma."""
    check_positive(sigma, "sigma")
    p = _as_points(pred)
    g = _as_points(gt)
    if p.shape[0] == 0 or g.shape[0] == 0:
        return MatchResult([], 0, p.shape[0], g.shape[0], float(sigma))
    dist = np.sqrt(((p[:, None, :] - g[None, :, :]) ** 2).sum(axis=2))
    rows, cols = linear_sum_assignment(dist)
    pairs = [
        (int(i), int(j), float(dist[i, j]))
        for i, j in zip(rows, cols)
        if dist[i, j] <= sigma
    ]
    tp = len(pairs)
    return MatchResult(pairs, tp, p.shape[0] - tp, g.shape[0] - tp, float(sigma))


def f1_score(m: MatchResult) -> float:
    """Harmonic mean of precision and recall, zero when both are zero."""
    p, r = m.precision, m.recall
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def average_precision(pred: PointSet, gt, sigma) -> float:
    """Interpolated average precision of a confidence-ranked point set.

    Predictions are swept in descending confidence (ties broken by row-major
    point position); each one greedily claims the nearest unmatched ground
    truth within sigma. The precision-recall curve is sampled at the 101
    recall levels {0, 0.01, ..., 1} with P_interp(r) = max precision at
    recall >= r, and the samples are summed with weight 0.01.
    """
    check_positive(sigma, "sigma")
    if not isinstance(pred, PointSet) or pred.confidences is None:
        raise ValueError("average precision needs per-point confidences")
    g = _as_points(gt)
    p = pred.points
    n_pred, n_gt = p.shape[0], g.shape[0]
    if n_pred == 0:
        return 0.0

    order = np.lexsort((p[:, 0], p[:, 1], -pred.confidences))
    taken = np.zeros(n_gt, dtype=bool)
    tp_cum = np.zeros(n_pred, dtype=np.int64)
    tp = 0
    for rank, i in enumerate(order):
        if n_gt:
            d = np.sqrt(((g - p[i]) ** 2).sum(axis=1))
            d[taken] = np.inf
            j = int(np.argmin(d))
            if d[j] <= sigma:
                taken[j] = True
                tp += 1
        tp_cum[rank] = tp

    ranks = np.arange(1, n_pred + 1, dtype=np.float64)
    precisions = tp_cum / ranks
    recalls = tp_cum / n_gt if n_gt else np.zeros(n_pred)

    ap = 0.0
    for r in np.arange(101) / 100.0:
        mask = recalls >= r - 1e-12
        if mask.any():
            ap += float(precisions[mask].max()) * 0.01
    return ap


def average_recall(groups) -> float:
    """Mean recall over groups of match results.

    Each group is a MatchResult or a list of them; counts are pooled within
    a group before its recall is taken.
    """
    groups = list(groups)
    if not groups:
        raise ValueError("average recall needs at least one group")
    recalls = []
    for group in groups:
        if isinstance(group, MatchResult):
            group = [group]
        tp = sum(m.tp for m in group)
        fn = sum(m.fn for m in group)
        recalls.append(tp / (tp + fn) if tp + fn else 0.0)
    return float(np.mean(recalls))


def counting_errors(counts) -> tuple[float, float]:
    """(MAE, RMSE) of per-image (predicted, true) count pairs.

    The RMSE figure is what counting tables label MSE.
    """
    arr = np.asarray(counts, dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise ValueError("counting errors need at least one image")
    diff = arr[:, 0] - arr[:, 1]
    return float(np.mean(np.abs(diff))), float(np.sqrt(np.mean(diff**2)))


def sigma_from_image(width, height) -> float:
    """Image-scale matching threshold: sqrt((w^2 + h^2) / 2)."""
    check_positive(width, "width")
    check_positive(height, "height")
    return float(np.sqrt((width * width + height * height) / 2.0))


@dataclass
class ThresholdMetrics:
    sigma: float
    precision: float
    recall: float
    f1: float
    ap: float
    ar: float


@dataclass
class EvalReport:
    small: ThresholdMetrics
    large: ThresholdMetrics
    mae: float
    rmse: float
    per_image: list = field(default_factory=list)  # (id, pred n, gt n, recall_s, recall_l)
    ar_by_category: dict | None = None


def _threshold_metrics(preds, gts, sigma, categories) -> ThresholdMetrics:
    matches = [match_points(p, g, sigma) for p, g in zip(preds, gts)]
    tp = sum(m.tp for m in matches)
    fp = sum(m.fp for m in matches)
    fn = sum(m.fn for m in matches)
    pooled = MatchResult([], tp, fp, fn, sigma)
    aps = [average_precision(p, g, sigma) for p, g in zip(preds, gts)]
    if categories is not None:
        by_cat: dict[str, list[MatchResult]] = {}
        for m, c in zip(matches, categories):
            by_cat.setdefault(c, []).append(m)
        ar = average_recall(list(by_cat.values()))
    else:
        ar = average_recall(matches)
    return ThresholdMetrics(
        sigma=float(sigma),
        precision=pooled.precision,
        recall=pooled.recall,
        f1=f1_score(pooled),
        ap=float(np.mean(aps)),
        ar=ar,
    )


def evaluate(image_ids, preds, gts, sigma_small, sigma_large, categories=None) -> EvalReport:
    """Score a prediction set at the two thresholds.

    ``preds`` are PointSets with confidences, ``gts`` point arrays.
    Precision/recall/F1 pool counts over all images; AP is the mean of
    per-image sweeps; AR averages recall per category when labels are given,
    else per image.
    """
    n = len(image_ids)
    if not (len(preds) == len(gts) == n) or n == 0:
        raise ValueError("need matching, non-empty id/pred/gt lists")
    if categories is not None and len(categories) != n:
        raise ValueError("one category per image required")
    small = _threshold_metrics(preds, gts, sigma_small, categories)
    large = _threshold_metrics(preds, gts, sigma_large, categories)
    counts = [(len(p), _as_points(g).shape[0]) for p, g in zip(preds, gts)]
    mae, rmse = counting_errors(counts)
    per_image = []
    for img_id, p, g in zip(image_ids, preds, gts):
        ms = match_points(p, g, sigma_small)
        ml = match_points(p, g, sigma_large)
        per_image.append((img_id, len(p), _as_points(g).shape[0], ms.recall, ml.recall))
    ar_by_cat = None
    if categories is not None:
        by_cat: dict[str, list] = {}
        for (p, g), c in zip(zip(preds, gts), categories):
            by_cat.setdefault(c, []).append(match_points(p, g, sigma_large))
        ar_by_cat = {c: average_recall([ms]) for c, ms in by_cat.items()}
    return EvalReport(small, large, mae, rmse, per_image, ar_by_cat)


def report_csv(report: EvalReport) -> str:
    """Single-row summary CSV with both threshold blocks then MAE/MSE."""
    header = (
        "sigma_small,f1_small,ap_small,ar_small,precision_small,recall_small,"
        "sigma_large,f1_large,ap_large,ar_large,precision_large,recall_large,"
        "mae,mse"
    )
    s, l = report.small, report.large
    row = (
        f"{s.sigma:g},{s.f1:.6f},{s.ap:.6f},{s.ar:.6f},{s.precision:.6f},{s.recall:.6f},"
        f"{l.sigma:g},{l.f1:.6f},{l.ap:.6f},{l.ar:.6f},{l.precision:.6f},{l.recall:.6f},"
        f"{report.mae:.6f},{report.rmse:.6f}"
    )
    return header + "\n" + row + "\n"


def report_text(report: EvalReport) -> str:
    """Aligned-column rendering: F1/AP/AR per threshold, then MAE/MSE."""
    s, l = report.small, report.large
    rows = [
        ("", "F1", "AP", "AR"),
        (f"sigma={s.sigma:g}", f"{s.f1:.4f}", f"{s.ap:.4f}", f"{s.ar:.4f}"),
        (f"sigma={l.sigma:g}", f"{l.f1:.4f}", f"{l.ap:.4f}", f"{l.ar:.4f}"),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.append(f"MAE {report.mae:.4f}  MSE {report.rmse:.4f}")
    return "\n".join(lines) + "\n"


def per_image_csv(report: EvalReport) -> str:
    lines = ["image_id,pred_count,gt_count,recall_small,recall_large"]
    for img_id, np_, ng, rs, rl in report.per_image:
        lines.append(f"{img_id},{np_},{ng},{rs:.6f},{rl:.6f}")
    return "\n".join(lines) + "\n"
