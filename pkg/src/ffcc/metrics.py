"""Error metrics and confidence analysis for illuminant estimates.

Reports the standard color-constancy table: mean, median, trimean,
best-25%, worst-25% angular error and their geometric mean, plus an
entropy-ordered error that measures how well posterior entropy predicts
per-image error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("mean", "median", "trimean", "best25", "worst25", "avg")


@dataclass(frozen=True)
class MetricSummary:
    """Five location statistics of an error list plus their geometric mean."""

    mean: float
    median: float
    trimean: float
    best25: float
    worst25: float
    avg: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def angular_error(est_rgb, true_rgb) -> float:
    """Angle in degrees between two RGB vectors; scale-invariant."""
    a = np.asarray(est_rgb, dtype=np.float64)
    b = np.asarray(true_rgb, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("angular error is undefined for a zero vector")
    cos = np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos)))


def summarize(errors) -> MetricSummary:
    """Location statistics of an error list, in degrees.

    Quartiles use linear interpolation; best25/worst25 average the lowest
    and highest max(1, floor(N/4)) sorted errors; trimean is
    (Q1 + 2*median + Q3) / 4; avg is the geometric mean of the five.
    """
    e = np.sort(np.asarray(errors, dtype=np.float64))
    if e.size == 0:
        raise ValueError("cannot summarize an empty error list")
    q1, q2, q3 = np.percentile(e, [25.0, 50.0, 75.0])
    k = max(1, e.size // 4)
    stats = {
        "mean": float(np.mean(e)),
        "median": float(q2),
        "trimean": float((q1 + 2.0 * q2 + q3) / 4.0),
        "best25": float(np.mean(e[:k])),
        "worst25": float(np.mean(e[-k:])),
    }
    values = np.array(list(stats.values()))
    # geometric mean; zero errors (perfect estimates) propagate to a zero avg
    stats["avg"] = float(np.exp(np.mean(np.log(values)))) if np.all(values > 0) else 0.0
    return MetricSummary(**stats)


def entropy(sigma: np.ndarray) -> float:
    """Posterior entropy proxy 0.5 * log|Sigma| (constant shift omitted)."""
    sigma = np.asarray(sigma, dtype=np.float64)
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    if det <= 0.0 or sigma[0, 0] <= 0.0:
        raise ValueError("covariance is not positive-definite")
    return float(0.5 * np.log(det))


def entropy_ordered_error(pairs) -> float:
    """Twice the normalized area under the entropy-sorted cumulative errors.

    Images are stably sorted by ascending entropy; the cumulative error
    polyline over [0, 1] is integrated by trapezoids, so the value equals
    the mean error exactly when entropy carries no information, is below it
    when low entropy predicts low error, and above it when anti-correlated.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("cannot compute entropy-ordered error of nothing")
    order = np.argsort([p[1] for p in pairs], kind="stable")
    errors = np.asarray([pairs[k][0] for k in order], dtype=np.float64)
    n = errors.size
    cumsum = np.cumsum(errors)
    # 2 * trapezoid area of the polyline (k/n, cumsum_k), k = 0..n, over 1/n
    return float((2.0 * cumsum.sum() - cumsum[-1]) / n**2)
