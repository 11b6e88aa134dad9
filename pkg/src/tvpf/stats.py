"""Weighted ensemble summaries and truth-based scoring.

Quantiles use the left-continuous inverse of the cumulative weight
function (the smallest sample value whose cumulative weight reaches the
requested probability) with no interpolation, so credible bands are
reproducible bit-for-bit from the same weighted sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "WeightedSample",
    "weighted_mean",
    "weighted_quantile",
    "weighted_quantiles",
    "rmse",
    "error_field",
    "coverage",
    "weighted_histogram",
]

BAND_68 = (0.16, 0.84)
BAND_95 = (0.025, 0.975)


@dataclass(frozen=True)
class WeightedSample:
    """Sample values (N,) or (N, k) with normalized nonnegative weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.ndim not in (1, 2) or values.shape[0] == 0:
            raise ValueError("values must be a nonempty (N,) or (N, k) array")
        if weights.shape != (values.shape[0],):
            raise ValueError("weights must be one per sample row")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)


def weighted_mean(sample: WeightedSample):
    """Weighted average; scalar for (N,) values, a (k,) vector otherwise."""
    mean = sample.weights @ sample.values
    return float(mean) if sample.values.ndim == 1 else mean


def weighted_quantiles(values: np.ndarray, weights: np.ndarray, qs) -> np.ndarray:
    """Left-continuous weighted quantiles along axis 0.

    ``values`` is (N,) or (N, k); returns (len(qs),) or (len(qs), k).
    The boundary q=0 yields the minimum, q=1 the maximum.
    """
    v = np.asarray(values, dtype=float)
    single = v.ndim == 1
    V = v[:, None] if single else v
    n, k = V.shape
    order = np.argsort(V, axis=0)
    sorted_vals = np.take_along_axis(V, order, axis=0)
    cumw = np.cumsum(np.asarray(weights, dtype=float)[order], axis=0)
    out = np.empty((len(qs), k))
    cols = np.arange(k)
    for i, q in enumerate(qs):
        idx = np.minimum((cumw < q).sum(axis=0), n - 1)
        out[i] = sorted_vals[idx, cols]
    return out[:, 0] if single else out


def weighted_quantile(sample: WeightedSample, q: float):
    """Single weighted quantile of a WeightedSample (see weighted_quantiles)."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level must be in [0, 1], got {q}")
    result = weighted_quantiles(sample.values, sample.weights, (q,))[0]
    return float(result) if sample.values.ndim == 1 else result


def rmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Root-mean-square difference over all matching entries."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def error_field(truth_states: np.ndarray, estimate_states: np.ndarray) -> np.ndarray:
    """Elementwise absolute difference between truth and estimate fields."""
    truth_states = np.asarray(truth_states, dtype=float)
    estimate_states = np.asarray(estimate_states, dtype=float)
    if truth_states.shape != estimate_states.shape:
        raise ValueError(
            f"shape mismatch: {truth_states.shape} vs {estimate_states.shape}"
        )
    return np.abs(truth_states - estimate_states)


def coverage(truth: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    """Fraction of entries with lower <= truth <= upper."""
    truth = np.asarray(truth, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if truth.shape != lower.shape or truth.shape != upper.shape:
        raise ValueError("coverage inputs must share a shape")
    return float(np.mean((lower <= truth) & (truth <= upper)))


def weighted_histogram(sample: WeightedSample, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width weighted histogram spanning [min, max] of the values.

    Returns (edges, masses) with len(edges) = bins + 1 and total mass 1.
    """
    if int(bins) != bins or bins < 1:
        raise ValueError(f"bins must be a positive integer, got {bins}")
    values = sample.values
    if values.ndim != 1:
        raise ValueError("histogram expects a one-dimensional sample")
    vmin, vmax = float(values.min()), float(values.max())
    # A nearly-degenerate sample (span within a few ulps) cannot be split
    # into `bins` finite-width bins; use a unit window around it instead,
    # matching the all-equal convention (all mass in the central bin).
    if vmax - vmin <= 4.0 * bins * np.spacing(max(abs(vmin), abs(vmax), 1.0)):
        mid = 0.5 * (vmin + vmax)
        masses, edges = np.histogram(
            values, bins=int(bins), range=(mid - 0.5, mid + 0.5), weights=sample.weights
        )
    else:
        masses, edges = np.histogram(values, bins=int(bins), weights=sample.weights)
    return edges, masses
