"""Dense numerical primitives: stable softmax, logsumexp, identity-covariance Gaussians."""
from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError
from .rng import RandomSource

LOG_2PI = math.log(2.0 * math.pi)
PROB_SUM_TOL = 1e-12


def _as_finite_vector(x, name="logits") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a vector, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidArgumentError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


def logsumexp(logits) -> float:
    x = _as_finite_vector(logits)
    top = x.max()
    return float(top + np.log(np.exp(x - top).sum()))


def stable_softmax(logits) -> np.ndarray:
    x = _as_finite_vector(logits)
    e = np.exp(x - x.max())
    return e / e.sum()


def logsumexp_rows(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Vectorised logsumexp along ``axis`` (inputs assumed finite)."""
    top = np.max(x, axis=axis, keepdims=True)
    out = top + np.log(np.exp(x - top).sum(axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def softmax_rows(x: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def check_probability_vector(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidArgumentError("probability vector must be a nonempty 1-d array")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidArgumentError("probability vector entries must be finite and non-negative")
    if abs(w.sum() - 1.0) > PROB_SUM_TOL:
        raise InvalidArgumentError(f"probability vector sums to {w.sum()!r}, not 1")
    return w


def gaussian_logpdf_identity_cov(x, mean) -> float:
    x = np.asarray(x, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    if x.shape != mean.shape or x.ndim != 1:
        raise InvalidArgumentError(f"dimension mismatch: x {x.shape} vs mean {mean.shape}")
    d = x - mean
    return float(-0.5 * x.size * LOG_2PI - 0.5 * d @ d)


def gaussian_logpdf_rows(x: np.ndarray, means: np.ndarray) -> np.ndarray:
    """log N(x_i; means_j, I) for every pair, shape (len(x), len(means))."""
    x = np.atleast_2d(x)
    means = np.atleast_2d(means)
    sq = (
        (x * x).sum(1)[:, None]
        - 2.0 * x @ means.T
        + (means * means).sum(1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    return -0.5 * x.shape[1] * LOG_2PI - 0.5 * sq


def gaussian_draw(mean, rng: RandomSource) -> np.ndarray:
    mean = np.asarray(mean, dtype=np.float64)
    if not np.all(np.isfinite(mean)):
        raise InvalidArgumentError("mean contains non-finite entries")
    return mean + rng.generator().standard_normal(mean.shape)


def inverse_cdf_pick(cdf: np.ndarray, u: np.ndarray, last: np.ndarray | int) -> np.ndarray:
    """Smallest index m with u < cdf[m]; rows of ``cdf`` index the last axis.

    ``last`` is the final index carrying positive mass; a uniform that lands
    beyond a cdf total of 1 - eps (rounding) maps there.
    """
    idx = (cdf <= u[..., None]).sum(axis=-1)
    return np.minimum(idx, last)


def categorical_draw(weights, rng: RandomSource) -> int:
    w = check_probability_vector(weights)
    u = rng.generator().random()
    last = int(np.flatnonzero(w > 0)[-1])
    return int(inverse_cdf_pick(np.cumsum(w), np.asarray(u), last))
