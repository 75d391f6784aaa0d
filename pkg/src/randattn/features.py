"""Randomized mappings xi(x, omega) whose inner products estimate exp(x . y)."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import FeatureOverflowError, InvalidArgumentError
from .rng import RandomSource

EXP_GUARD = 700.0
_SQRT2 = math.sqrt(2.0)


class FeatureMapKind(enum.Enum):
    POSITIVE_SCALAR = "positive"
    HYPERBOLIC_PAIR = "hyperbolic"
    TRIG_PAIR = "trig"
    SHIFTED_COSINE = "cosine"

    @property
    def arity(self) -> int:
        return 2 if self in (FeatureMapKind.HYPERBOLIC_PAIR, FeatureMapKind.TRIG_PAIR) else 1

    @property
    def positive(self) -> bool:
        return self in (FeatureMapKind.POSITIVE_SCALAR, FeatureMapKind.HYPERBOLIC_PAIR)


@dataclass(frozen=True)
class FeatureSample:
    omega: np.ndarray
    shift: float | None = None  # only used by SHIFTED_COSINE, in [0, 2*pi)


def _check_pair(x, omega):
    x = np.asarray(x, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if x.ndim != 1 or x.shape != omega.shape:
        raise InvalidArgumentError(f"dimension mismatch: x {x.shape} vs omega {omega.shape}")
    return x, omega


def _guard(exponent: float) -> None:
    if exponent > EXP_GUARD:
        raise FeatureOverflowError(exponent)


def log_xi_positive(x, sample: FeatureSample) -> float:
    x, omega = _check_pair(x, sample.omega)
    return float(omega @ x - 0.5 * x @ x)


def xi(kind: FeatureMapKind, x, sample: FeatureSample) -> np.ndarray:
    x, omega = _check_pair(x, sample.omega)
    proj = float(omega @ x)
    half_sq = 0.5 * float(x @ x)
    if kind is FeatureMapKind.POSITIVE_SCALAR:
        _guard(proj - half_sq)
        return np.array([math.exp(proj - half_sq)])
    if kind is FeatureMapKind.HYPERBOLIC_PAIR:
        _guard(abs(proj) - half_sq)
        return np.array([math.exp(proj - half_sq), math.exp(-proj - half_sq)]) / _SQRT2
    _guard(half_sq)
    scale = math.exp(half_sq)
    if kind is FeatureMapKind.TRIG_PAIR:
        return scale * np.array([math.sin(proj), math.cos(proj)])
    if sample.shift is None:
        raise InvalidArgumentError("SHIFTED_COSINE requires a shift b in [0, 2*pi)")
    return np.array([_SQRT2 * scale * math.cos(proj + sample.shift)])


def _kernel_products(kind, x, y, omegas, shifts):
    # per-sample xi(x, w)^T xi(y, w), vectorised over the rows of omegas
    px, py = omegas @ x, omegas @ y
    hx, hy = 0.5 * x @ x, 0.5 * y @ y
    if kind is FeatureMapKind.POSITIVE_SCALAR:
        expo = px + py - hx - hy
        top = float(expo.max())
        _guard(top)
        return np.exp(expo)
    if kind is FeatureMapKind.HYPERBOLIC_PAIR:
        expo = np.abs(px + py) - hx - hy
        _guard(float(expo.max()))
        return 0.5 * (np.exp(px + py - hx - hy) + np.exp(-px - py - hx - hy))
    _guard(hx + hy)
    scale = math.exp(hx + hy)
    if kind is FeatureMapKind.TRIG_PAIR:
        return scale * np.cos(px - py)
    return 2.0 * scale * np.cos(px + shifts) * np.cos(py + shifts)


def kernel_estimate(
    kind: FeatureMapKind,
    x,
    y,
    samples: int,
    rng: RandomSource,
    return_stderr: bool = False,
    chunk: int = 1 << 16,
):
    """Monte-Carlo estimate of exp(x . y) from ``samples`` random features.

    With ``return_stderr`` the estimated standard error of the mean is
    returned alongside the estimate.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise InvalidArgumentError(f"dimension mismatch: x {x.shape} vs y {y.shape}")
    if samples < 1:
        raise InvalidArgumentError("sample count must be >= 1")
    gen = rng.generator()
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        omegas = gen.standard_normal((n, x.size))
        shifts = gen.uniform(0.0, 2.0 * math.pi, n) if kind is FeatureMapKind.SHIFTED_COSINE else None
        prods = _kernel_products(kind, x, y, omegas, shifts)
        total += prods.sum()
        total_sq += (prods * prods).sum()
        done += n
    mean = total / samples
    if not return_stderr:
        return mean
    if samples < 2:
        return mean, math.inf
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return mean, math.sqrt(var / samples)


def log_positive_features(X: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """log xi(x_i, w_s) for the positive scalar map, shape (rows, samples)."""
    return X @ omegas.T - 0.5 * (X * X).sum(1)[:, None]


def draw_feature_samples(kind: FeatureMapKind, count: int, dim: int, rng: RandomSource):
    """Standard-normal omegas (count, dim) and, for SHIFTED_COSINE, uniform shifts."""
    gen = rng.generator()
    omegas = gen.standard_normal((count, dim))
    shifts = gen.uniform(0.0, 2.0 * math.pi, count) if kind is FeatureMapKind.SHIFTED_COSINE else None
    return omegas, shifts
