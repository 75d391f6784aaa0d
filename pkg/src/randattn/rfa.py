"""Random feature attention: one shared set of samples for every query, linear cost."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDenominatorError, InvalidArgumentError
from .exact import AttentionInputs
from .features import FeatureMapKind, draw_feature_samples, log_positive_features
from .rng import RandomSource

DENOMINATOR_FLOOR = 1e-30


@dataclass(frozen=True)
class RfaConfig:
    samples: int = 64
    kind: FeatureMapKind = FeatureMapKind.POSITIVE_SCALAR
    rng: RandomSource = field(default_factory=lambda: RandomSource(0))

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidArgumentError("RFA needs at least one sample")


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    bad = np.flatnonzero(~(np.abs(den) >= DENOMINATOR_FLOOR))
    if bad.size:
        n = int(bad[0])
        raise DegenerateDenominatorError(n, abs(den[n]))
    return num / den[:, None]


def _positive_log_features(kind, X, omegas):
    logf = log_positive_features(X, omegas)
    if kind is FeatureMapKind.HYPERBOLIC_PAIR:
        # [exp(w.x), exp(-w.x)] share the 1/sqrt(2) factor, which cancels in the ratio
        logf = np.concatenate([logf, log_positive_features(X, -omegas)], axis=1)
    return logf


def _signed_features(kind, X, omegas, shifts):
    # exp(|x|^2 / 2) is factored out: constant per query (cancels), per-key it is kept
    proj = X @ omegas.T
    if kind is FeatureMapKind.TRIG_PAIR:
        return np.concatenate([np.sin(proj), np.cos(proj)], axis=1)
    return np.sqrt(2.0) * np.cos(proj + shifts[None, :])


def rfa_from_samples(
    inputs: AttentionInputs,
    omegas: np.ndarray,
    kind: FeatureMapKind = FeatureMapKind.POSITIVE_SCALAR,
    shifts: np.ndarray | None = None,
) -> np.ndarray:
    """RFA output for explicit samples ``omegas`` of shape (S, D)."""
    Q, K, V = inputs.Q, inputs.K, inputs.V
    omegas = np.atleast_2d(np.asarray(omegas, dtype=np.float64))
    if omegas.shape[1] != inputs.D:
        raise InvalidArgumentError(f"samples have dimension {omegas.shape[1]}, expected {inputs.D}")
    if kind.positive:
        log_k = _positive_log_features(kind, K, omegas)
        log_k_max = log_k.max(axis=0)
        key_feat = np.exp(log_k - log_k_max)
        log_q = _positive_log_features(kind, Q, omegas) + log_k_max
        query_feat = np.exp(log_q - log_q.max(axis=1, keepdims=True))
    else:
        if kind is FeatureMapKind.SHIFTED_COSINE and shifts is None:
            raise InvalidArgumentError("SHIFTED_COSINE requires per-sample shifts")
        half_sq = 0.5 * (K * K).sum(1)
        key_scale = np.exp(half_sq - half_sq.max())
        key_feat = key_scale[:, None] * _signed_features(kind, K, omegas, shifts)
        query_feat = _signed_features(kind, Q, omegas, shifts)
    kv_num = key_feat.T @ V
    kv_den = key_feat.sum(axis=0)
    return _ratio(query_feat @ kv_num, query_feat @ kv_den)


def rfa_attention(inputs: AttentionInputs, cfg: RfaConfig) -> np.ndarray:
    omegas, shifts = draw_feature_samples(cfg.kind, cfg.samples, inputs.D, cfg.rng)
    return rfa_from_samples(inputs, omegas, cfg.kind, shifts)
