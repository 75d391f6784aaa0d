"""Quadratic softmax attention, the reference every estimator is scored against."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import softmax_rows
from .errors import InvalidArgumentError, NumericalError


def _matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class AttentionInputs:
    """Queries (N, D), keys (M, D) and values (M, Dv) for one attention head.

    ``prescaled`` records whether 1/sqrt(D) has already been folded into Q.
    The estimators never rescale; call :meth:`scaled` once at ingestion.
    """

    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    prescaled: bool = field(default=False)

    def __post_init__(self):
        Q, K, V = _matrix(self.Q, "Q"), _matrix(self.K, "K"), _matrix(self.V, "V")
        if Q.shape[0] < 1 or K.shape[0] < 1:
            raise InvalidArgumentError("need at least one query and one key")
        if Q.shape[1] != K.shape[1]:
            raise InvalidArgumentError(f"Q has {Q.shape[1]} columns but K has {K.shape[1]}")
        if V.shape[0] != K.shape[0]:
            raise InvalidArgumentError(f"K has {K.shape[0]} rows but V has {V.shape[0]}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "V", V)

    @property
    def N(self) -> int:
        return self.Q.shape[0]

    @property
    def M(self) -> int:
        return self.K.shape[0]

    @property
    def D(self) -> int:
        return self.Q.shape[1]

    def scaled(self) -> AttentionInputs:
        if self.prescaled:
            return self
        return AttentionInputs(self.Q / math.sqrt(self.D), self.K, self.V, prescaled=True)

    def with_values(self, V) -> AttentionInputs:
        return AttentionInputs(self.Q, self.K, V, prescaled=self.prescaled)


def attention_logits(inputs: AttentionInputs) -> np.ndarray:
    return inputs.Q @ inputs.K.T


def softmax_attention(inputs: AttentionInputs) -> np.ndarray:
    probs = softmax_rows(attention_logits(inputs))
    out = probs @ inputs.V
    if not np.all(np.isfinite(out)):
        raise NumericalError("softmax attention produced non-finite output")
    return out


def attention_probs(inputs: AttentionInputs, n: int) -> np.ndarray:
    if not 0 <= n < inputs.N:
        raise InvalidArgumentError(f"query index {n} out of range [0, {inputs.N})")
    logits = inputs.K @ inputs.Q[n]
    e = np.exp(logits - logits.max())
    return e / e.sum()
