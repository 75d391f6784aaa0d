"""Multiple-importance-sampling weighting functions alpha_nc(w).

Every kind sums to one over proposals at any common point w, which is what
keeps the (unnormalised) MIS estimate unbiased. Only BALANCE_HEURISTIC and
UNIFORM are guaranteed to stay inside [0, 1].
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import logsumexp_rows, softmax_rows
from .errors import DegeneratePointError, InvalidArgumentError
from .proposals import Landmarks, ProposalSet

UNDERFLOW_LOGPDF = -700.0


class WeightingKind(enum.Enum):
    BALANCE_HEURISTIC = "balance"
    COUPLED_OPTIMAL = "coupled"
    DECOUPLED_OPTIMAL = "decoupled"
    UNIFORM = "uniform"  # constant 1/C; recovers RFA when proposals are N(0, I)


@dataclass(frozen=True)
class Weighting:
    kind: WeightingKind = WeightingKind.DECOUPLED_OPTIMAL
    beta: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise InvalidArgumentError(f"beta must be finite and non-negative, got {self.beta}")


def query_affinity(Q: np.ndarray, landmarks: Landmarks) -> np.ndarray:
    """r'_nc: softmax over proposals of q_n . q~_c, shape (N, C)."""
    return softmax_rows(np.asarray(Q) @ landmarks.q_landmarks.T)


def _balance_and_density(log_q: np.ndarray):
    # log_q: (..., C) proposal log-densities at the probe point(s)
    top = log_q.max(axis=-1)
    if np.any(top < UNDERFLOW_LOGPDF):
        raise DegeneratePointError(
            f"all proposal log-densities are below {UNDERFLOW_LOGPDF} at the probe point"
        )
    balance = np.exp(log_q - logsumexp_rows(log_q, axis=-1)[..., None])
    return balance, np.exp(log_q)


def mis_weights(weighting: Weighting, proposals: ProposalSet, affinity: np.ndarray, n: int, omega) -> np.ndarray:
    """[alpha_n1(w), ..., alpha_nC(w)] at a single common point w."""
    if not 0 <= n < affinity.shape[0]:
        raise InvalidArgumentError(f"query index {n} out of range [0, {affinity.shape[0]})")
    omega = np.asarray(omega, dtype=np.float64)
    if not np.all(np.isfinite(omega)):
        raise InvalidArgumentError("probe point must be finite")
    C = proposals.C
    if weighting.kind is WeightingKind.UNIFORM:
        return np.full(C, 1.0 / C)
    log_q = proposals.logpdf_matrix(omega[None, :])[0]
    balance, density = _balance_and_density(log_q)
    r = affinity[n]
    if weighting.kind is WeightingKind.BALANCE_HEURISTIC:
        return balance
    if weighting.kind is WeightingKind.COUPLED_OPTIMAL:
        return balance + density * (r - balance @ r)
    return balance + weighting.beta * (r - r.mean())


def weights_at_samples(weighting: Weighting, log_q: np.ndarray, affinity: np.ndarray) -> np.ndarray:
    """alpha_nc(w_c) for every query n and proposal c, shape (N, C).

    ``log_q[i, c]`` is log q_c(w_i) where w_i is the sample drawn from proposal i.
    Entry (n, c) equals ``mis_weights(..., n, w_c)[c]``.
    """
    N, C = affinity.shape
    if weighting.kind is WeightingKind.UNIFORM:
        return np.full((N, C), 1.0 / C)
    balance_rows, density_rows = _balance_and_density(log_q)  # row i: weights at w_i
    own_balance = np.diag(balance_rows)
    if weighting.kind is WeightingKind.BALANCE_HEURISTIC:
        return np.broadcast_to(own_balance, (N, C)).copy()
    if weighting.kind is WeightingKind.COUPLED_OPTIMAL:
        # balance-weighted mean of r'_n at each sample point
        r_bar = affinity @ balance_rows.T  # (N, C): column c uses the point w_c
        return own_balance[None, :] + np.diag(density_rows)[None, :] * (affinity - r_bar)
    return own_balance[None, :] + weighting.beta * (affinity - affinity.mean(axis=1, keepdims=True))
