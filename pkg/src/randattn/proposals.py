"""Landmarks and proposal distributions for linear randomized attention."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import gaussian_logpdf_identity_cov, gaussian_logpdf_rows, inverse_cdf_pick, logsumexp_rows, softmax_rows
from .errors import InvalidArgumentError
from .exact import AttentionInputs
from .rng import RandomSource


def segment_bounds(length: int, count: int) -> np.ndarray:
    """Contiguous [start, stop) pairs; the first ``length % count`` segments get one extra row."""
    base, extra = divmod(length, count)
    sizes = np.full(count, base)
    sizes[:extra] += 1
    stops = np.cumsum(sizes)
    return np.stack([stops - sizes, stops], axis=1)


def _segment_means(X: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    return np.stack([X[a:b].mean(axis=0) for a, b in bounds])


@dataclass(frozen=True)
class Landmarks:
    q_landmarks: np.ndarray  # (C, D)
    k_landmarks: np.ndarray  # (C, D)
    q_bounds: np.ndarray  # (C, 2)
    k_bounds: np.ndarray  # (C, 2)

    @property
    def C(self) -> int:
        return self.q_landmarks.shape[0]

    @property
    def q_sizes(self) -> np.ndarray:
        return self.q_bounds[:, 1] - self.q_bounds[:, 0]


def compute_landmarks(inputs: AttentionInputs, C: int) -> Landmarks:
    if not 1 <= C <= min(inputs.N, inputs.M):
        raise InvalidArgumentError(f"proposal count C={C} must lie in [1, min(N, M)={min(inputs.N, inputs.M)}]")
    qb = segment_bounds(inputs.N, C)
    kb = segment_bounds(inputs.M, C)
    return Landmarks(_segment_means(inputs.Q, qb), _segment_means(inputs.K, kb), qb, kb)


class ProposalKind(enum.Enum):
    MIXTURE_PER_SEGMENT = "mixture"
    GAUSSIAN_FULL_KEYS = "full-keys"
    GAUSSIAN_LOCAL = "local"
    GAUSSIAN_KEY_LANDMARK_ATTN = "key-landmark-attn"


@dataclass(frozen=True)
class ProposalSet:
    """C identity-covariance proposals.

    Gaussian kinds carry one mean per proposal. The mixture kind carries, per
    proposal c, component weights softmax_m(q~_c . k_m) over means q~_c + k_m.
    """

    kind: ProposalKind
    means: np.ndarray  # (C, D): Gaussian means, or mixture expectations
    mix_weights: np.ndarray | None = None  # (C, M)
    q_landmarks: np.ndarray | None = None  # (C, D)
    keys: np.ndarray | None = None  # (M, D)

    @property
    def C(self) -> int:
        return self.means.shape[0]

    @property
    def is_mixture(self) -> bool:
        return self.kind is ProposalKind.MIXTURE_PER_SEGMENT

    @classmethod
    def gaussian(cls, means, kind: ProposalKind = ProposalKind.GAUSSIAN_LOCAL) -> ProposalSet:
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        if kind is ProposalKind.MIXTURE_PER_SEGMENT:
            raise InvalidArgumentError("use build_proposals for the mixture kind")
        return cls(kind, means)

    def _check_index(self, c: int) -> None:
        if not 0 <= c < self.C:
            raise InvalidArgumentError(f"proposal index {c} out of range [0, {self.C})")

    def logpdf_matrix(self, omegas: np.ndarray) -> np.ndarray:
        """log q_c(w_i) for every sample row i and proposal c, shape (rows, C)."""
        omegas = np.atleast_2d(omegas)
        if not self.is_mixture:
            return gaussian_logpdf_rows(omegas, self.means)
        out = np.empty((omegas.shape[0], self.C))
        with np.errstate(divide="ignore"):
            log_w = np.log(self.mix_weights)
        for c in range(self.C):
            comp = gaussian_logpdf_rows(omegas, self.q_landmarks[c][None, :] + self.keys)
            out[:, c] = logsumexp_rows(comp + log_w[c][None, :], axis=1)
        return out

    def draw_all(self, rng: RandomSource) -> np.ndarray:
        """One sample from every proposal, shape (C, D)."""
        gen = rng.generator()
        eps = gen.standard_normal(self.means.shape)
        if not self.is_mixture:
            return self.means + eps
        u = gen.random(self.C)
        cdf = np.cumsum(self.mix_weights, axis=1)
        last = self.mix_weights.shape[1] - 1 - np.argmax(self.mix_weights[:, ::-1] > 0, axis=1)
        picks = inverse_cdf_pick(cdf, u, last)
        return self.q_landmarks + self.keys[picks] + eps


def build_proposals(landmarks: Landmarks, K: np.ndarray, kind: ProposalKind = ProposalKind.GAUSSIAN_LOCAL) -> ProposalSet:
    qt, kt = landmarks.q_landmarks, landmarks.k_landmarks
    if kind is ProposalKind.GAUSSIAN_LOCAL:
        return ProposalSet(kind, qt + kt)
    if kind is ProposalKind.GAUSSIAN_KEY_LANDMARK_ATTN:
        return ProposalSet(kind, qt + softmax_rows(kt @ kt.T) @ kt)
    weights = softmax_rows(qt @ K.T)
    if kind is ProposalKind.GAUSSIAN_FULL_KEYS:
        return ProposalSet(kind, qt + weights @ K)
    return ProposalSet(kind, qt + weights @ K, mix_weights=weights, q_landmarks=qt, keys=K)


def proposal_draw(proposals: ProposalSet, c: int, rng: RandomSource) -> np.ndarray:
    proposals._check_index(c)
    gen = rng.generator()
    eps = gen.standard_normal(proposals.means.shape[1])
    if not proposals.is_mixture:
        return proposals.means[c] + eps
    w = proposals.mix_weights[c]
    last = int(np.flatnonzero(w > 0)[-1])
    m = int(inverse_cdf_pick(np.cumsum(w), np.asarray(gen.random()), last))
    return proposals.q_landmarks[c] + proposals.keys[m] + eps


def proposal_logpdf(proposals: ProposalSet, c: int, omega) -> float:
    proposals._check_index(c)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (proposals.means.shape[1],):
        raise InvalidArgumentError(
            f"omega has shape {omega.shape}, proposals live in dimension {proposals.means.shape[1]}"
        )
    if not proposals.is_mixture:
        return gaussian_logpdf_identity_cov(omega, proposals.means[c])
    return float(proposals.logpdf_matrix(omega[None, :])[0, c])
