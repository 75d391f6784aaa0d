"""Randomized attention: unbiased single-query Monte-Carlo estimate of softmax attention.

For query n the target density is the Gaussian mixture

    p_n(w) = sum_m softmax_m(q_n . k_m) N(w; q_n + k_m, I)

and the integrand f_n(w) is a softmax over keys of (w . k_m - |k_m|^2 / 2)
applied to the values. Averaging f_n over draws from p_n is unbiased; the
cost is O(NM) because nothing is shared between queries.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import LOG_2PI, gaussian_logpdf_rows, inverse_cdf_pick, logsumexp_rows, softmax_rows
from .errors import InvalidArgumentError
from .exact import AttentionInputs, attention_logits, attention_probs
from .rng import RandomSource


class RaVariant(enum.Enum):
    UNBIASED = "unbiased"
    BIASED = "biased"


class Mode(enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class RaConfig:
    samples: int = 1
    variant: RaVariant = RaVariant.UNBIASED
    mode: Mode = Mode.TRAIN
    rng: RandomSource = field(default_factory=lambda: RandomSource(0))

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidArgumentError("RA needs at least one sample")
        if self.mode is Mode.EVAL and self.variant is RaVariant.UNBIASED:
            raise InvalidArgumentError(
                "eval mode is only defined for the biased variant; unbiased RA must sample"
            )


@dataclass(frozen=True)
class MixtureDensity:
    weights: np.ndarray  # (M,)
    means: np.ndarray  # (M, D)
    logZ: float

    def logpdf(self, omega) -> np.ndarray | float:
        omega = np.asarray(omega, dtype=np.float64)
        comp = gaussian_logpdf_rows(np.atleast_2d(omega), self.means)
        with np.errstate(divide="ignore"):
            out = logsumexp_rows(comp + np.log(self.weights)[None, :], axis=1)
        return float(out[0]) if omega.ndim == 1 else out

    def pdf(self, omega):
        return np.exp(self.logpdf(omega))


def ra_density(inputs: AttentionInputs, n: int) -> MixtureDensity:
    weights = attention_probs(inputs, n)
    logits = inputs.K @ inputs.Q[n]
    top = logits.max()
    return MixtureDensity(
        weights=weights,
        means=inputs.Q[n][None, :] + inputs.K,
        logZ=float(top + np.log(np.exp(logits - top).sum())),
    )


def unnormalized_density_log(inputs: AttentionInputs, n: int, omega) -> float:
    """log of N(w; 0, I) xi(q_n, w) sum_m xi(k_m, w), the unnormalised form of p_n."""
    omega = np.asarray(omega, dtype=np.float64)
    q, K = inputs.Q[n], inputs.K
    log_base = -0.5 * omega.size * LOG_2PI - 0.5 * omega @ omega
    log_q = omega @ q - 0.5 * q @ q
    log_k = K @ omega - 0.5 * (K * K).sum(1)
    top = log_k.max()
    return float(log_base + log_q + top + np.log(np.exp(log_k - top).sum()))


def aggregate(K: np.ndarray, V: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """f(w) for each row of ``omegas``: softmax_m(w . k_m - |k_m|^2/2) @ V.

    xi(q_n, w) is common to numerator and denominator and is divided out.
    """
    logits = omegas @ K.T - 0.5 * (K * K).sum(1)[None, :]
    return softmax_rows(logits) @ V


def f_n(inputs: AttentionInputs, n: int, omega) -> np.ndarray:
    if not 0 <= n < inputs.N:
        raise InvalidArgumentError(f"query index {n} out of range [0, {inputs.N})")
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (inputs.D,):
        raise InvalidArgumentError(f"omega must have shape ({inputs.D},), got {omega.shape}")
    return aggregate(inputs.K, inputs.V, omega[None, :])[0]


def _query_draws(cfg: RaConfig, N: int, D: int):
    # query n owns rows n of fixed-layout draws, so its randomness depends only on
    # (seed, stream, n): independent of N and of evaluation order
    u = cfg.rng.substream(0).generator().random((N, cfg.samples))
    eps = cfg.rng.substream(1).generator().standard_normal((N, cfg.samples, D))
    return u, eps


def ra_samples(inputs: AttentionInputs, cfg: RaConfig) -> np.ndarray:
    """The omegas RA evaluates f_n at, shape (N, S, D) (S = 1 in eval mode)."""
    Q, K = inputs.Q, inputs.K
    probs = softmax_rows(attention_logits(inputs))
    if cfg.variant is RaVariant.BIASED:
        centre = probs @ K + Q
        if cfg.mode is Mode.EVAL:
            return centre[:, None, :]
        _, eps = _query_draws(cfg, inputs.N, inputs.D)
        return centre[:, None, :] + eps
    u, eps = _query_draws(cfg, inputs.N, inputs.D)
    cdf = np.cumsum(probs, axis=1)
    last = probs.shape[1] - 1 - np.argmax(probs[:, ::-1] > 0, axis=1)
    picks = inverse_cdf_pick(cdf[:, None, :], u, last[:, None])
    return K[picks] + Q[:, None, :] + eps


def ra_attention(inputs: AttentionInputs, cfg: RaConfig) -> np.ndarray:
    omegas = ra_samples(inputs, cfg)
    out = np.zeros((inputs.N, inputs.V.shape[1]))
    for s in range(omegas.shape[1]):
        out += aggregate(inputs.K, inputs.V, omegas[:, s, :])
    return out / omegas.shape[1]
