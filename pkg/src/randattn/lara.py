"""Linear randomized attention: self-normalised MIS over C shared proposals.

Per proposal c one sample w_c is drawn and the key statistics

    N_c = sum_m xi(k_m, w_c) v_m,    D_c = sum_m xi(k_m, w_c)

are computed once. Query n then mixes them with coefficients

    alpha'_nc xi(q_n, w_c),   alpha'_nc = alpha_nc(w_c) N(w_c; 0, I) / q_c(w_c)

giving O(CM + CN) work. All exponentials are formed in log space with the
per-proposal key maximum and the per-query maximum factored out.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import LOG_2PI
from .errors import DegenerateDenominatorError, InvalidArgumentError
from .exact import AttentionInputs
from .features import FeatureMapKind, log_positive_features
from .proposals import ProposalKind, ProposalSet, build_proposals, compute_landmarks
from .ra import Mode
from .rfa import DENOMINATOR_FLOOR
from .rng import RandomSource
from .weighting import Weighting, query_affinity, weights_at_samples


@dataclass(frozen=True)
class LaraConfig:
    proposals: int = 16
    proposal_kind: ProposalKind = ProposalKind.GAUSSIAN_LOCAL
    weighting: Weighting = field(default_factory=Weighting)
    mode: Mode = Mode.TRAIN
    rng: RandomSource = field(default_factory=lambda: RandomSource(0))
    feature_kind: FeatureMapKind = FeatureMapKind.POSITIVE_SCALAR

    def __post_init__(self):
        if self.proposals < 1:
            raise InvalidArgumentError("LARA needs at least one proposal")


@dataclass(frozen=True)
class LaraDiagnostics:
    omegas: np.ndarray  # (C, D) one sample per proposal
    alpha: np.ndarray  # (N, C) alpha_nc(w_c)
    log_importance: np.ndarray  # (N, C) log[N(w_c;0,I)/q_c(w_c) xi(q_n,w_c)] + key max for c
    row_shift: np.ndarray  # (N,) max over c of log_importance
    coef: np.ndarray  # (N, C) alpha * exp(log_importance - row_shift), signed
    key_num: np.ndarray  # (C, Dv) N_c with the key maximum factored out
    key_den: np.ndarray  # (C,)
    numerator: np.ndarray  # (N, Dv)
    denominator: np.ndarray  # (N,)
    output: np.ndarray  # (N, Dv)

    @property
    def alpha_prime_log_magnitude(self) -> np.ndarray:
        """log |alpha'_nc xi(q_n, w_c)| up to the per-proposal key maximum."""
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.alpha)) + self.log_importance


def _signed_mix(coef: np.ndarray, stats: np.ndarray) -> np.ndarray:
    # positive and negative coefficient mass accumulated separately, then combined
    pos = np.where(coef > 0, coef, 0.0)
    neg = np.where(coef < 0, -coef, 0.0)
    return pos @ stats - neg @ stats


def lara_from_samples(
    inputs: AttentionInputs,
    proposals: ProposalSet,
    omegas: np.ndarray,
    affinity: np.ndarray,
    weighting: Weighting,
) -> LaraDiagnostics:
    """LARA for explicit per-proposal samples ``omegas`` (C, D) and affinities r' (N, C)."""
    Q, K, V = inputs.Q, inputs.K, inputs.V
    omegas = np.atleast_2d(np.asarray(omegas, dtype=np.float64))
    if omegas.shape != proposals.means.shape or affinity.shape != (inputs.N, proposals.C):
        raise InvalidArgumentError("samples / affinities do not match the proposal set")

    log_q = proposals.logpdf_matrix(omegas)  # (C, C): row = sample, column = proposal
    alpha = weights_at_samples(weighting, log_q, affinity)

    log_std_normal = -0.5 * inputs.D * LOG_2PI - 0.5 * (omegas * omegas).sum(1)
    log_ratio = log_std_normal - np.diag(log_q)

    log_k = log_positive_features(K, omegas)  # (M, C)
    key_max = log_k.max(axis=0)
    key_feat = np.exp(log_k - key_max)
    key_num = key_feat.T @ V
    key_den = key_feat.sum(axis=0)

    log_importance = log_positive_features(Q, omegas) + (key_max + log_ratio)[None, :]
    row_shift = log_importance.max(axis=1)
    coef = alpha * np.exp(log_importance - row_shift[:, None])

    numerator = _signed_mix(coef, key_num)
    denominator = _signed_mix(coef, key_den[:, None])[:, 0]
    bad = np.flatnonzero(~(np.abs(denominator) >= DENOMINATOR_FLOOR))
    if bad.size:
        n = int(bad[0])
        raise DegenerateDenominatorError(n, abs(denominator[n]))
    return LaraDiagnostics(
        omegas=omegas,
        alpha=alpha,
        log_importance=log_importance,
        row_shift=row_shift,
        coef=coef,
        key_num=key_num,
        key_den=key_den,
        numerator=numerator,
        denominator=denominator,
        output=numerator / denominator[:, None],
    )


def lara_diagnostics(
    inputs: AttentionInputs,
    cfg: LaraConfig,
    proposals: ProposalSet | None = None,
) -> LaraDiagnostics:
    """Run LARA and keep every intermediate.

    ``proposals`` replaces the set built from landmarks (the landmarks are still
    used for the query affinities r'_nc).
    """
    if cfg.feature_kind is not FeatureMapKind.POSITIVE_SCALAR:
        raise InvalidArgumentError("LARA is only defined for the positive scalar feature map")
    landmarks = compute_landmarks(inputs, cfg.proposals)
    if proposals is None:
        proposals = build_proposals(landmarks, inputs.K, cfg.proposal_kind)
    elif proposals.C != cfg.proposals or proposals.means.shape[1] != inputs.D:
        raise InvalidArgumentError("proposal set does not match the configured C and D")
    if cfg.mode is Mode.EVAL:
        omegas = proposals.means.copy()
    else:
        omegas = proposals.draw_all(cfg.rng)
    return lara_from_samples(inputs, proposals, omegas, query_affinity(inputs.Q, landmarks), cfg.weighting)


def lara_attention(inputs: AttentionInputs, cfg: LaraConfig, proposals: ProposalSet | None = None) -> np.ndarray:
    return lara_diagnostics(inputs, cfg, proposals).output
