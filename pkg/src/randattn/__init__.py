"""Softmax attention and its Monte-Carlo estimators: RFA, randomized attention and LARA."""

__version__ = "0.1.0"

from .core import (
    categorical_draw,
    gaussian_draw,
    gaussian_logpdf_identity_cov,
    logsumexp,
    stable_softmax,
)
from .errors import (
    DegenerateDenominatorError,
    DegeneratePointError,
    FeatureOverflowError,
    InvalidArgumentError,
    NumericalError,
    TensorFormatError,
)
from .exact import AttentionInputs, attention_probs, softmax_attention
from .features import FeatureMapKind, FeatureSample, kernel_estimate, log_xi_positive, xi
from .lara import LaraConfig, LaraDiagnostics, lara_attention, lara_diagnostics, lara_from_samples
from .proposals import (
    Landmarks,
    ProposalKind,
    ProposalSet,
    build_proposals,
    compute_landmarks,
    proposal_draw,
    proposal_logpdf,
)
from .ra import MixtureDensity, Mode, RaConfig, RaVariant, f_n, ra_attention, ra_density
from .rfa import RfaConfig, rfa_attention, rfa_from_samples
from .rng import RandomSource
from .weighting import Weighting, WeightingKind, mis_weights, query_affinity

