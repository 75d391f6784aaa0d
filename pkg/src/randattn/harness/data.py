"""Synthetic and file-backed attention inputs for the experiment harness."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from ..errors import InvalidArgumentError
from ..exact import AttentionInputs
from ..rng import RandomSource
from .tensorio import read_tensor


@dataclass(frozen=True)
class IsotropicGaussian:
    """Q, K and V entries i.i.d. N(0, scale^2)."""

    scale: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise InvalidArgumentError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class CorrelatedGaussian:
    """Unit-variance rows whose columns share pairwise correlation ``rho``."""

    rho: float = 0.5

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise InvalidArgumentError(f"correlation must lie in [0, 1), got {self.rho}")


@dataclass(frozen=True)
class SmoothSequence:
    """Token sequences that vary slowly along the sequence axis.

    Every row of Q, K and V follows a stationary AR(1) process with lag-one
    correlation ``rho``. After 1/sqrt(D) scaling queries have norm near
    ``query_norm``; keys sit at ``key_offset`` along one random unit direction
    with per-token spread ``key_spread``. The result has sharply peaked,
    locally coherent attention rows, unlike the near-uniform rows of isotropic
    noise.
    """

    rho: float = 0.9
    query_norm: float = 12.0
    key_spread: float = 0.3
    key_offset: float = 2.0

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise InvalidArgumentError(f"rho must lie in [0, 1), got {self.rho}")
        if self.query_norm <= 0 or self.key_spread <= 0 or self.key_offset < 0:
            raise InvalidArgumentError("query_norm and key_spread must be positive, key_offset non-negative")


@dataclass(frozen=True)
class FromFile:
    q_path: str
    k_path: str
    v_path: str


Generator = Union[IsotropicGaussian, CorrelatedGaussian, SmoothSequence, FromFile]

GENERATOR_NAMES = {
    "isotropic": IsotropicGaussian,
    "correlated": CorrelatedGaussian,
    "smooth": SmoothSequence,
    "file": FromFile,
}


def generator_to_dict(gen: Generator) -> dict:
    name = next(k for k, v in GENERATOR_NAMES.items() if isinstance(gen, v))
    return {"name": name, **asdict(gen)}


def generator_from_dict(d: dict) -> Generator:
    d = dict(d)
    name = d.pop("name", None)
    if name not in GENERATOR_NAMES:
        raise InvalidArgumentError(f"unknown generator {name!r}; choose from {sorted(GENERATOR_NAMES)}")
    try:
        return GENERATOR_NAMES[name](**d)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameters for generator {name!r}: {exc}") from None


@dataclass(frozen=True)
class DataSpec:
    N: int
    M: int
    D: int
    generator: Generator = field(default_factory=IsotropicGaussian)
    heads: int = 1
    seed: int = 0

    def __post_init__(self):
        if min(self.N, self.M, self.D, self.heads) < 1:
            raise InvalidArgumentError("N, M, D and heads must all be at least 1")

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "D": self.D,
            "generator": generator_to_dict(self.generator),
            "heads": self.heads,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> DataSpec:
        return cls(
            N=int(d["N"]),
            M=int(d["M"]),
            D=int(d["D"]),
            generator=generator_from_dict(d.get("generator", {"name": "isotropic"})),
            heads=int(d.get("heads", 1)),
            seed=int(d.get("seed", 0)),
        )


def _ar1(g: np.random.Generator, rows: int, cols: int, rho: float) -> np.ndarray:
    X = np.empty((rows, cols))
    X[0] = g.standard_normal(cols)
    innov = np.sqrt(1.0 - rho * rho) * g.standard_normal((rows, cols))
    for i in range(1, rows):
        X[i] = rho * X[i - 1] + innov[i]
    return X


def _equicorrelated(g: np.random.Generator, rows: int, cols: int, rho: float) -> np.ndarray:
    common = g.standard_normal((rows, 1))
    return np.sqrt(rho) * common + np.sqrt(1.0 - rho) * g.standard_normal((rows, cols))


def _raw_tensors(spec: DataSpec, head: int):
    gen = spec.generator
    if isinstance(gen, FromFile):
        return read_tensor(gen.q_path), read_tensor(gen.k_path), read_tensor(gen.v_path)
    g = RandomSource(spec.seed).substream(0).substream(head).generator()
    N, M, D = spec.N, spec.M, spec.D
    if isinstance(gen, IsotropicGaussian):
        return (gen.scale * g.standard_normal((n, D)) for n in (N, M, M))
    if isinstance(gen, CorrelatedGaussian):
        return (_equicorrelated(g, n, D, gen.rho) for n in (N, M, M))
    Q = gen.query_norm * _ar1(g, N, D, gen.rho)
    K = _ar1(g, M, D, gen.rho)
    V = _ar1(g, M, D, gen.rho)
    direction = g.standard_normal(D)
    direction /= np.linalg.norm(direction)
    K = gen.key_spread * K / np.sqrt(D) + gen.key_offset * direction
    return Q, K, V


def generate_inputs(spec: DataSpec, head: int = 0) -> AttentionInputs:
    """Inputs for one head, with 1/sqrt(D) already folded into Q."""
    if not 0 <= head < spec.heads:
        raise InvalidArgumentError(f"head {head} out of range [0, {spec.heads})")
    Q, K, V = _raw_tensors(spec, head)
    if Q.shape != (spec.N, spec.D) or K.shape != (spec.M, spec.D) or V.shape[0] != spec.M:
        raise InvalidArgumentError(
            f"tensor shapes Q{Q.shape} K{K.shape} V{V.shape} do not match N={spec.N}, M={spec.M}, D={spec.D}"
        )
    return AttentionInputs(Q, K, V).scaled()


def generate_heads(spec: DataSpec) -> list[AttentionInputs]:
    return [generate_inputs(spec, h) for h in range(spec.heads)]
