"""Approximation-error, unbiasedness and scaling experiments.

Every random quantity in a study comes from a :class:`RandomSource` derived
from the top-level seed and the trial (or chunk) index, and results are merged
in index order. A study therefore produces identical numbers whether it runs
serially or across a process pool.
"""
from __future__ import annotations

import functools
import statistics
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError, NumericalError
from ..exact import AttentionInputs, softmax_attention
from ..features import FeatureMapKind, log_positive_features
from ..lara import LaraConfig, lara_attention
from ..proposals import ProposalKind
from ..ra import Mode, RaConfig, RaVariant, ra_attention
from ..rfa import RfaConfig, rfa_attention
from ..rng import RandomSource
from ..weighting import Weighting, WeightingKind
from .data import DataSpec, IsotropicGaussian, generate_heads
from .report import ExperimentReport

METHODS = ("exact", "rfa", "ra", "ra-biased", "lara")
UNBIASED_METHODS = ("ra", "kernel", "rfa", "exact")
DEFAULT_GRID = (8, 16, 32, 64, 128)
_CHUNK = 500


@dataclass(frozen=True)
class MethodOptions:
    feature_kind: FeatureMapKind = FeatureMapKind.POSITIVE_SCALAR
    proposal_kind: ProposalKind = ProposalKind.GAUSSIAN_LOCAL
    weighting: WeightingKind = WeightingKind.DECOUPLED_OPTIMAL
    beta: float = 1.0
    mode: Mode = Mode.TRAIN

    def to_dict(self) -> dict:
        return {
            "feature_kind": self.feature_kind.value,
            "proposal_kind": self.proposal_kind.value,
            "weighting": self.weighting.value,
            "beta": self.beta,
            "mode": self.mode.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MethodOptions:
        return cls(
            feature_kind=FeatureMapKind(d.get("feature_kind", "positive")),
            proposal_kind=ProposalKind(d.get("proposal_kind", "local")),
            weighting=WeightingKind(d.get("weighting", "decoupled")),
            beta=float(d.get("beta", 1.0)),
            mode=Mode(d.get("mode", "train")),
        )


def run_method(method: str, inputs: AttentionInputs, samples: int, rng: RandomSource,
               opts: MethodOptions = MethodOptions()) -> np.ndarray:
    """One estimator call. ``samples`` is S for rfa / ra and C for lara."""
    if method == "exact":
        return softmax_attention(inputs)
    if method == "rfa":
        return rfa_attention(inputs, RfaConfig(samples, opts.feature_kind, rng))
    if method == "ra":
        return ra_attention(inputs, RaConfig(samples, RaVariant.UNBIASED, opts.mode, rng))
    if method == "ra-biased":
        return ra_attention(inputs, RaConfig(samples, RaVariant.BIASED, opts.mode, rng))
    if method == "lara":
        cfg = LaraConfig(samples, opts.proposal_kind, Weighting(opts.weighting, opts.beta), opts.mode, rng)
        return lara_attention(inputs, cfg)
    raise InvalidArgumentError(f"unknown method {method!r}; choose from {METHODS}")


def trial_source(seed: int, trial: int) -> RandomSource:
    # substream 0 of the root is reserved for data generation
    return RandomSource(seed).substream(1).substream(trial)


def cell_source(method: str, seed: int, trial: int, samples: int) -> RandomSource:
    """RA ignores the grid value so that its single-sample curve is exactly flat."""
    base = trial_source(seed, trial)
    return base if method in ("exact", "ra", "ra-biased") else base.substream(samples)


def effective_samples(method: str, grid_value: int) -> int:
    if method == "exact":
        return 0
    if method in ("ra", "ra-biased"):
        return 1
    return grid_value


@functools.lru_cache(maxsize=8)
def _heads_and_targets(spec: DataSpec):
    heads = generate_heads(spec)
    return heads, [softmax_attention(h) for h in heads]


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# --- approximation error ----------------------------------------------------

def _error_cell(task):
    spec, method, grid_value, trial, seed, opts = task
    heads, _ = _heads_and_targets(spec)
    rng = cell_source(method, seed, trial, grid_value)
    samples = max(effective_samples(method, grid_value), 1)
    try:
        return [run_method(method, h, samples, rng, opts) for h in heads], "ok"
    except (NumericalError, InvalidArgumentError) as exc:
        return None, f"error: {type(exc).__name__}: {exc}"


def cell_config(spec: DataSpec, method: str, grid_value: int, trial: int, seed: int, opts: MethodOptions) -> dict:
    rng = cell_source(method, seed, trial, grid_value)
    return {
        "data": spec.to_dict(),
        "method": method,
        "grid_value": grid_value,
        "samples": effective_samples(method, grid_value),
        "trial": trial,
        "options": opts.to_dict(),
        "rng": {"seed": rng.seed, "stream": rng.stream, "counter": rng.counter},
    }


def rerun_cell(config: dict) -> float:
    """Recompute the MSE of a single approx-error cell from its echoed config."""
    spec = DataSpec.from_dict(config["data"])
    heads, targets = _heads_and_targets(spec)
    rng = RandomSource(**config["rng"])
    samples = max(config["samples"], 1)
    opts = MethodOptions.from_dict(config["options"])
    outs = [run_method(config["method"], h, samples, rng, opts) for h in heads]
    return float(np.mean([((y - t) ** 2).mean() for y, t in zip(outs, targets)]))


def approx_error_study(spec: DataSpec, methods=("ra", "lara", "rfa"), grid=DEFAULT_GRID, trials: int = 20,
                       seed: int = 0, opts: MethodOptions = MethodOptions(), workers: int = 1) -> ExperimentReport:
    """Per-trial MSE against exact softmax attention plus per-(method, grid) aggregates.

    Aggregate rows have ``trial = None`` and carry mean MSE, its standard error
    across trials, the Frobenius norm of the empirical bias and the summed
    per-entry variance of the estimates.
    """
    if trials < 1:
        raise InvalidArgumentError("trials must be at least 1")
    for m in methods:
        if m not in METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}; choose from {METHODS}")
    grid = [int(g) for g in grid]
    _, targets = _heads_and_targets(spec)
    tasks = [(spec, m, g, t, seed, opts) for m in methods for g in grid for t in range(trials)]
    results = iter(_map(_error_cell, tasks, workers))

    records, summary = [], {}
    for m in methods:
        for g in grid:
            outs, per_trial = [], []
            for t in range(trials):
                est, status = next(results)
                cfg = cell_config(spec, m, g, t, seed, opts)
                mse = None
                if est is not None:
                    mse = float(np.mean([((y - tg) ** 2).mean() for y, tg in zip(est, targets)]))
                    outs.append(est)
                    per_trial.append(mse)
                records.append(_study_record(m, g, spec, seed, cfg["rng"]["stream"], t, mse, status, cfg))
            agg = _aggregate(outs, per_trial, targets)
            cfg = {"data": spec.to_dict(), "method": m, "grid_value": g, "trials": trials,
                   "samples": effective_samples(m, g), "options": opts.to_dict(), "seed": seed}
            status = "ok" if len(per_trial) == trials else f"partial: {trials - len(per_trial)} failed trials"
            rec = _study_record(m, g, spec, seed, None, None, agg["mse"], status, cfg)
            rec.update(mse_se=agg["mse_se"], bias_norm=agg["bias_norm"], variance_trace=agg["variance_trace"])
            records.append(rec)
            summary.setdefault(m, {})[str(g)] = {"mse": agg["mse"], "mse_se": agg["mse_se"], "ok_trials": len(per_trial)}
    config = {"study": "approx-error", "data": spec.to_dict(), "methods": list(methods), "grid": grid,
              "trials": trials, "seed": seed, "options": opts.to_dict()}
    return ExperimentReport("approx-error", records, config, summary)


def _study_record(method, grid_value, spec, seed, stream, trial, mse, status, cfg) -> dict:
    return {
        "method": method, "samples": effective_samples(method, grid_value), "N": spec.N, "M": spec.M,
        "D": spec.D, "seed": seed, "stream": stream, "trial": trial, "mse": mse, "mse_se": None,
        "bias_norm": None, "variance_trace": None, "wall_time": None, "peak_alloc": None,
        "status": status, "config": cfg,
    }


def _aggregate(outs, per_trial, targets) -> dict:
    if not per_trial:
        return {"mse": None, "mse_se": None, "bias_norm": None, "variance_trace": None}
    T = len(per_trial)
    se = statistics.stdev(per_trial) / np.sqrt(T) if T > 1 else None
    bias_sq, var = 0.0, None
    for h, target in enumerate(targets):
        stack = np.stack([o[h] for o in outs])
        bias_sq += float(((stack.mean(axis=0) - target) ** 2).sum())
        if T > 1:
            var = (var or 0.0) + float(stack.var(axis=0, ddof=1).sum())
    return {"mse": float(np.mean(per_trial)), "mse_se": None if se is None else float(se),
            "bias_norm": float(np.sqrt(bias_sq)), "variance_trace": var}


# --- unbiasedness -------------------------------------------------------------

def _kernel_matrix_estimate(inputs: AttentionInputs, samples: int, rng: RandomSource) -> np.ndarray:
    omegas = rng.generator().standard_normal((samples, inputs.D))
    lq = log_positive_features(inputs.Q, omegas)
    lk = log_positive_features(inputs.K, omegas)
    return np.exp(lq[:, None, :] + lk[None, :, :]).mean(axis=2)


def _unbiased_target(method: str, inputs: AttentionInputs) -> np.ndarray:
    if method == "kernel":
        return np.exp(inputs.Q @ inputs.K.T)
    return softmax_attention(inputs)


def _one_trial(method, inputs, samples, rng):
    if method == "kernel":
        return _kernel_matrix_estimate(inputs, samples, rng)
    if method == "ra":
        return ra_attention(inputs, RaConfig(samples, rng=rng))
    if method == "rfa":
        return rfa_attention(inputs, RfaConfig(samples, rng=rng))
    return softmax_attention(inputs)


def _unbiased_chunk(task):
    spec, method, samples, seed, start, stop = task
    inputs = _heads_and_targets(spec)[0][0]
    stack = np.stack([_one_trial(method, inputs, samples, trial_source(seed, t)) for t in range(start, stop)])
    mean = stack.mean(axis=0)
    return stop - start, mean, ((stack - mean) ** 2).sum(axis=0)


def _combine(parts):
    # Chan et al. pairwise update, applied in chunk order
    n, mean, m2 = parts[0]
    for nb, mb, m2b in parts[1:]:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta * delta * (n * nb / tot)
        n = tot
    return n, mean, m2


def z_scores(mean: np.ndarray, target: np.ndarray, std_error: np.ndarray) -> np.ndarray:
    """(mean - target) / s.e.

    A standard error at the round-off floor means the estimator is deterministic;
    such entries score 0 when the mean matches the target to round-off, +-inf otherwise.
    """
    diff = mean - target
    floor = 16 * np.finfo(float).eps * np.maximum(np.abs(target), np.abs(mean))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / std_error
    degenerate = std_error <= floor
    z[degenerate] = np.where(np.abs(diff[degenerate]) <= floor[degenerate], 0.0,
                             np.copysign(np.inf, diff[degenerate]))
    return z


def unbiasedness_study(spec: DataSpec, method: str = "ra", trials: int = 50_000, samples: int = 1,
                       seed: int = 0, workers: int = 1) -> ExperimentReport:
    """Grand mean of ``trials`` independent estimates versus the exact target, per entry.

    ``kernel`` estimates the matrix exp(q_n . k_m); the others estimate the
    attention output. The summary reports the fraction of entries with |z| <= 4.
    """
    if method not in UNBIASED_METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}; choose from {UNBIASED_METHODS}")
    if trials < 2:
        raise InvalidArgumentError("at least two trials are needed for a standard error")
    inputs = _heads_and_targets(spec)[0][0]
    target = _unbiased_target(method, inputs)
    tasks = [(spec, method, samples, seed, a, min(a + _CHUNK, trials)) for a in range(0, trials, _CHUNK)]
    n, mean, m2 = _combine(_map(_unbiased_chunk, tasks, workers))
    se = np.sqrt(m2 / (n - 1) / n)
    z = z_scores(mean, target, se)
    config = {"study": "unbiasedness", "data": spec.to_dict(), "method": method, "trials": trials,
              "samples": samples, "seed": seed}
    records = [
        {"method": method, "row": i, "col": j, "trials": trials, "estimate": float(mean[i, j]),
         "oracle": float(target[i, j]), "std_error": float(se[i, j]), "z": float(z[i, j]),
         "status": "ok", "config": config}
        for i in range(mean.shape[0]) for j in range(mean.shape[1])
    ]
    inside = float(np.mean(np.abs(z) <= 4.0))
    summary = {"entries": int(z.size), "fraction_within_4": inside, "max_abs_z": float(np.max(np.abs(z)))}
    return ExperimentReport("unbiasedness", records, config, summary)


# --- scaling ------------------------------------------------------------------

def _timed(fn, repeats: int):
    fn()  # warmup, discarded
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    tracemalloc.start()
    try:
        fn()
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return statistics.median(times), peak


def scaling_benchmark(lengths, methods=("exact", "ra", "rfa", "lara"), D: int = 16, samples: int = 16,
                      proposals: int = 16, repeats: int = 5, seed: int = 0,
                      opts: MethodOptions = MethodOptions()) -> ExperimentReport:
    """Median wall time of ``repeats`` runs and traced peak allocation per (method, N), with M = N.

    Timing runs serially regardless of the worker count. RA uses one sample;
    ``samples`` applies to RFA and ``proposals`` to LARA.
    """
    lengths = [int(n) for n in lengths]
    if lengths != sorted(lengths):
        raise InvalidArgumentError("lengths must be ascending")
    records = []
    for N in lengths:
        spec = DataSpec(N, N, D, IsotropicGaussian(), seed=seed)
        inputs = generate_heads(spec)[0]
        rng = trial_source(seed, 0)
        for m in methods:
            s = {"rfa": samples, "lara": proposals}.get(m, 1)
            cfg = {"data": spec.to_dict(), "method": m, "samples": effective_samples(m, s), "repeats": repeats,
                   "options": opts.to_dict(), "rng": {"seed": rng.seed, "stream": rng.stream, "counter": 0}}
            rec = _study_record(m, s, spec, seed, rng.stream, None, None, "ok", cfg)
            try:
                wall, peak = _timed(lambda: run_method(m, inputs, s, rng, opts), repeats)
                rec.update(wall_time=wall, peak_alloc=int(peak))
            except MemoryError:
                rec["status"] = "skipped: out of memory"
            records.append(rec)
    config = {"study": "bench", "lengths": lengths, "methods": list(methods), "D": D, "samples": samples,
              "proposals": proposals, "repeats": repeats, "seed": seed, "options": opts.to_dict()}
    return ExperimentReport("bench", records, config, {})


def time_ratio(report: ExperimentReport, method: str, n_small: int, n_large: int) -> float:
    t = {r["N"]: r["wall_time"] for r in report.records if r["method"] == method}
    return t[n_large] / t[n_small]
