"""Experiment harness: data generation, studies, benchmarks and report emission."""

from .data import (
    CorrelatedGaussian,
    DataSpec,
    FromFile,
    IsotropicGaussian,
    SmoothSequence,
    generate_heads,
    generate_inputs,
)
from .report import ExperimentReport, emit_report, load_schema, parse_csv, to_csv, to_json
from .selftest import run_selftest
from .studies import (
    MethodOptions,
    approx_error_study,
    rerun_cell,
    run_method,
    scaling_benchmark,
    unbiasedness_study,
)
from .tensorio import read_tensor, write_tensor
