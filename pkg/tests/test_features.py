import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randattn import (
    FeatureMapKind,
    FeatureOverflowError,
    FeatureSample,
    InvalidArgumentError,
    RandomSource,
    kernel_estimate,
    log_xi_positive,
    xi,
)
from randattn.features import draw_feature_samples

P = FeatureMapKind.POSITIVE_SCALAR
H = FeatureMapKind.HYPERBOLIC_PAIR


def test_arity():
    assert [k.arity for k in FeatureMapKind] == [1, 2, 2, 1]


def test_xi_examples(rng):
    w = rng.standard_normal(4)
    assert np.array_equal(xi(P, np.zeros(4), FeatureSample(w)), [1.0])
    x = rng.standard_normal(4)
    assert xi(P, x, FeatureSample(np.zeros(4)))[0] == pytest.approx(math.exp(-0.5 * x @ x), rel=1e-15)
    assert np.allclose(xi(H, np.zeros(4), FeatureSample(w)), [2**-0.5, 2**-0.5], rtol=1e-15)


def test_xi_trig_and_cosine_match_their_definitions(rng):
    x, w = rng.standard_normal((2, 3))
    s = 0.4 * x @ x
    trig = xi(FeatureMapKind.TRIG_PAIR, x, FeatureSample(w))
    assert np.allclose(trig, math.exp(0.5 * x @ x) * np.array([math.sin(w @ x), math.cos(w @ x)]), rtol=1e-14)
    cos = xi(FeatureMapKind.SHIFTED_COSINE, x, FeatureSample(w, s))
    assert cos[0] == pytest.approx(math.sqrt(2) * math.exp(0.5 * x @ x) * math.cos(w @ x + s), rel=1e-14)
    with pytest.raises(InvalidArgumentError):
        xi(FeatureMapKind.SHIFTED_COSINE, x, FeatureSample(w))


def test_xi_errors():
    with pytest.raises(InvalidArgumentError):
        xi(P, np.zeros(3), FeatureSample(np.zeros(4)))
    x = np.full(4, 20.0)
    with pytest.raises(FeatureOverflowError) as err:
        xi(P, x, FeatureSample(np.full(4, 20.0)))  # exponent 1600 - 800
    assert err.value.magnitude == pytest.approx(800.0)


def test_log_xi(rng):
    w = rng.standard_normal(5)
    assert log_xi_positive(np.zeros(5), FeatureSample(w)) == 0.0
    x = rng.standard_normal(5)
    assert log_xi_positive(x, FeatureSample(x)) == pytest.approx(0.5 * x @ x, rel=1e-15)
    val = log_xi_positive(x, FeatureSample(w))
    assert math.exp(val) == pytest.approx(xi(P, x, FeatureSample(w))[0], rel=1e-12)
    # far beyond the exp guard, the log form stays exact
    assert log_xi_positive(100 * x, FeatureSample(100 * x)) == pytest.approx(5000 * x @ x, rel=1e-15)


@given(arrays(np.float64, 4, elements=st.floats(-5, 5)), arrays(np.float64, 4, elements=st.floats(-5, 5)))
def test_positive_maps_are_positive(x, w):
    assert xi(P, x, FeatureSample(w))[0] > 0
    assert np.all(xi(H, x, FeatureSample(w)) > 0)


@pytest.mark.parametrize("kind", [P, H])
def test_kernel_estimate_at_origin_is_exact(kind):
    for s in (1, 7, 1000):
        assert kernel_estimate(kind, np.zeros(6), np.zeros(6), s, RandomSource(s)) == pytest.approx(1.0, abs=1e-15)


def test_kernel_single_sample_algebra(rng):
    x, y = rng.standard_normal((2, 4))
    w = draw_feature_samples(P, 1, 4, RandomSource(8))[0][0]
    expect = math.exp(w @ (x + y) - 0.5 * x @ x - 0.5 * y @ y)
    assert kernel_estimate(P, x, y, 1, RandomSource(8)) == pytest.approx(expect, rel=1e-13)


def test_kernel_estimate_large_sample(rng):
    x, y = rng.standard_normal((2, 16))
    x *= 1.7 / np.linalg.norm(x)
    y *= 1.2 / np.linalg.norm(y)
    est, se = kernel_estimate(P, x, y, 10**6, RandomSource(99), return_stderr=True)
    assert abs(est - math.exp(x @ y)) <= 3 * se


def test_kernel_estimate_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        kernel_estimate(P, np.zeros(3), np.zeros(3), 0, RandomSource(0))
    with pytest.raises(InvalidArgumentError):
        kernel_estimate(P, np.zeros(3), np.zeros(4), 5, RandomSource(0))


@pytest.mark.parametrize("kind", list(FeatureMapKind))
def test_kernel_estimate_unbiased_for_every_kind(kind, rng):
    x, y = rng.standard_normal((2, 4))
    x *= 0.8 / np.linalg.norm(x)
    y *= 0.6 / np.linalg.norm(y)
    runs = np.array([kernel_estimate(kind, x, y, 10**4, RandomSource(17, r)) for r in range(100)])
    grand_se = runs.std(ddof=1) / math.sqrt(runs.size)
    assert abs(runs.mean() - math.exp(x @ y)) <= 4 * grand_se


def test_single_sample_variance_grows_with_norm(rng):
    d = rng.standard_normal(8)
    d /= np.linalg.norm(d)
    variances = []
    for r in (0.0, 1.0, 2.0, 4.0):
        x = y = 0.5 * r * d
        w = RandomSource(4).generator().standard_normal((10**5, 8))
        vals = np.exp(w @ (x + y) - 0.5 * x @ x - 0.5 * y @ y)
        variances.append(vals.var())
    assert variances == sorted(variances)
    assert variances[0] == 0.0
