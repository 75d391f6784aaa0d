import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randattn import (
    InvalidArgumentError,
    RandomSource,
    categorical_draw,
    gaussian_draw,
    gaussian_logpdf_identity_cov,
    logsumexp,
    stable_softmax,
)
from randattn.core import gaussian_logpdf_rows

finite = st.floats(-50, 50, allow_nan=False)


def test_softmax_examples():
    assert np.allclose(stable_softmax([0, 0]), [0.5, 0.5], atol=0, rtol=1e-15)
    assert np.allclose(stable_softmax([math.log(2), 0]), [2 / 3, 1 / 3], rtol=1e-15)
    out = stable_softmax([1000, 0])
    assert np.all(np.isfinite(out))
    assert out[0] == 1.0 and out[1] < 1e-300


@pytest.mark.parametrize("bad", [[], [1.0, np.nan], [np.inf, 0.0]])
def test_softmax_and_logsumexp_reject_bad_input(bad):
    with pytest.raises(InvalidArgumentError):
        stable_softmax(bad)
    with pytest.raises(InvalidArgumentError):
        logsumexp(bad)


def test_logsumexp_examples(rng):
    assert logsumexp([0.0]) == 0.0
    assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2), abs=1e-12)
    x = rng.uniform(-5, 5, 10)
    assert abs(logsumexp(x) - math.log(sum(math.exp(v) for v in x))) < 1e-12


@given(arrays(np.float64, st.integers(1, 12), elements=finite), st.floats(-1e3, 1e3))
def test_softmax_shift_invariance(x, c):
    p = stable_softmax(x)
    assert abs(p.sum() - 1) < 1e-12
    assert np.abs(stable_softmax(x + c) - p).max() < 1e-12


@given(arrays(np.float64, st.integers(1, 12), elements=finite))
def test_logsumexp_dominates_max(x):
    assert math.exp(logsumexp(x) - x.max()) >= 1.0


def test_gaussian_draw_moments():
    eps = gaussian_draw(np.zeros((10**6, 2)), RandomSource(3))
    assert np.all(np.abs(eps.mean(0)) < 4 / math.sqrt(10**6))
    assert np.all(np.abs(eps.var(0) - 1) < 0.01)


def test_gaussian_draw_determinism_and_shift():
    a = gaussian_draw(np.zeros(5), RandomSource(1, 2))
    b = gaussian_draw(np.zeros(5), RandomSource(1, 2))
    assert np.array_equal(a, b)
    mu = np.arange(5.0)
    assert np.allclose(gaussian_draw(mu, RandomSource(1, 2)) - mu, a, atol=1e-15)


def test_gaussian_draw_rejects_non_finite_mean():
    with pytest.raises(InvalidArgumentError):
        gaussian_draw([0.0, np.nan], RandomSource(0))


def test_categorical_degenerate():
    for s in range(50):
        assert categorical_draw([1.0, 0.0, 0.0], RandomSource(s)) == 0
        assert categorical_draw([0.0, 0.0, 1.0], RandomSource(s)) == 2


def test_categorical_frequency():
    hits = sum(categorical_draw([0.5, 0.5], RandomSource(9, s)) == 0 for s in range(10**5))
    assert abs(hits / 10**5 - 0.5) < 0.01


@pytest.mark.parametrize("bad", [[0.0, 0.0], [0.7, 0.7], [-0.5, 1.5], [np.nan, 1.0], []])
def test_categorical_rejects_invalid_weights(bad):
    with pytest.raises(InvalidArgumentError):
        categorical_draw(bad, RandomSource(0))


def test_logpdf_examples(rng):
    assert gaussian_logpdf_identity_cov([1.0, 2.0], [1.0, 2.0]) == pytest.approx(-1.8378770664, abs=1e-10)
    assert gaussian_logpdf_identity_cov([1.0], [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi) - 0.5, abs=1e-15)
    x, m = rng.standard_normal((2, 7))
    # independent closed form: product of univariate densities
    ref = sum(math.log(math.exp(-0.5 * (a - b) ** 2) / math.sqrt(2 * math.pi)) for a, b in zip(x, m))
    assert gaussian_logpdf_identity_cov(x, m) == pytest.approx(ref, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        gaussian_logpdf_identity_cov([0.0, 1.0], [0.0])


def test_logpdf_rows_matches_pointwise(rng):
    X, means = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    ref = [[gaussian_logpdf_identity_cov(x, m) for m in means] for x in X]
    assert np.allclose(gaussian_logpdf_rows(X, means), ref, atol=1e-12)


def test_logpdf_integrates_to_one():
    grid = np.linspace(-8, 8, 4001)
    dens = np.exp([gaussian_logpdf_identity_cov([g], [0.3]) for g in grid])
    assert abs(np.trapezoid(dens, grid) - 1) < 1e-3
