import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import make_inputs
from randattn import (
    AttentionInputs,
    InvalidArgumentError,
    ProposalKind,
    ProposalSet,
    RandomSource,
    build_proposals,
    compute_landmarks,
    proposal_draw,
    proposal_logpdf,
    stable_softmax,
)
from randattn.proposals import segment_bounds


def test_landmark_examples(rng):
    Q = rng.standard_normal((4, 3))
    inp = AttentionInputs(Q, rng.standard_normal((4, 3)), rng.standard_normal((4, 3)))
    lm = compute_landmarks(inp, 2)
    assert np.allclose(lm.q_landmarks, [(Q[0] + Q[1]) / 2, (Q[2] + Q[3]) / 2], atol=1e-15)
    assert segment_bounds(5, 2).tolist() == [[0, 3], [3, 5]]
    inp = make_inputs(rng, 6, 6, 2)
    assert np.array_equal(compute_landmarks(inp, 6).q_landmarks, inp.Q)


@pytest.mark.parametrize("C", [0, 6])
def test_landmark_count_validated(C, rng):
    with pytest.raises(InvalidArgumentError):
        compute_landmarks(make_inputs(rng, 5, 7, 2), C)


@given(st.integers(1, 40), st.integers(1, 40), st.data())
def test_landmarks_partition_and_reconstruct(N, M, data):
    C = data.draw(st.integers(1, min(N, M)))
    g = np.random.default_rng(N * 100 + M)
    inp = make_inputs(g, N, M, 3)
    lm = compute_landmarks(inp, C)
    for bounds, rows in ((lm.q_bounds, N), (lm.k_bounds, M)):
        assert bounds[0, 0] == 0 and bounds[-1, 1] == rows
        assert np.all(bounds[1:, 0] == bounds[:-1, 1])
        sizes = bounds[:, 1] - bounds[:, 0]
        assert sizes.max() - sizes.min() <= 1 and np.all(np.diff(sizes) <= 0)
    recon = (lm.q_sizes[:, None] * lm.q_landmarks).sum(0)
    assert np.abs(recon - N * inp.Q.mean(0)).max() < 1e-10
    for c, (a, b) in enumerate(lm.k_bounds):
        assert np.abs(lm.k_landmarks[c] - inp.K[a:b].mean(0)).max() < 1e-12


def test_build_proposal_examples(rng):
    inp = make_inputs(rng, 6, 6, 3)
    lm1 = compute_landmarks(inp, 1)
    local = build_proposals(lm1, inp.K, ProposalKind.GAUSSIAN_LOCAL)
    assert np.allclose(local.means[0], inp.Q.mean(0) + inp.K.mean(0), atol=1e-15)
    kla = build_proposals(lm1, inp.K, ProposalKind.GAUSSIAN_KEY_LANDMARK_ATTN)
    assert np.array_equal(kla.means, local.means)
    k = rng.standard_normal(3)
    same = AttentionInputs(inp.Q, np.tile(k, (6, 1)), inp.V, prescaled=True)
    lm = compute_landmarks(same, 3)
    full = build_proposals(lm, same.K, ProposalKind.GAUSSIAN_FULL_KEYS)
    assert np.allclose(full.means, lm.q_landmarks + k, atol=1e-14)


def test_proposal_means_match_naive_formulas(rng):
    inp = make_inputs(rng, 12, 10, 3)
    lm = compute_landmarks(inp, 4)
    qt, kt = lm.q_landmarks, lm.k_landmarks
    full = build_proposals(lm, inp.K, ProposalKind.GAUSSIAN_FULL_KEYS)
    kla = build_proposals(lm, inp.K, ProposalKind.GAUSSIAN_KEY_LANDMARK_ATTN)
    mix = build_proposals(lm, inp.K, ProposalKind.MIXTURE_PER_SEGMENT)
    for c in range(4):
        a = stable_softmax(inp.K @ qt[c])
        assert np.allclose(full.means[c], qt[c] + a @ inp.K, atol=1e-14)
        assert np.allclose(mix.mix_weights[c], a, atol=1e-15)
        b = stable_softmax(kt @ kt[c])
        assert np.allclose(kla.means[c], qt[c] + b @ kt, atol=1e-14)


def test_draw_reproducible_and_index_checked(rng):
    inp = make_inputs(rng, 8, 8, 3)
    for kind in ProposalKind:
        props = build_proposals(compute_landmarks(inp, 4), inp.K, kind)
        assert np.array_equal(proposal_draw(props, 2, RandomSource(6)), proposal_draw(props, 2, RandomSource(6)))
        with pytest.raises(InvalidArgumentError):
            proposal_draw(props, 4, RandomSource(0))


def test_gaussian_draw_moments(rng):
    inp = make_inputs(rng, 8, 8, 3)
    props = build_proposals(compute_landmarks(inp, 2), inp.K)
    draws = np.stack([proposal_draw(props, 1, RandomSource(3, i)) for i in range(10**5)])
    assert np.all(np.abs(draws.mean(0) - props.means[1]) < 4 / math.sqrt(10**5))


def test_mixture_draw_moments(rng):
    inp = make_inputs(rng, 8, 8, 3)
    props = build_proposals(compute_landmarks(inp, 2), inp.K, ProposalKind.MIXTURE_PER_SEGMENT)
    draws = np.stack([proposal_draw(props, 0, RandomSource(4, i)) for i in range(20_000)])
    se = draws.std(0, ddof=1) / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(0) - props.means[0]) < 4 * se)


def test_logpdf_examples(rng):
    props = ProposalSet.gaussian(rng.standard_normal((3, 2)))
    assert proposal_logpdf(props, 1, props.means[1]) == pytest.approx(-math.log(2 * math.pi), abs=1e-14)
    with pytest.raises(InvalidArgumentError):
        proposal_logpdf(props, 0, np.zeros(3))
    inp = make_inputs(rng, 4, 1, 2)
    lm = compute_landmarks(inp, 1)
    mix = build_proposals(lm, inp.K, ProposalKind.MIXTURE_PER_SEGMENT)
    w = rng.standard_normal(2)
    mu = lm.q_landmarks[0] + inp.K[0]
    assert proposal_logpdf(mix, 0, w) == pytest.approx(-math.log(2 * math.pi) - 0.5 * (w - mu) @ (w - mu), abs=1e-12)


def test_mixture_logpdf_matches_naive_sum(rng):
    inp = make_inputs(rng, 9, 7, 3)
    lm = compute_landmarks(inp, 3)
    mix = build_proposals(lm, inp.K, ProposalKind.MIXTURE_PER_SEGMENT)
    for _ in range(10):
        w = rng.standard_normal(3)
        for c in range(3):
            pi = stable_softmax(inp.K @ lm.q_landmarks[c])
            dens = sum(p * math.exp(-0.5 * np.sum((w - lm.q_landmarks[c] - k) ** 2)) for p, k in zip(pi, inp.K))
            naive = math.log(dens / (2 * math.pi) ** 1.5)
            assert proposal_logpdf(mix, c, w) == pytest.approx(naive, abs=1e-10)


@pytest.mark.parametrize("kind", list(ProposalKind))
def test_logpdf_integrates_to_one_in_1d(kind, rng):
    inp = make_inputs(rng, 6, 6, 1)
    props = build_proposals(compute_landmarks(inp, 3), inp.K, kind)
    grid = np.linspace(-14, 14, 7001)
    dens = np.exp(props.logpdf_matrix(grid[:, None]))
    assert np.all(np.abs(np.trapezoid(dens, grid, axis=0) - 1) < 1e-3)


def test_gaussian_constructor_rejects_mixture():
    with pytest.raises(InvalidArgumentError):
        ProposalSet.gaussian(np.zeros((2, 2)), ProposalKind.MIXTURE_PER_SEGMENT)
