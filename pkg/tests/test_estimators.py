import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import naive
from cmcscreen.errors import DegenerateDataError
from cmcscreen.estimators import (
    PackedResponse,
    center_response,
    cmc_hat,
    cmdd_sq_hat,
    double_center,
    mdc_hat,
    mdd_sq_hat,
    measure,
    pair_indices,
    response_matrix,
    s_n_stat,
    signed_root,
)
from cmcscreen.kernels import KernelSpec, gram_matrix


def _instance(seed, n, d1=2):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n)
    g1 = gram_matrix(KernelSpec(), rng.normal(size=(n, d1)), 2.0)
    g2 = gram_matrix(KernelSpec(), rng.normal(size=n), 1.5)
    return v, g1, g2


def test_constant_offdiag_annihilated():
    t = np.full((5, 5), 7.0)
    np.fill_diagonal(t, 3.0)
    assert np.all(double_center(t).values == 0.0)


def test_additive_terms_cancel():
    u = np.array([1.0, 2.0, 3.0, 4.0])
    t = u[:, None] + u[None, :]
    np.testing.assert_allclose(double_center(t).values, 0.0, atol=1e-14)


def test_center_matches_loops():
    v = np.array([1.0, -1.0, 1.0, -1.0])
    t = np.outer(v, v)
    np.fill_diagonal(t, 0.0)
    np.testing.assert_allclose(double_center(t).values, naive.u_center_loops(t.tolist()), atol=1e-14)


def test_center_idempotent_and_zero_diag():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(8, 8))
    c = double_center(m + m.T)
    assert np.all(np.diag(c.values) == 0.0)
    np.testing.assert_allclose(double_center(c.values).values, c.values, atol=1e-10)


def test_center_rejects():
    with pytest.raises(DegenerateDataError):
        double_center(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        double_center(np.arange(16.0).reshape(4, 4))
    bad = np.zeros((4, 4))
    bad[0, 1] = bad[1, 0] = np.nan
    with pytest.raises(ValueError):
        double_center(bad)


@pytest.mark.parametrize("n", [4, 5, 6])
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_divergences_match_quadruple_oracle(n, seed):
    v, g1, g2 = _instance(seed, n)
    a = response_matrix(v, g1)
    assert cmdd_sq_hat(v, g1, g2) == pytest.approx(naive.u_stat_order4(a, g2), abs=1e-10)
    assert mdd_sq_hat(v, g2) == pytest.approx(naive.u_stat_order4(np.outer(v, v), g2), abs=1e-10)


@pytest.mark.parametrize("n", [4, 5, 6])
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_correlations_match_loop_oracle(n, seed):
    v, g1, g2 = _instance(seed, n)
    assert cmc_hat(v, g1, g2) == pytest.approx(naive.cmc_loops(v, g1, g2), abs=1e-10)
    assert mdc_hat(v, g2) == pytest.approx(naive.cmc_loops(v, np.ones((n, n)), g2), abs=1e-10)


def test_constant_candidate_gives_zero():
    v, g1, _ = _instance(1, 10)
    ones = np.ones((10, 10))
    assert cmdd_sq_hat(v, g1, ones) == 0.0
    assert cmc_hat(v, g1, ones) == 0.0
    assert mdd_sq_hat(v, ones) == 0.0
    assert mdc_hat(v, ones) == 0.0


def test_constant_response_gives_zero():
    _, g1, g2 = _instance(2, 10)
    v = np.full(10, 3.0)
    assert mdd_sq_hat(v, g2) == 0.0
    assert mdc_hat(v, g2) == 0.0
    assert cmdd_sq_hat(v, np.ones((10, 10)), g2) == 0.0


def test_perfect_alignment_gives_one():
    # candidate side equal to the centred response matrix under an empty conditional set
    rng = np.random.default_rng(4)
    v = rng.normal(size=9)
    vc = v - v.mean()
    assert cmc_hat(v, np.ones((9, 9)), np.outer(vc, vc)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    alpha=st.floats(-50, 50),
    beta=st.floats(0.05, 20) | st.floats(-20, -0.05),
)
def test_affine_invariance(seed, alpha, beta):
    v, g1, g2 = _instance(seed, 12)
    w = alpha + beta * v
    assert cmc_hat(w, g1, g2) == pytest.approx(cmc_hat(v, g1, g2), abs=1e-10)
    assert mdc_hat(w, g2) == pytest.approx(mdc_hat(v, g2), abs=1e-10)
    # the marginal response matrix itself scales by beta^2
    a_v = double_center(response_matrix(v)).values
    a_w = double_center(response_matrix(w)).values
    np.testing.assert_allclose(a_w, beta**2 * a_v, atol=1e-9 * max(1.0, alpha**2))


def test_permutation_invariance():
    rng = np.random.default_rng(5)
    v = rng.normal(size=10)
    u1 = rng.normal(size=(10, 2))
    u2 = rng.normal(size=10)
    perm = rng.permutation(10)
    spec = KernelSpec()

    def all4(v, u1, u2):
        g1, g2 = gram_matrix(spec, u1, 2.0), gram_matrix(spec, u2, 2.0)
        return [cmdd_sq_hat(v, g1, g2), cmc_hat(v, g1, g2), mdd_sq_hat(v, g2), mdc_hat(v, g2)]

    np.testing.assert_allclose(all4(v[perm], u1[perm], u2[perm]), all4(v, u1, u2), atol=1e-10)


def test_predictor_shift_invariance():
    rng = np.random.default_rng(6)
    v, u1, u2 = rng.normal(size=10), rng.normal(size=(10, 2)), rng.normal(size=10)
    spec = KernelSpec()
    base = cmdd_sq_hat(v, gram_matrix(spec, u1, 2.0), gram_matrix(spec, u2, 2.0))
    moved = cmdd_sq_hat(v, gram_matrix(spec, u1 + [3.0, -7.0], 2.0), gram_matrix(spec, u2 + 11.0, 2.0))
    assert moved == pytest.approx(base, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 15))
def test_correlation_bounded(seed, n):
    v, g1, g2 = _instance(seed, n)
    assert abs(cmc_hat(v, g1, g2)) <= 1.0
    assert abs(mdc_hat(v, g2)) <= 1.0


def test_size_checks():
    v, g1, g2 = _instance(7, 6)
    with pytest.raises(ValueError):
        cmdd_sq_hat(v[:5], g1, g2)
    with pytest.raises(DegenerateDataError):
        mdd_sq_hat(v[:3], g2[:3, :3])


def test_s_n_examples():
    v = np.array([1.0, -1.0])
    b = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert s_n_stat(v, np.outer(v, v), b) == pytest.approx(1.0)
    assert s_n_stat(v, np.outer(v, v), np.ones((2, 2))) == 0.0
    z = np.zeros(2)
    assert s_n_stat(z, np.outer(z, z), b) == 0.0


def test_measure_and_signed_root():
    v, g1, g2 = _instance(8, 10)
    m = measure(v, g2, g1)
    assert m.divergence_sq == cmdd_sq_hat(v, g1, g2)
    assert m.correlation == cmc_hat(v, g1, g2)
    assert m.divergence == pytest.approx(np.sign(m.divergence_sq) * np.sqrt(abs(m.divergence_sq)))
    assert signed_root(-4.0) == -2.0
    assert measure(v, g2).correlation == mdc_hat(v, g2)


@pytest.mark.parametrize("n", [4, 9, 30])
def test_packed_path_matches_dense(n):
    v, g1, g2 = _instance(9 + n, n)
    resp = PackedResponse.from_response(v, g1)
    iu, ju = pair_indices(n)
    assert resp.correlation(g2[iu, ju]) == pytest.approx(cmc_hat(v, g1, g2), abs=1e-13)
    # centring the packed pairs reproduces the dense centred matrix
    bc = resp.center_pairs(g2[iu, ju].copy())
    np.testing.assert_allclose(bc, double_center(g2).values[iu, ju], atol=1e-14)


def test_center_response_read_only():
    v, g1, _ = _instance(10, 6)
    a = center_response(v, g1)
    with pytest.raises(ValueError):
        a.values[0, 1] = 1.0
