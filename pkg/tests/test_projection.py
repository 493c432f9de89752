import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcscreen.errors import DegenerateDataError
from cmcscreen.projection import build_basis, residualize


def _lstsq_resid(xs, x):
    m = np.column_stack([np.ones(len(x)), xs])
    coef = np.linalg.solve(m.T @ m, m.T @ x)
    return x - m @ coef


def test_ranks():
    assert build_basis(np.ones((10, 1))).rank == 1
    rng = np.random.default_rng(0)
    c = rng.normal(size=10)
    assert build_basis(np.column_stack([c, c])).rank == 2
    assert build_basis(rng.normal(size=(10, 3))).rank == 4


def test_orthonormal():
    q = build_basis(np.random.default_rng(1).normal(size=(12, 3))).q
    np.testing.assert_allclose(q.T @ q, np.eye(4), atol=1e-10)


def test_too_few_rows():
    with pytest.raises(DegenerateDataError):
        build_basis(np.zeros((4, 3)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    xs = rng.normal(size=(10, 3))
    x = rng.normal(size=10)
    basis = build_basis(xs)
    r = residualize(basis, x)
    np.testing.assert_allclose(r, _lstsq_resid(xs, x), atol=1e-8)
    np.testing.assert_allclose(residualize(basis, r), r, atol=1e-10)
    assert np.linalg.norm(r) <= np.linalg.norm(x) + 1e-12
    assert abs(r.mean()) < 1e-10
    assert np.max(np.abs(basis.q.T @ r)) <= 1e-8 * np.linalg.norm(x)


def test_contained_and_orthogonal_inputs():
    rng = np.random.default_rng(2)
    xs = rng.normal(size=(10, 2))
    basis = build_basis(xs)
    inside = xs @ np.array([2.0, -1.0]) + 3.0
    assert np.linalg.norm(residualize(basis, inside)) <= 1e-8 * np.linalg.norm(inside)
    z = rng.normal(size=10)
    orth = _lstsq_resid(xs, z)
    np.testing.assert_allclose(residualize(basis, orth), orth, atol=1e-10)


def test_residualize_errors():
    basis = build_basis(np.random.default_rng(3).normal(size=(8, 2)))
    with pytest.raises(ValueError):
        residualize(basis, np.zeros(7))
    with pytest.raises(ValueError):
        residualize(basis, np.full(8, np.nan))
