import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from spirallike import cxlinalg as C
from spirallike.errors import InvalidGrid, MissingInput, NonSquare


def cmats(n_min=1, n_max=6, scale=2.0):
    @st.composite
    def build(draw):
        n = draw(st.integers(n_min, n_max))
        seed = draw(st.integers(0, 2**31 - 1))
        rng = np.random.default_rng(seed)
        return scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(n)

    return build()


def multiset_close(a, b, tol):
    a, b = list(a), list(b)
    for x in a:
        k = int(np.argmin([abs(x - y) for y in b]))
        if abs(x - b[k]) > tol:
            return False
        b.pop(k)
    return not b


def test_diagonal_eigenvalues():
    assert multiset_close(C.eigenvalues(np.diag([-2, -3])), [-2, -3], 1e-14)


def test_jordan_eigenvalues():
    assert multiset_close(C.eigenvalues([[-1, 1], [0, -1]]), [-1, -1], 1e-12)


@settings(max_examples=60, deadline=None)
@given(cmats())
def test_eigenvalues_match_numpy_and_det(A):
    ev = C.eigenvalues(A)
    assert multiset_close(ev, np.linalg.eigvals(A), 1e-8 * max(1, np.linalg.norm(A)))
    assert abs(np.prod(ev) - np.linalg.det(A)) <= 1e-8 * max(1.0, abs(np.linalg.det(A)))


def test_eigenvector():
    A = np.array([[1, 2], [0, 3]], dtype=complex)
    v = C.eigenvector(A, 3)
    assert np.linalg.norm(A @ v - 3 * v) < 1e-12


def test_mat_exp_examples():
    A = np.array([[0.3, -1], [2, 1j]])
    assert np.allclose(C.mat_exp(A, 0), np.eye(2), atol=0)
    lam = -1.0
    J = np.array([[lam, 1], [0, lam]])
    for t in (0.5, 2.0):
        assert np.allclose(C.mat_exp(J, t), math.exp(lam * t) * np.array([[1, t], [0, 1]]), atol=1e-14, rtol=1e-13)
    assert np.allclose(C.mat_exp(np.diag([-2, -3]), 1), np.diag([math.exp(-2), math.exp(-3)]), rtol=1e-14, atol=0)


@settings(max_examples=60, deadline=None)
@given(cmats(), st.floats(-2, 2))
def test_mat_exp_matches_scipy(A, t):
    ref = expm(t * A)
    assert np.linalg.norm(C.mat_exp(A, t) - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))


@settings(max_examples=60, deadline=None)
@given(cmats(scale=1.0), st.floats(-2, 2), st.floats(-2, 2))
def test_semigroup(A, s, t):
    lhs = C.mat_exp(A, s + t)
    rhs = C.mat_exp(A, s) @ C.mat_exp(A, t)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(lhs))


@settings(max_examples=60, deadline=None)
@given(cmats(scale=1.0), st.floats(-2, 2))
def test_det_of_exp(A, t):
    ref = np.exp(t * np.trace(A))
    assert abs(np.linalg.det(C.mat_exp(A, t)) - ref) <= 1e-10 * max(1.0, abs(ref))


@settings(max_examples=40, deadline=None)
@given(cmats(scale=1.0))
def test_spectral_mapping(A):
    assert multiset_close(C.eigenvalues(C.mat_exp(A)), np.exp(C.eigenvalues(A)), 1e-8 * max(1, np.abs(np.exp(C.eigenvalues(A))).max()))


@settings(max_examples=60, deadline=None)
@given(cmats())
def test_numerical_range_below_spectrum(A):
    s = C.spectral_summary(A)
    assert s.m_lower <= s.k_minus + 1e-9 * max(1, np.linalg.norm(A))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_normal_matrix_equality(seed, n):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    D = np.diag(rng.normal(size=n) + 1j * rng.normal(size=n))
    A = Q @ D @ Q.conj().T
    s = C.spectral_summary(A)
    assert abs(s.m_lower - s.k_minus) <= 1e-9
    # grid minimization of Re<Az, z> over the unit sphere (n = 1 is exact)
    if n == 2:
        th = np.linspace(0, np.pi / 2, 121)
        ph = np.linspace(0, 2 * np.pi, 241)
        T, P = np.meshgrid(th, ph)
        z = np.stack([np.cos(T), np.sin(T) * np.exp(1j * P)], axis=-1)
        vals = np.einsum("...i,ij,...j->...", z.conj(), A, z).real
        assert vals.min() >= s.m_lower - 1e-12
        assert vals.min() - s.m_lower < 1e-2


def test_spectral_summary_examples():
    assert C.spectral_summary(np.diag([-2, -3])).k_minus == -3
    s = C.spectral_summary(np.diag([1, 2]))
    assert s.m_lower == pytest.approx(1) and s.k_plus == pytest.approx(2)


def test_growth_constants():
    g = C.growth_constants(np.diag([-2, -3]), 0.1)
    assert g.rho == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    A = Q @ np.diag([-1 + 1j, -2, -0.5j]) @ Q.conj().T
    assert C.growth_constants(A, 0.2).rho <= 1 + 1e-9
    g = C.growth_constants([[-1, 10], [0, -1]], 0.5)
    assert g.rho > 1
    # the grid value is a direct sup, so it bounds every sampled point
    for t in np.linspace(0, 5, 11):
        assert np.linalg.norm(expm(-t * np.array([[-1, 10], [0, -1]])), 2) * math.exp((-1 - 0.5) * t) <= g.rho * (1 + 1e-9)


def test_growth_constants_rejects_bad_grid():
    with pytest.raises(InvalidGrid):
        C.growth_constants(np.eye(2), 0.0)
    with pytest.raises(InvalidGrid):
        C.growth_constants(np.eye(2), 0.1, t_horizon=1, grid_step=2)


def test_condition_checks():
    rep = C.condition_checks(np.diag([-2, -3]), alpha=2)
    assert rep["checks"]["decay_spectral"]["pass"]
    assert rep["checks"]["decay_spectral"]["value"] == pytest.approx(1)
    assert C.condition_checks(-np.eye(2))["checks"]["spectral_gap"]["pass"]
    assert C.condition_checks(np.diag([1, 1.5]))["checks"]["numerical_range"]["pass"]
    rep = C.condition_checks(np.diag([-2, -3]), B=-np.eye(1), alphas=(2, 1.75), checks=["product"])
    assert rep["checks"]["product"]["pass"]
    rep = C.condition_checks(np.diag([-2, -3]), B=-np.eye(1), alphas=(2, 1), checks=["product"])
    assert not rep["checks"]["product"]["pass"]
    with pytest.raises(MissingInput):
        C.condition_checks(np.eye(2), checks=["decay_spectral"])
    with pytest.raises(MissingInput):
        C.condition_checks(np.eye(2), checks=["bogus"])


def test_non_square_and_json():
    with pytest.raises(NonSquare):
        C.eigenvalues(np.ones((2, 3)))
    with pytest.raises(NonSquare):
        C.cmat_from_json({"n": 2, "entries": [[1, 0]] * 3})
    A = np.array([[1 + 2j, -3], [0.5j, 4]])
    assert np.array_equal(C.cmat_from_json(C.cmat_to_json(A)), A)
