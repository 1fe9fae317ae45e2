import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from spirallike import domains, fields, linearize
from spirallike import loewner as LW
from spirallike.errors import ConfigError, HypothesisViolated


def ball_points(count, radius, seed, n=2):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(count, 2 * n))
    g /= np.linalg.norm(g, axis=1)[:, None]
    r = radius * rng.uniform(size=count) ** (1 / (2 * n))
    return (g[:, :n] + 1j * g[:, n:]) * r[:, None]


@pytest.fixture(scope="module")
def example_chain():
    fld = fields.example_field()
    lin = linearize.limit_map(fld, alpha=2.0, compact=ball_points(32, 1.0, seed=0))
    return LW.chain_from_spirallike(fld, lin), LW.autonomous(fld), lin


def test_evolution_family_basics():
    H = LW.autonomous(fields.example_field())
    z = np.array([0.7, 0.2 - 0.1j])
    assert np.array_equal(LW.evolution_family(H, 0.5, 0.5, z), z)
    assert np.allclose(LW.evolution_family(H, 0, 1, z), fields.example_field().closed_flow(1.0, z), atol=1e-9)
    with pytest.raises(ValueError):
        LW.evolution_family(H, 1, 0.5, z)


def test_piecewise_linear():
    A1 = np.array([[-1, 1], [0, -0.5]])
    A2 = np.array([[0.2j, 0], [1, -1]])
    H = LW.piecewise_linear([A1, A2], [1.0])
    z = np.array([1.0, -0.5j])
    for t in (1.0, 1.4, 2.0):
        ref = expm((t - 1) * A2) @ expm(A1) @ z
        assert np.allclose(LW.evolution_family(H, 0, t, z), ref, atol=1e-9)
    again = LW.herglotz_from_json(H.spec)
    assert np.allclose(again(z, 1.5), H(z, 1.5))
    with pytest.raises(ConfigError):
        LW.piecewise_linear([A1, A2], [])


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_cocycle(a, b, c):
    s, t, u = sorted((a, b, c))
    u = 2 * u
    t = min(t, u)
    H = LW.piecewise_linear([np.array([[-1, 1], [0, -0.5]]), np.array([[0.2j, 0], [1, -1]])], [0.6])
    assert LW.cocycle_defect(H, s, t, u, np.array([0.5, 0.5j])) <= 1e-6
    E = LW.autonomous(fields.example_field())
    assert LW.cocycle_defect(E, s, t, u, np.array([0.5, 0.5j])) <= 1e-6


def test_linear_chain_identity():
    A = np.array([[-2, 0.5], [0, -3]], dtype=complex)
    ch = LW.linear_chain(A)
    z = np.array([0.4, -0.2j])
    for s, t in [(0.0, 1.0), (0.5, 2.5)]:
        lhs = ch(s, z)
        rhs = ch(t, expm((t - s) * A) @ z)
        assert np.allclose(lhs, rhs, atol=1e-13)


def test_chain_examples(example_chain):
    chain, H, lin = example_chain
    z = ball_points(10, 1.0, seed=2)
    assert np.allclose(chain(0.0, z), lin.F_eval(z))
    ex = fields.example_field()
    for s, t in [(0.0, 0.5), (0.5, 2.0), (1.0, 3.0)]:
        d = np.abs(chain(s, z) - chain(t, ex.closed_flow(t - s, z))).max()
        assert d <= 1e-6


def test_pde_residual(example_chain):
    chain, H, _ = example_chain
    K = ball_points(6, 1.0, seed=3)
    assert max(LW.pde_residual(chain, H, t, z) for t in np.linspace(0.25, 2, 4) for z in K) <= 1e-5
    A = fields.example_field().linearization
    lin = LW.linear_chain(A)
    LH = LW.autonomous(fields.linear_field(A))
    assert max(LW.pde_residual(lin, LH, t, z) for t in (0.3, 1.0, 2.0) for z in K) <= 1e-8


def test_pde_residual_detects_perturbation(example_chain):
    chain, H, _ = example_chain
    bad = LW.LoewnerChain(2, lambda t, z: chain(t, z) + t * np.array([0.1, 0]))
    assert LW.pde_residual(bad, H, 1.0, np.array([0.3, 0.2])) >= 0.05


def test_functional_check(example_chain):
    chain, H, _ = example_chain
    K = ball_points(8, 1.0, seed=4)
    grid = [(s, t) for s in (0.0, 1.0, 2.0) for t in (1.0, 2.0, 3.0) if s <= t]
    rep = LW.chain_functional_check(chain, H, grid, K)
    assert rep.passed and rep.max_defect <= 1e-5
    diag = LW.chain_functional_check(chain, H, [(1.0, 1.0)], K)
    assert diag.max_defect == 0
    rng = np.random.default_rng(0)
    M = rng.normal(size=(2, 2))
    junk = LW.LoewnerChain(2, lambda t, z: z @ M.T * (1 + t) + z**2)
    assert not LW.chain_functional_check(junk, H, grid, K).passed
    with pytest.raises(ValueError):
        LW.chain_functional_check(chain, H, [(2.0, 1.0)], K)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "s,t,point,defect" and len(lines) == 1 + len(grid) * len(K)


def test_preimage(example_chain):
    chain, _, _ = example_chain
    for s, t in [(0.0, 1.0), (0.5, 2.0)]:
        z = np.array([0.3 - 0.2j, 0.4])
        w = chain(s, z)
        # f_s(z) = f_t(phi_{s,t}(z)) so w lies in the image of f_t
        p, res = LW.preimage(chain, t, w, z0=np.zeros(2))
        assert res <= 1e-6
        assert np.allclose(chain(t, p), w, atol=1e-6)


def test_exhausting_time():
    A = fields.example_field().linearization
    for R in (1.0, 5.0, 10.0):
        t = LW.exhausting_time(A, domains.hartogs(), R, np.linspace(0, 10, 101), n_samples=300)
        assert t is not None


def test_chain_requires_certificate(example_chain):
    _, _, lin = example_chain
    from dataclasses import replace

    with pytest.raises(HypothesisViolated):
        LW.chain_from_spirallike(fields.example_field(), replace(lin, C_theoretical=-1.0))


def test_herglotz_json_and_bound():
    H = LW.herglotz_from_json("example")
    assert H.bound([[1, 1]], 1.0) == pytest.approx(math.hypot(2, 2))
    with pytest.raises(ConfigError):
        LW.herglotz_from_json({"builtin": "nope"})
    assert LW.herglotz_from_json({"autonomous": "example"}).n == 2
    assert H.to_json()["order"] == "inf"
