import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from spirallike import cxlinalg, domains, fields
from spirallike.errors import BetaOutOfRange, ConfigError, DimensionMismatch, Diverged, EmptySample
from spirallike.ode import dopri5

ALL_BUILTINS = [
    fields.example_field(),
    fields.example_field(3),
    fields.nilpotent_field(),
    fields.diagonal_field(),
    fields.builtin_field("product-example"),
]


def cvec(n, bound):
    parts = st.floats(-bound, bound, allow_nan=False)
    return st.lists(st.tuples(parts, parts), min_size=n, max_size=n).map(lambda v: np.array([complex(a, b) for a, b in v]))


def test_example_flow_value():
    fld = fields.example_field()
    w = fields.flow(fld, 1.0, [2, 1], method="numeric")
    ref = (2 * math.exp(-2), math.exp(-3) * math.exp(1 - math.exp(-2)))
    assert np.allclose(w, ref, atol=1e-9, rtol=0)
    assert np.allclose(w.real, (0.270671, 0.118205), atol=1e-6)


@pytest.mark.parametrize("fld", ALL_BUILTINS, ids=lambda f: f.name)
def test_flow_at_zero_time(fld):
    z = np.arange(1, fld.n + 1) * (0.3 + 0.1j)
    assert np.array_equal(fields.flow(fld, 0.0, z), z)


def test_linear_flow_matches_mat_exp():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    z = rng.normal(size=3) + 1j * rng.normal(size=3)
    fld = fields.linear_field(A)
    w = fields.flow(fld, 0.7, z, tol=1e-12, method="numeric")
    assert np.linalg.norm(w - cxlinalg.mat_exp(A, 0.7) @ z) <= 1e-9


def test_dopri5_against_scipy():
    def rhs(t, y):
        return np.array([y[1], -np.sin(y[0])])

    sol = dopri5(lambda t, y: rhs(t, y.real).astype(complex), 0.0, [1.0, 0.0], 5.0, rtol=1e-11, atol=1e-12)
    ref = solve_ivp(rhs, (0, 5), [1.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-13).y[:, -1]
    assert np.allclose(sol.y.real, ref, atol=1e-9)


def test_dopri5_reports_divergence():
    with pytest.raises(Diverged):
        dopri5(lambda t, y: y**2, 0.0, [1.0 + 0j], 2.0, rtol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(range(len(ALL_BUILTINS))), st.floats(0, 2), st.floats(0, 2), st.integers(0, 10**6))
def test_semigroup(k, s, t, seed):
    fld = ALL_BUILTINS[k]
    rng = np.random.default_rng(seed)
    z = 0.5 * (rng.normal(size=fld.n) + 1j * rng.normal(size=fld.n))
    two = fields.flow(fld, t, fields.flow(fld, s, z, method="numeric"), method="numeric")
    one = fields.flow(fld, s + t, z, method="numeric")
    assert np.linalg.norm(two - one) <= 1e-7 * (1 + np.linalg.norm(z))


@settings(max_examples=30, deadline=None)
@given(cvec(2, 2.0), st.floats(0, 10))
def test_numeric_vs_closed(z, t):
    fld = fields.example_field()
    num = fields.flow(fld, t, z, method="numeric")
    cl = fields.flow(fld, t, z, method="closed")
    assert np.abs(num - cl).max() <= 1e-8


def test_flow_complex_time():
    A = np.diag([1j, 0])
    fld = fields.linear_field(A)
    z = np.array([1, 1], dtype=complex)
    tau = 1j * math.pi
    ref = cxlinalg.mat_exp(A, tau) @ z
    assert np.allclose(fields.flow_complex_time(fld, tau, z, method="numeric"), ref, atol=1e-9)
    assert abs(ref[0] - math.exp(-math.pi)) < 1e-14
    assert np.array_equal(fields.flow_complex_time(fld, 0, z), z)
    ex = fields.example_field()
    assert np.allclose(fields.flow_complex_time(ex, 0.8, [1, 1], method="numeric"), fields.flow(ex, 0.8, [1, 1], method="numeric"))


def test_complex_time_splitting_commutes():
    ex = fields.example_field()
    z = np.array([0.5 + 0.2j, -0.3j])
    a = fields.flow_complex_time(ex, 0.6 + 0.4j, z, method="numeric")
    b = fields.flow_complex_time(ex, 0.6 + 0.4j, z, method="closed")
    # phi_t o psi_s against psi_s o phi_t
    psi_first = fields.flow(fields.rotated(ex), 0.4, fields.flow(ex, 0.6, z, method="numeric"), method="numeric")
    assert np.allclose(a, b, atol=1e-9)
    assert np.allclose(a, psi_first, atol=1e-9)


def test_flow_jacobian():
    A = np.array([[-1, 2], [0.5j, 0.3]])
    fld = fields.linear_field(A)
    assert np.allclose(fields.flow_jacobian(fld, 1.3, [1, 2], tol=1e-12), cxlinalg.mat_exp(A, 1.3), atol=1e-8)
    assert np.array_equal(fields.flow_jacobian(fields.example_field(), 0, [1, 1]), np.eye(2))
    ex = fields.example_field()
    z = np.array([0.7, -0.4 + 0.3j])
    fd = fields.fd_jacobian(lambda w: ex.closed_flow(0.9, w), z)
    assert np.allclose(fields.flow_jacobian(ex, 0.9, z, tol=1e-12), fd, atol=1e-8)


def test_divergence():
    A = np.array([[1, 2], [3, 4j]])
    assert fields.divergence_at(fields.linear_field(A), [1, 1]) == pytest.approx(1 + 4j)
    ex = fields.example_field()
    z = np.array([0.4 - 0.2j, 1.5])
    assert fields.divergence_at(ex, z) == pytest.approx(-5 + z[0])
    fd = np.trace(fields.fd_jacobian(ex.eval, z))
    assert abs(fd - (-5 + z[0])) <= 1e-6
    shear = fields.polynomial_field([{}, {"2,0": 1.0}])
    assert fields.divergence_at(shear, [1.3, 2]) == 0


def test_polynomial_field_matches_example():
    p = fields.polynomial_field([{"1,0": -2}, {"0,1": -3, "1,1": 1}])
    ex = fields.example_field()
    z = np.array([0.3 + 1j, -2.0])
    assert np.allclose(p.eval(z), ex.eval(z))
    assert np.allclose(p.linearization, ex.linearization)
    assert np.allclose(p.jacobian_at(z), ex.jacobian_at(z))
    with pytest.raises(ConfigError):
        fields.polynomial_field([{"1": 1}, {}])


def test_holo_jacobian_accuracy():
    ex = fields.example_field()
    z = np.array([1.2 - 0.5j, 0.3j])
    assert np.abs(fields.holo_jacobian(ex.eval, z) - ex.jacobian(z)).max() <= 1e-12


def test_decay_estimate_example():
    dom, fld = domains.builtin_pair("hartogs")
    est = fields.decay_estimate(fld, dom, n_samples=200, horizon=10.0)
    assert abs(est.alpha - 2) <= 0.1
    assert est.bound_holds()
    # the measured gamma never exceeds the analytic upper bound e^{(2 - ln 3)/2}
    assert est.gamma <= math.exp((2 - math.log(3)) / 2)
    assert not est.non_decaying


def test_decay_estimate_minus_identity():
    est = fields.decay_estimate(fields.linear_field(-np.eye(2)), domains.ball(2), n_samples=50, horizon=5.0)
    assert est.alpha == pytest.approx(1, abs=1e-9)
    assert est.gamma == pytest.approx(1, abs=1e-9)


def test_decay_estimate_errors():
    with pytest.raises(EmptySample):
        fields.decay_estimate(fields.example_field(), domains.hartogs(), n_samples=0)
    with pytest.raises(ValueError):
        fields.decay_estimate(fields.example_field(), domains.hartogs(), horizon=0)


def test_product_field():
    base = fields.builtin_field("example")
    from dataclasses import replace

    base = replace(base, meta={"alpha": 2.0})
    with pytest.raises(BetaOutOfRange):
        fields.product_field(base, beta=2.0)
    with pytest.raises(BetaOutOfRange):
        fields.product_field(base, beta=1.5)
    prod = fields.product_field(base, beta=1.75)
    z = np.array([0.5, 0.2j, 1.0])
    w = fields.flow(prod, 1.1, z, method="numeric")
    assert np.allclose(w[:2], base.closed_flow(1.1, z[:2]), atol=1e-9)
    assert abs(w[2] - math.exp(-1.75 * 1.1)) < 1e-9


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        fields.flow(fields.example_field(), 1.0, [1, 2, 3])


def test_trajectory_csv():
    tr = fields.trajectory(fields.example_field(), [0.5, 1.0], [1, 1])
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,re_z1,im_z1,re_z2,im_z2"
    assert len(lines) == 4


def test_field_json_round_trip():
    for fld in ALL_BUILTINS + [fields.linear_field([[1, 2j], [0, -1]]), fields.polynomial_field([{"1,0": -2}, {"0,1": -3, "1,1": 1}])]:
        again = fields.field_from_json(fld.spec)
        z = np.linspace(0.1, 0.5, fld.n) + 0.2j
        assert np.allclose(again.eval(z), fld.eval(z))
    with pytest.raises(ConfigError):
        fields.field_from_json({"nonsense": 1})
