"""Acceptance criteria, each checked at its stated tolerance against an
oracle that does not share code with the implementation under test."""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from spirallike import autos, cxlinalg, domains, fields, linearize, loewner, refuter


def closed_example_flow(t, z):
    z1, z2 = z[..., 0], z[..., 1]
    return np.stack([z1 * np.exp(-2 * t), z2 * np.exp(-3 * t) * np.exp(z1 / 2 * (1 - np.exp(-2 * t)))], axis=-1)


def in_hartogs(z):
    z1, z2 = z[..., 0], z[..., 1]
    with np.errstate(over="ignore"):
        return (z1.real < 3) & (np.abs(z2) < np.exp(-z1.real / 2))


def ball_points(count, radius, seed, n=2):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(count, 2 * n))
    g /= np.linalg.norm(g, axis=1)[:, None]
    r = radius * rng.uniform(size=count) ** (1 / (2 * n))
    return (g[:, :n] + 1j * g[:, n:]) * r[:, None]


def test_1_flow_oracle(record):
    fld = fields.example_field()
    starts = ball_points(100, 3.0, seed=1)
    times = np.linspace(0.0, 10.0, 201)
    t0 = time.perf_counter()
    pts = fields.flow_on_grid(fld, times, starts, tol=1e-10, method="numeric")
    elapsed = time.perf_counter() - t0
    err = max(np.abs(pts[k] - closed_example_flow(t, starts)).max() for k, t in enumerate(times))
    ok = err <= 1e-8 and elapsed < 5.0
    record("1", ok, f"max flow error {err:.2e} (<= 1e-8), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_2_spirallike_verification(record):
    t0 = time.perf_counter()
    results = {}
    for name in ("hartogs", "hartogs-n", "nilpotent-log", "power-difference", "product-ball"):
        dom, fld = domains.builtin_pair(name)
        rep = domains.spirallike_verify(dom, fld, n_samples=1000, horizon=20.0, seed=0)
        results[name] = len(rep.violations)
    elapsed = time.perf_counter() - t0
    ok = all(v == 0 for v in results.values()) and elapsed < 60.0
    record("2", ok, f"violations {results}, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_3_constants(record):
    dom, fld = domains.builtin_pair("hartogs")
    est = fields.decay_estimate(fld, dom, n_samples=200, horizon=10.0)
    checks = cxlinalg.condition_checks(fld.linearization, alpha=2.0)
    value = checks["checks"]["decay_spectral"]["value"]
    k_minus = checks["spectrum"]["k_minus"]
    ok = abs(est.alpha - 2) <= 0.05 * 2 and abs(value - 1) <= 0.1 and k_minus == -3
    record("3", ok, f"alpha {est.alpha:.4f} (2 +- 5%), 2a+k_- {value:.4f} (1 +- 0.1), k_- {k_minus}")
    assert ok


def test_4_linearization(record):
    fld = fields.example_field()
    K = ball_points(64, 1.0, seed=2)
    res = linearize.limit_map(fld, alpha=2.0, compact=K)
    pts = ball_points(200, 1.0, seed=3)
    exact = np.stack([pts[:, 0], pts[:, 1] * np.exp(pts[:, 0] / 2)], axis=-1)
    err = float(np.abs(res.F_eval(pts) - exact).max())
    bound = math.exp(-1) * 1.1
    ok = err <= 1e-6 and res.DF0_defect <= 1e-6 and res.tail_ratio <= bound
    record("4", ok, f"F error {err:.2e}, DF(0) defect {res.DF0_defect:.2e}, tail ratio {res.tail_ratio:.4f} (<= {bound:.4f})")
    assert ok


def test_5_isotopy(record):
    fld = fields.example_field()
    lim = linearize.limit_map(fld, alpha=2.0, compact=ball_points(32, 1.0, seed=4))
    ts = np.linspace(0.1, 0.9, 10)
    zs = ball_points(10, 1.0, seed=5)
    worst_rel, worst_psi = 0.0, 0.0
    for phi in (linearize.identity_map(2), linearize.shear_map(2, 1.0)):
        cfg = linearize.isotopy_config(fld, phi=phi, limit=lim)
        for t in ts:
            h = 1e-3 * t
            for z in zs:
                fd = (linearize.isotopy_eval(cfg, t + h, z) - linearize.isotopy_eval(cfg, t - h, z)) / (2 * h)
                an = linearize.isotopy_time_derivative(cfg, t, z)
                scale = max(np.linalg.norm(an), 1e-300)
                worst_rel = max(worst_rel, float(np.linalg.norm(fd - an) / scale))
        d = linearize.psi_defect(fld, cfg.phi)
        worst_psi = max(worst_psi, d.psi0_norm, d.dpsi0_norm)
    ok = worst_rel <= 1e-5 and worst_psi <= 1e-6
    record("5", ok, f"FD relative error {worst_rel:.2e} (<= 1e-5), Psi(0)/DPsi(0) {worst_psi:.2e} (<= 1e-6)")
    assert ok


def test_6_refuter_battery(record):
    t0 = time.perf_counter()
    mats = refuter.battery(200, seed=0)
    labels, failures = set(), 0
    for _, M in mats:
        try:
            cert = refuter.refute_any(M, seed=0)
        except Exception:
            failures += 1
            continue
        z = np.asarray(cert.start, dtype=complex)
        w = expm(np.asarray(M, dtype=complex) * cert.t_exit) @ z
        if not (cert.verified and in_hartogs(z) and not in_hartogs(w)):
            failures += 1
        labels.add(cert.case_label)
    elapsed = time.perf_counter() - t0
    missing = set(refuter.CASE_LABELS) - labels
    c = refuter.refute_any(np.diag([1j, 1.0]))
    special = abs(c.t_exit - math.pi) < 1e-12 and np.allclose(c.start, [-2, 1])
    ok = failures == 0 and not missing and elapsed < 120 and special
    record("6", ok, f"{200 - failures}/200 verified, missing labels {sorted(missing)}, {elapsed:.1f} s, diag(i,1) exit t={c.t_exit:.6f} from {np.round(c.start, 6).tolist()}")
    assert ok


def test_7_volume(record):
    rng = np.random.default_rng(7)
    worst_lin = 0.0
    for _ in range(10):
        A = 0.5 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        fld = fields.linear_field(A)
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        for t in (0.3, 1.0, 2.0):
            det = np.linalg.det(fields.flow_jacobian(fld, t, z, tol=1e-12))
            ref = np.exp(t * np.trace(A))
            worst_lin = max(worst_lin, abs(det - ref) / abs(ref))
    fld = fields.example_field()
    z = np.array([1.0 + 0j, 1.0 + 0j])
    t = 0.5

    def div_along(s, part):
        v = -5 + closed_example_flow(s, z)[0]
        return v.real if part == 0 else v.imag

    integral = quad(div_along, 0, t, args=(0,), epsabs=1e-14)[0] + 1j * quad(div_along, 0, t, args=(1,), epsabs=1e-14)[0]
    det = np.linalg.det(fields.flow_jacobian(fld, t, z, tol=1e-12))
    err_ex = abs(det - np.exp(integral))
    ok = worst_lin <= 1e-9 and err_ex <= 1e-6
    record("7", ok, f"linear det error {worst_lin:.2e} (<= 1e-9), example vs quadrature {err_ex:.2e} (<= 1e-6)")
    assert ok


def test_8_loewner(record):
    fld = fields.example_field()
    K = ball_points(12, 1.0, seed=8)
    lin = linearize.limit_map(fld, alpha=2.0, compact=ball_points(64, 1.0, seed=9))
    chain = loewner.chain_from_spirallike(fld, lin)
    H = loewner.autonomous(fld)
    grid = [(s, t) for s in (0.0, 0.5, 1.0, 2.0) for t in (0.5, 1.0, 2.0, 3.0) if s < t]
    pde = max(loewner.pde_residual(chain, H, t, z) for t in (0.5, 1.5, 3.0) for z in K[:6])
    func = loewner.chain_functional_check(chain, H, grid, K).max_defect
    A = fld.linearization
    lchain = loewner.linear_chain(A)
    LH = loewner.autonomous(fields.linear_field(A))
    lpde = max(loewner.pde_residual(lchain, LH, t, z) for t in (0.5, 1.5, 3.0) for z in K[:6])
    lfunc = loewner.chain_functional_check(lchain, LH, grid, K).max_defect
    ok = pde <= 1e-5 and func <= 1e-5 and lpde <= 1e-8 and lfunc <= 1e-8
    record("8", ok, f"pde {pde:.2e}, functional {func:.2e} (<= 1e-5); linear pde {lpde:.2e}, functional {lfunc:.2e} (<= 1e-8)")
    assert ok


def test_9_algebra(record):
    rng = np.random.default_rng(9)
    worst_rt, worst_det = 0.0, 0.0
    for k in range(100):
        n = int(rng.integers(2, 4))
        w = autos.random_word(n, int(rng.integers(1, 9)), rng)
        z = ball_points(5, 0.5, seed=100 + k, n=n)
        back = autos.word_eval(autos.word_invert(w), autos.word_eval(w, z))
        worst_rt = max(worst_rt, float(np.abs(back - z).max()))
        s = autos.random_word(n, int(rng.integers(1, 9)), rng, kinds=("shear",))
        for p in z[:2]:
            worst_det = max(worst_det, abs(autos.fd_jacobian_det(s, p) - 1))
    ok = worst_rt <= 1e-10 and worst_det <= 1e-7
    record("9", ok, f"round-trip {worst_rt:.2e} (<= 1e-10), shear det FD defect {worst_det:.2e} (<= 1e-7)")
    assert ok


def test_10_not_numerically_decidable(record):
    # Runge-ness, pseudoconvexity, hyperbolicity and existence of approximating
    # automorphism sequences have no finite numerical test; the hypothesis
    # checks above stand in for them.
    record("10", True, "not numerically decidable; covered by hypothesis checks and construction verification only")
