"""Linearization of a stable holomorphic field and the isotopy built from it.

For a globally exponentially stable field V with linear part A the limit

    F(z) = lim_{t -> oo} exp(-tA) X(t, z)

conjugates the flow to its linearization. Given a biholomorphism Phi with
Phi(0) = 0 and DPhi(0) = I, the isotopy

    H(t, z) = exp(c ln(t) A) Phi(X(-c ln t, z)),   0 < t <= 1,

runs from Phi (t = 1) to the limit composition at t = 0, and its time
derivative is (c/t) exp(c ln(t) A) Psi(X(-c ln t, z)) with
Psi = A Phi - DPhi V.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cxlinalg
from . import fields as F
from .errors import HypothesisViolated, InjectivityViolation, NoConvergence, NormalizationMissing
from .ode import dopri5

MAX_HORIZON = 200
NORMALIZATION_TOL = 1e-9


def _flow_relative(fld: F.Field, t: float, z, tol: float) -> np.ndarray:
    """X(t, z) with an essentially relative error control.

    exp(-tA) amplifies absolute errors in decaying components, so the
    numeric path uses a tiny absolute floor.
    """
    z = np.asarray(z, dtype=complex)
    if t == 0:
        return z.copy()
    if fld.closed_flow is not None:
        return np.asarray(fld.closed_flow(t, z), dtype=complex)
    return dopri5(lambda _t, y: fld.eval(y), 0.0, z, float(t), rtol=tol, atol=tol * 1e-20).y


def _apply(M: np.ndarray, z: np.ndarray) -> np.ndarray:
    return z @ M.T


# ---------------------------------------------------------------------------
# limit map


@dataclass
class LinearizationResult:
    """The limit map frozen at horizon T, with its convergence record."""

    field_name: str
    horizon: float
    F_eval: Callable
    cauchy_log: list
    C_theoretical: float
    DF0_defect: float
    alpha: float
    k_minus: float
    tol: float
    tail_ratio: float
    M_prime: float
    fld: F.Field | None = field(default=None, repr=False)

    def tail_ratio_bound(self, slack: float = 0.1) -> float:
        return math.exp(-self.C_theoretical) * (1 + slack)

    def rate_ok(self, slack: float = 0.1) -> bool:
        return self.tail_ratio <= self.tail_ratio_bound(slack)

    def to_json(self) -> dict:
        return {
            "field": self.field_name,
            "horizon": self.horizon,
            "tol": self.tol,
            "alpha": self.alpha,
            "k_minus": self.k_minus,
            "C_theoretical": self.C_theoretical,
            "DF0_defect": self.DF0_defect,
            "tail_ratio": self.tail_ratio,
            "tail_ratio_bound": self.tail_ratio_bound(),
            "M_prime": self.M_prime,
            "cauchy_log": [[t, d] for t, d in self.cauchy_log],
        }


def _tail_ratio(log: list) -> float:
    diffs = [d for _, d in log]
    ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0]
    if not ratios:
        return 0.0
    tail = ratios[len(ratios) // 2 :]
    return float(max(tail))


def limit_map(
    fld: F.Field,
    domain=None,
    compact=None,
    tol: float = 1e-10,
    alpha: float | None = None,
    flow_tol: float = 1e-12,
    max_horizon: int = MAX_HORIZON,
    n_compact: int = 64,
    seed: int = 0,
) -> LinearizationResult:
    """Advance f_T = exp(-TA) X_T in unit steps until sup_K |f_{T+1} - f_T| <= tol.

    alpha defaults to decay_estimate on `domain`; compact defaults to
    `n_compact` points sampled from the domain.

    Examples
    --------
    >>> res = limit_map(F.example_field(), alpha=2.0, compact=[[0.5, 0.5]])
    >>> np.round(res.F_eval(np.array([2.0, 1.0])), 5)
    array([2.     +0.j, 2.71828+0.j])
    """
    A = fld.linearization
    k_minus = cxlinalg.spectral_summary(A).k_minus
    if alpha is None:
        if domain is None:
            raise HypothesisViolated("either a domain (for the decay estimate) or alpha is required")
        alpha = F.decay_estimate(fld, domain, n_samples=100, seed=seed).alpha
    C = 2 * alpha + k_minus
    if not C > 0:
        raise HypothesisViolated(f"2*alpha + k_-(A) = {C:.6g} must be positive")
    if compact is None:
        if domain is None:
            raise HypothesisViolated("a compact sample or a domain is required")
        compact = domain.sample(n_compact, seed)
    K = np.atleast_2d(np.asarray(compact, dtype=complex))

    # step the flow and the linear inverse one unit at a time
    E1 = cxlinalg.mat_exp(A, -1.0)
    X = K.copy()
    EinvT = np.eye(fld.n, dtype=complex)
    f_prev = K.copy()
    log = []
    T = 0
    while True:
        if T >= max_horizon:
            raise NoConvergence(f"Cauchy differences above {tol:g} at T={T} (last {log[-1][1]:.3g})")
        X = _flow_relative(fld, 1.0, X, flow_tol)
        EinvT = E1 @ EinvT
        T += 1
        f = _apply(EinvT, X)
        d = float(np.linalg.norm(f - f_prev, axis=-1).max())
        log.append((float(T - 1), d))
        f_prev = f
        if d <= tol:
            break

    horizon = float(T)
    Einv = cxlinalg.mat_exp(A, -horizon)

    def F_eval(z):
        z = np.asarray(z, dtype=complex)
        return _apply(Einv, _flow_relative(fld, horizon, z, flow_tol))

    zero = np.zeros(fld.n, dtype=complex)
    J = F.flow_jacobian(fld, horizon, zero, tol=flow_tol)
    defect = float(np.linalg.norm(Einv @ J - np.eye(fld.n), 2))
    M_prime = max((d * math.exp(C * t) for t, d in log), default=0.0)
    return LinearizationResult(
        field_name=fld.name,
        horizon=horizon,
        F_eval=F_eval,
        cauchy_log=log,
        C_theoretical=float(C),
        DF0_defect=defect,
        alpha=float(alpha),
        k_minus=float(k_minus),
        tol=tol,
        tail_ratio=_tail_ratio(log),
        M_prime=float(M_prime),
        fld=fld,
    )


# ---------------------------------------------------------------------------
# maps Phi and the defect Psi


@dataclass(frozen=True)
class HoloMap:
    """A holomorphic self-map of C^n, vectorized over leading axes."""

    n: int
    eval: Callable
    name: str = "map"
    jacobian: Callable | None = None

    def __call__(self, z):
        return self.eval(np.asarray(z, dtype=complex))

    def jacobian_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(z), dtype=complex)
        return F.holo_jacobian(self.eval, z)


def identity_map(n: int = 2) -> HoloMap:
    return HoloMap(n=n, eval=lambda z: np.array(z, dtype=complex), name="identity", jacobian=lambda z: np.eye(n, dtype=complex))


def shear_map(n: int = 2, coeff: complex = 1.0) -> HoloMap:
    """(z1, ..., z_{n-1}, z_n + coeff * z1^2)."""

    def ev(z):
        w = np.array(z, dtype=complex)
        w[..., -1] = w[..., -1] + coeff * z[..., 0] ** 2
        return w

    def jac(z):
        J = np.eye(n, dtype=complex)
        J[-1, 0] += 2 * coeff * z[0]
        return J

    return HoloMap(n=n, eval=ev, name="shear", jacobian=jac)


PHI_BUILTINS = {"identity": identity_map, "shear": shear_map}


def normalize(phi: HoloMap) -> HoloMap:
    """Translate by Phi(0) and pre-compose with DPhi(0)^{-1}."""
    zero = np.zeros(phi.n, dtype=complex)
    c = phi(zero)
    D = phi.jacobian_at(zero)
    if np.linalg.norm(c) <= NORMALIZATION_TOL and np.linalg.norm(D - np.eye(phi.n)) <= NORMALIZATION_TOL:
        return phi
    L = np.linalg.inv(D)

    def ev(z):
        return phi(_apply(L, z)) - c

    jac = None
    if phi.jacobian is not None:
        jac = lambda z: phi.jacobian_at(L @ z) @ L  # noqa: E731
    return HoloMap(n=phi.n, eval=ev, name=f"normalized({phi.name})", jacobian=jac)


def _require_normalized(phi: HoloMap):
    zero = np.zeros(phi.n, dtype=complex)
    c = np.linalg.norm(phi(zero))
    d = np.linalg.norm(phi.jacobian_at(zero) - np.eye(phi.n))
    if c > NORMALIZATION_TOL or d > NORMALIZATION_TOL:
        raise NormalizationMissing(f"Phi(0) off by {c:.3g}, DPhi(0) - I off by {d:.3g}; call normalize() first")


def psi(fld: F.Field, phi: HoloMap, z) -> np.ndarray:
    """Psi(z) = A Phi(z) - DPhi(z) V(z), for one point or a batch."""
    z = np.asarray(z, dtype=complex)
    A = fld.linearization
    if z.ndim == 1:
        return A @ phi(z) - phi.jacobian_at(z) @ fld.eval(z)
    return np.stack([psi(fld, phi, p) for p in z])


@dataclass(frozen=True)
class PsiDefect:
    value: np.ndarray
    psi0_norm: float
    dpsi0_norm: float

    def ok(self, tol: float = 1e-6) -> bool:
        return self.psi0_norm <= tol and self.dpsi0_norm <= tol


def psi_defect(fld: F.Field, phi: HoloMap, z=None) -> PsiDefect:
    """Psi at z together with |Psi(0)| and |DPsi(0)| (contour Jacobian)."""
    _require_normalized(phi)
    zero = np.zeros(fld.n, dtype=complex)
    z = zero if z is None else np.asarray(z, dtype=complex)
    p0 = float(np.linalg.norm(psi(fld, phi, zero)))
    dp0 = float(np.linalg.norm(F.holo_jacobian(lambda w: psi(fld, phi, w), zero), 2))
    return PsiDefect(value=psi(fld, phi, z), psi0_norm=p0, dpsi0_norm=dp0)


# ---------------------------------------------------------------------------
# isotopy


@dataclass
class IsotopyConfig:
    c: float
    epsilon1: float
    phi: HoloMap
    fld: F.Field
    limit: LinearizationResult
    tol: float = 1e-12

    @property
    def exponent(self) -> float:
        """c (2 alpha + k_- - epsilon1), the decay order of H(t) - H(0) in t."""
        return self.c * (self.limit.C_theoretical - self.epsilon1)


def isotopy_config(
    fld: F.Field,
    domain=None,
    phi: HoloMap | None = None,
    c: float | None = None,
    epsilon1: float | None = None,
    limit: LinearizationResult | None = None,
    alpha: float | None = None,
    compact=None,
) -> IsotopyConfig:
    if limit is None:
        limit = limit_map(fld, domain, compact=compact, alpha=alpha)
    C = limit.C_theoretical
    eps1 = 0.1 * C if epsilon1 is None else float(epsilon1)
    if not C - eps1 > 0:
        raise HypothesisViolated(f"2*alpha + k_- - epsilon1 = {C - eps1:.6g} must be positive")
    cc = 2.0 / (C - eps1) if c is None else float(c)
    if not cc > 1.0 / (C - eps1):
        raise HypothesisViolated(f"c = {cc:.6g} must exceed 1/(2*alpha + k_- - epsilon1) = {1 / (C - eps1):.6g}")
    phi = normalize(identity_map(fld.n) if phi is None else phi)
    return IsotopyConfig(c=cc, epsilon1=eps1, phi=phi, fld=fld, limit=limit)


def _check_t(t: float, open_left: bool):
    if not (0.0 <= t <= 1.0) or (open_left and t == 0.0):
        raise ValueError(f"t={t} outside the allowed range")


def isotopy_eval(cfg: IsotopyConfig, t: float, z) -> np.ndarray:
    """H(t, z); at t = 0 the frozen limit exp(-TA) Phi(X_T(z))."""
    _check_t(t, open_left=False)
    z = np.asarray(z, dtype=complex)
    A = cfg.fld.linearization
    s = cfg.limit.horizon if t == 0 else -cfg.c * math.log(t)
    x = _flow_relative(cfg.fld, s, z, cfg.tol)
    return _apply(cxlinalg.mat_exp(A, -s), cfg.phi(x))


def isotopy_time_derivative(cfg: IsotopyConfig, t: float, z) -> np.ndarray:
    """dH/dt = (c/t) exp(c ln(t) A) Psi(X(-c ln t, z))."""
    _check_t(t, open_left=True)
    z = np.asarray(z, dtype=complex)
    A = cfg.fld.linearization
    s = -cfg.c * math.log(t)
    x = _flow_relative(cfg.fld, s, z, cfg.tol)
    return (cfg.c / t) * _apply(cxlinalg.mat_exp(A, -s), psi(cfg.fld, cfg.phi, x))


def derivative_decay_slope(cfg: IsotopyConfig, z, ts=None) -> float:
    """Log-log slope of |dH/dt| against t over a grid accumulating at 0."""
    ts = np.geomspace(1e-3, 1e-1, 9) if ts is None else np.asarray(ts, dtype=float)
    norms = np.array([np.linalg.norm(isotopy_time_derivative(cfg, float(t), z)) for t in ts])
    keep = norms > 0
    if keep.sum() < 2:
        return math.inf
    return float(np.polyfit(np.log(ts[keep]), np.log(norms[keep]), 1)[0])


# ---------------------------------------------------------------------------
# injectivity


@dataclass(frozen=True)
class InjectivityReport:
    points: int
    pairs_checked: int
    min_input_separation: float
    min_image_separation: float
    min_abs_det: float

    def to_json(self) -> dict:
        return {
            "points": self.points,
            "pairs_checked": self.pairs_checked,
            "min_input_separation": self.min_input_separation,
            "min_image_separation": self.min_image_separation,
            "min_abs_det": self.min_abs_det,
        }


def injectivity_scan(F_eval: Callable, compact, separation: float = 1e-3, tol: float = 1e-9) -> InjectivityReport:
    """Pairwise image separation and a |det DF| floor over a finite sample."""
    if not separation > 0:
        raise ValueError("separation must be positive")
    K = np.atleast_2d(np.asarray(compact, dtype=complex))
    img = np.asarray(F_eval(K), dtype=complex)
    iu, ju = np.triu_indices(len(K), k=1)
    din = np.linalg.norm(K[iu] - K[ju], axis=-1)
    dout = np.linalg.norm(img[iu] - img[ju], axis=-1)
    far = din >= separation
    min_out = float(dout[far].min()) if far.any() else math.inf
    dets = np.array([abs(np.linalg.det(F.holo_jacobian(F_eval, p))) for p in K])
    report = InjectivityReport(
        points=len(K),
        pairs_checked=int(far.sum()),
        min_input_separation=float(din.min()) if len(din) else math.inf,
        min_image_separation=min_out,
        min_abs_det=float(dets.min()),
    )
    if min_out <= tol:
        raise InjectivityViolation(f"two points at distance >= {separation:g} map within {min_out:.3g}")
    if report.min_abs_det <= tol:
        raise InjectivityViolation(f"|det DF| drops to {report.min_abs_det:.3g} on the sample")
    return report
