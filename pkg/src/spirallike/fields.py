"""Holomorphic vector fields, their real- and complex-time flows, variational
flows, divergence, decay-rate estimation and products."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import cxlinalg
from .errors import BetaOutOfRange, ConfigError, DimensionMismatch, EmptySample
from .ode import dopri5

DEFAULT_TOL = 1e-10


# ---------------------------------------------------------------------------
# differentiation of holomorphic maps


def holo_jacobian(f: Callable, z, radius: float | None = None, nodes: int = 16) -> np.ndarray:
    """Jacobian of a holomorphic map at z by Cauchy's formula on small circles.

    For each coordinate direction the map is sampled at `nodes` points
    z + r*w^k*e_j (w a root of unity) and the first Fourier coefficient is
    taken. Truncation error is O(r^nodes), so the result is accurate to
    roughly machine precision times max|f|/r; this is the holomorphic
    counterpart of complex-step differentiation. Maps that cannot take a
    batch of points fall back to central differences with h = 1e-6.
    """
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    if radius is None:
        radius = 1e-2 * max(1.0, float(np.linalg.norm(z)))
    w = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    pts = np.repeat(z[None, :], n * nodes, axis=0)
    for j in range(n):
        pts[j * nodes : (j + 1) * nodes, j] += radius * w
    try:
        vals = np.asarray(f(pts), dtype=complex)
        if vals.shape[0] != n * nodes:
            raise ValueError("map is not vectorized")
    except (ValueError, TypeError, IndexError):
        return fd_jacobian(f, z)
    vals = vals.reshape(n, nodes, -1)
    coef = np.einsum("jkm,k->mj", vals, w.conj()) / (nodes * radius)
    return coef


def fd_jacobian(f: Callable, z, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a holomorphic map (real directions)."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    cols = []
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = h
        cols.append((np.asarray(f(z + e)) - np.asarray(f(z - e))) / (2 * h))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# the Field value


@dataclass(frozen=True)
class Field:
    """A holomorphic vector field V on C^n.

    eval, closed_flow, divergence and jacobian all accept a batch of points
    with the coordinate on the last axis. closed_flow(t, z) takes a real or
    complex time.
    """

    n: int
    eval: Callable
    linearization: np.ndarray
    name: str
    closed_flow: Callable | None = None
    divergence: Callable | None = None
    jacobian: Callable | None = None
    stable: bool = True
    spec: dict | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.eval(np.asarray(z, dtype=complex))

    def jacobian_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(z), dtype=complex)
        return holo_jacobian(self.eval, z)

    def to_json(self) -> dict:
        if self.spec is None:
            raise ConfigError(f"field {self.name!r} has no serializable description")
        return self.spec


def _check_dim(fld: Field, z: np.ndarray):
    if z.shape[-1] != fld.n:
        raise DimensionMismatch(f"field {fld.name!r} lives on C^{fld.n}, got a point with {z.shape[-1]} coordinates")


def linear_field(A, name: str | None = None) -> Field:
    M = cxlinalg.as_cmat(A)
    n = M.shape[0]
    summ = cxlinalg.spectral_summary(M)
    tr = complex(np.trace(M))

    def ev(z):
        return z @ M.T

    def closed(t, z):
        return np.asarray(z, dtype=complex) @ cxlinalg.mat_exp(M, t).T

    def div(z):
        return np.full(np.shape(z)[:-1], tr, dtype=complex)

    def jac(z):
        return np.broadcast_to(M, np.shape(z)[:-1] + (n, n)).copy()

    return Field(
        n=n,
        eval=ev,
        linearization=M,
        name=name or "linear",
        closed_flow=closed,
        divergence=div,
        jacobian=jac,
        stable=summ.k_plus < 0,
        spec={"linear": cxlinalg.cmat_to_json(M)},
    )


def example_field(n: int = 2) -> Field:
    """V = (-2 z1, -3 z_j + z1 z_j for j >= 2), with its closed-form flow."""
    if n < 2:
        raise ConfigError("the example field needs n >= 2")
    A = np.diag([-2.0] + [-3.0] * (n - 1)).astype(complex)

    def ev(z):
        out = np.empty_like(z)
        out[..., 0] = -2.0 * z[..., 0]
        out[..., 1:] = (-3.0 + z[..., :1]) * z[..., 1:]
        return out

    def closed(t, z):
        z = np.asarray(z, dtype=complex)
        out = np.empty_like(z)
        e2 = np.exp(-2.0 * t)
        out[..., 0] = z[..., 0] * e2
        out[..., 1:] = z[..., 1:] * (np.exp(-3.0 * t) * np.exp(0.5 * z[..., :1] * (1.0 - e2)))
        return out

    def div(z):
        return -2.0 + (n - 1) * (-3.0 + z[..., 0])

    def jac(z):
        J = np.zeros(np.shape(z)[:-1] + (n, n), dtype=complex)
        J[..., 0, 0] = -2.0
        for j in range(1, n):
            J[..., j, 0] = z[..., j]
            J[..., j, j] = -3.0 + z[..., 0]
        return J

    return Field(
        n=n,
        eval=ev,
        linearization=A,
        name="example" if n == 2 else f"example-{n}",
        closed_flow=closed,
        divergence=div,
        jacobian=jac,
        stable=True,
        spec={"builtin": "example", "params": {"n": n}},
    )


def nilpotent_field(n: int = 2, lam: complex = -1.0 + 0.5j) -> Field:
    """Linear field lam*I + N with N the nilpotent shift."""
    lam = complex(lam)
    A = lam * np.eye(n, dtype=complex) + np.eye(n, k=1, dtype=complex)
    f = linear_field(A, name="nilpotent")
    return replace(f, spec={"builtin": "nilpotent", "params": {"n": n, "lam": [lam.real, lam.imag]}})


def diagonal_field(lambdas=(2.0, 3.0)) -> Field:
    """Linear field diag(-lambda_1, ..., -lambda_n)."""
    lams = [float(v) for v in lambdas]
    f = linear_field(np.diag([-v for v in lams]), name="diagonal")
    return replace(f, spec={"builtin": "diagonal", "params": {"lambdas": lams}})


def _poly_eval_table(table: dict, z: np.ndarray) -> np.ndarray:
    out = np.zeros(z.shape[:-1], dtype=complex)
    for exps, c in table.items():
        term = np.full(z.shape[:-1], complex(c))
        for k, e in enumerate(exps):
            if e:
                term = term * z[..., k] ** e
        out = out + term
    return out


def _poly_diff_table(table: dict, k: int) -> dict:
    out = {}
    for exps, c in table.items():
        if exps[k] > 0:
            e2 = list(exps)
            e2[k] -= 1
            key = tuple(e2)
            out[key] = out.get(key, 0j) + c * exps[k]
    return out


def _parse_exponents(key, n: int) -> tuple:
    if isinstance(key, str):
        parts = [p for p in key.replace(" ", "").split(",") if p != ""]
        exps = tuple(int(p) for p in parts)
    else:
        exps = tuple(int(p) for p in key)
    if len(exps) != n or any(e < 0 for e in exps):
        raise ConfigError(f"bad monomial exponent {key!r} for n={n}")
    return exps


def _parse_coeff(c) -> complex:
    if isinstance(c, (list, tuple)):
        return complex(float(c[0]), float(c[1]))
    return complex(c)


def polynomial_field(components, name: str = "polynomial") -> Field:
    """Field whose components are sparse polynomial tables {exponents: coeff}."""
    n = len(components)
    tables = []
    for comp in components:
        tables.append({_parse_exponents(k, n): _parse_coeff(v) for k, v in comp.items()})
    dtables = [[_poly_diff_table(t, k) for k in range(n)] for t in tables]
    A = np.zeros((n, n), dtype=complex)
    const = np.zeros(n, dtype=complex)
    for i, t in enumerate(tables):
        for exps, c in t.items():
            if sum(exps) == 0:
                const[i] += c
            elif sum(exps) == 1:
                A[i, exps.index(1)] += c

    def ev(z):
        return np.stack([_poly_eval_table(t, z) for t in tables], axis=-1)

    def jac(z):
        rows = [np.stack([_poly_eval_table(dt, z) for dt in row], axis=-1) for row in dtables]
        return np.stack(rows, axis=-2)

    def div(z):
        return sum(_poly_eval_table(dtables[k][k], z) for k in range(n))

    spec = {
        "polynomial": {
            "n": n,
            "components": [
                {",".join(str(e) for e in exps): [c.real, c.imag] for exps, c in sorted(t.items())} for t in tables
            ],
        }
    }
    stable = bool(np.all(const == 0)) and cxlinalg.spectral_summary(A).k_plus < 0
    return Field(n=n, eval=ev, linearization=A, name=name, divergence=div, jacobian=jac, stable=stable, spec=spec)


def product_field(f1: Field, f2: Field | None = None, beta: float | None = None, decay=None, m: int = 1) -> Field:
    """Block field (V1(z), V2(w)) on C^{n+m}.

    With beta given, the second factor is -beta*w on C^m and beta must satisfy
    min(alpha, -k_-(A)) > beta > -k_-(A)/2, where A = DV1(0) and alpha comes
    from `decay` (a DecayEstimate of f1) or f1.meta["alpha"].
    """
    if beta is not None:
        alpha = decay.alpha if decay is not None else f1.meta.get("alpha")
        if alpha is None:
            raise BetaOutOfRange("beta requires a decay rate alpha for the first factor")
        km = cxlinalg.spectral_summary(f1.linearization).k_minus
        lo, hi = -km / 2.0, min(alpha, -km)
        if not (lo < beta < hi):
            raise BetaOutOfRange(f"beta={beta} outside the open interval ({lo:.6g}, {hi:.6g})")
        f2 = linear_field(-float(beta) * np.eye(m), name=f"-{beta:g}w")
    if f2 is None:
        raise ConfigError("product_field needs a second factor or beta")
    n1, n2 = f1.n, f2.n
    n = n1 + n2

    def ev(z):
        return np.concatenate([f1.eval(z[..., :n1]), f2.eval(z[..., n1:])], axis=-1)

    closed = None
    if f1.closed_flow is not None and f2.closed_flow is not None:

        def closed(t, z):
            z = np.asarray(z, dtype=complex)
            return np.concatenate([f1.closed_flow(t, z[..., :n1]), f2.closed_flow(t, z[..., n1:])], axis=-1)

    def jac(z):
        J = np.zeros(np.shape(z)[:-1] + (n, n), dtype=complex)
        J[..., :n1, :n1] = f1.jacobian(z[..., :n1])
        J[..., n1:, n1:] = f2.jacobian(z[..., n1:])
        return J

    def div(z):
        d1 = f1.divergence(z[..., :n1]) if f1.divergence else np.trace(f1.jacobian_at(z[..., :n1]))
        d2 = f2.divergence(z[..., n1:]) if f2.divergence else np.trace(f2.jacobian_at(z[..., n1:]))
        return d1 + d2

    L = np.zeros((n, n), dtype=complex)
    L[:n1, :n1] = f1.linearization
    L[n1:, n1:] = f2.linearization
    spec = None
    if beta is not None and f1.spec is not None:
        alpha = decay.alpha if decay is not None else f1.meta["alpha"]
        spec = {"product": [f1.spec], "beta": float(beta), "m": m, "alpha": float(alpha)}
    elif f1.spec is not None and f2.spec is not None:
        spec = {"product": [f1.spec, f2.spec]}
    return Field(
        n=n,
        eval=ev,
        linearization=L,
        name=f"({f1.name})x({f2.name})",
        closed_flow=closed,
        divergence=div,
        jacobian=jac if (f1.jacobian and f2.jacobian) else None,
        stable=f1.stable and f2.stable,
        spec=spec,
    )


def rotated(fld: Field, factor: complex = 1j) -> Field:
    """The field factor*V; for factor = i its real-time flow is psi_s."""
    closed = None
    if fld.closed_flow is not None:

        def closed(t, z):
            return fld.closed_flow(factor * t, z)

    jac = None
    if fld.jacobian is not None:

        def jac(z):
            return factor * fld.jacobian(z)

    return Field(
        n=fld.n,
        eval=lambda z: factor * fld.eval(z),
        linearization=factor * fld.linearization,
        name=f"{factor}*{fld.name}",
        closed_flow=closed,
        divergence=(lambda z: factor * fld.divergence(z)) if fld.divergence else None,
        jacobian=jac,
        stable=False,
    )


FIELD_BUILTINS = {
    "example": example_field,
    "nilpotent": nilpotent_field,
    "diagonal": diagonal_field,
}


def builtin_field(name: str, **params) -> Field:
    if name == "example-n":
        params.setdefault("n", 3)
        return example_field(**params)
    if name == "product-example":
        beta = params.get("beta", 1.75)
        base = example_field(params.get("n", 2))
        base = replace(base, meta={"alpha": params.get("alpha", 2.0)})
        return product_field(base, beta=beta)
    if name not in FIELD_BUILTINS:
        raise ConfigError(f"unknown builtin field {name!r}; choose from {sorted(FIELD_BUILTINS) + ['example-n', 'product-example']}")
    if name == "nilpotent" and "lam" in params:
        params = dict(params)
        params["lam"] = _parse_coeff(params["lam"])
    return FIELD_BUILTINS[name](**params)


def field_from_json(obj) -> Field:
    if isinstance(obj, str):
        return builtin_field(obj)
    if "builtin" in obj:
        return builtin_field(obj["builtin"], **obj.get("params", {}))
    if "linear" in obj:
        return linear_field(cxlinalg.as_cmat(obj["linear"]))
    if "polynomial" in obj:
        p = obj["polynomial"]
        f = polynomial_field(p["components"], name=obj.get("name", "polynomial"))
        if "n" in p and p["n"] != f.n:
            raise ConfigError("polynomial field n does not match the number of components")
        return f
    if "product" in obj:
        parts = [field_from_json(o) for o in obj["product"]]
        if "beta" in obj:
            base = replace(parts[0], meta={"alpha": obj.get("alpha", parts[0].meta.get("alpha"))})
            return product_field(base, beta=obj["beta"], m=obj.get("m", 1))
        return product_field(parts[0], parts[1])
    raise ConfigError(f"unrecognized field description: {obj!r}")


# ---------------------------------------------------------------------------
# flows


def _rhs(fld: Field):
    return lambda t, z: fld.eval(z)


def _use_closed(fld: Field, method: str) -> bool:
    if method == "closed":
        if fld.closed_flow is None:
            raise ConfigError(f"field {fld.name!r} has no closed-form flow")
        return True
    if method == "numeric":
        return False
    return fld.closed_flow is not None


def flow(fld: Field, t: float, z, tol: float = DEFAULT_TOL, method: str = "auto") -> np.ndarray:
    """X(t, z) for one point (n,) or a batch (m, n); t may be negative."""
    z = np.asarray(z, dtype=complex)
    _check_dim(fld, z)
    if t == 0:
        return z.copy()
    if _use_closed(fld, method):
        return np.asarray(fld.closed_flow(t, z), dtype=complex)
    return dopri5(_rhs(fld), 0.0, z, float(t), rtol=tol, atol=tol).y


def flow_on_grid(fld: Field, times, z, tol: float = DEFAULT_TOL, method: str = "auto") -> np.ndarray:
    """X(t_k, z) for an increasing grid of nonnegative times; shape (len(times),) + z.shape."""
    z = np.asarray(z, dtype=complex)
    _check_dim(fld, z)
    times = np.asarray(times, dtype=float)
    if _use_closed(fld, method):
        return np.stack([fld.closed_flow(t, z) if t != 0 else z.copy() for t in times])
    sol = dopri5(_rhs(fld), 0.0, z, float(times[-1]), rtol=tol, atol=tol, t_eval=times, exact_eval=True)
    return sol.y_eval


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    field_name: str
    start: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.points.shape[-1]
        head = ["t"]
        for k in range(n):
            head += [f"re_z{k + 1}", f"im_z{k + 1}"]
        w.writerow(head)
        for t, p in zip(self.times, self.points):
            row = [repr(float(t))]
            for v in p:
                row += [repr(float(v.real)), repr(float(v.imag))]
            w.writerow(row)
        return buf.getvalue()


def trajectory(fld: Field, times, z, tol: float = DEFAULT_TOL, method: str = "auto") -> Trajectory:
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0:
        times = np.concatenate([[0.0], times])
    pts = flow_on_grid(fld, times, z, tol, method)
    return Trajectory(times=times, points=pts, field_name=fld.name, start=np.asarray(z, dtype=complex))


def flow_complex_time(fld: Field, tau: complex, z, tol: float = DEFAULT_TOL, method: str = "auto") -> np.ndarray:
    """X(t + is, z) = phi_t(psi_s(z)) with psi the flow of iV.

    With method="auto" a closed-form flow evaluated at complex time is used
    when the field provides one; "numeric" forces the two-stage splitting.
    """
    tau = complex(tau)
    z = np.asarray(z, dtype=complex)
    _check_dim(fld, z)
    if tau == 0:
        return z.copy()
    if _use_closed(fld, method):
        return np.asarray(fld.closed_flow(tau, z), dtype=complex)
    w = z
    if tau.imag != 0:
        w = dopri5(lambda t, x: 1j * fld.eval(x), 0.0, w, tau.imag, rtol=tol, atol=tol).y
    if tau.real != 0:
        w = dopri5(_rhs(fld), 0.0, w, tau.real, rtol=tol, atol=tol).y
    return w


def flow_jacobian(fld: Field, t: float, z, tol: float = DEFAULT_TOL, jac_atol: float | None = None) -> np.ndarray:
    """D_z X(t, z) from the variational equation J' = DV(X) J, J(0) = I.

    The Jacobian block is integrated under an essentially relative tolerance
    (absolute floor jac_atol, default tol*1e-20) so that exponentially small
    entries stay accurate relative to themselves.
    """
    z = np.asarray(z, dtype=complex)
    _check_dim(fld, z)
    n = fld.n
    if t == 0:
        return np.eye(n, dtype=complex)
    jac_atol = tol * 1e-20 if jac_atol is None else jac_atol

    def rhs(_t, y):
        x = y[:n]
        J = y[n:].reshape(n, n)
        return np.concatenate([fld.eval(x), (fld.jacobian_at(x) @ J).ravel()])

    y0 = np.concatenate([z, np.eye(n, dtype=complex).ravel()])
    atol = np.concatenate([np.full(n, tol), np.full(n * n, jac_atol)])
    sol = dopri5(rhs, 0.0, y0, float(t), rtol=tol, atol=atol, guard_cols=n)
    return sol.y[n:].reshape(n, n)


def divergence_at(fld: Field, z) -> complex:
    z = np.asarray(z, dtype=complex)
    _check_dim(fld, z)
    if fld.divergence is not None:
        return complex(fld.divergence(z))
    return complex(np.trace(fld.jacobian_at(z)))


# ---------------------------------------------------------------------------
# decay estimation


@dataclass(frozen=True)
class DecayEstimate:
    gamma: float
    alpha: float
    samples_used: int
    horizon: float
    worst_ratio_curve: tuple
    non_decaying: bool = False

    def bound_holds(self, rel: float = 1e-9) -> bool:
        return all(r <= self.gamma * math.exp(-self.alpha * t) * (1 + rel) for t, r in self.worst_ratio_curve)

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "samples_used": self.samples_used,
            "horizon": self.horizon,
            "non_decaying": self.non_decaying,
            "worst_ratio_curve": [[t, r] for t, r in self.worst_ratio_curve],
        }


def decay_estimate(
    fld: Field,
    domain,
    n_samples: int = 200,
    horizon: float = 10.0,
    grid_step: float = 0.05,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
) -> DecayEstimate:
    """Fit ||X(t,z)|| <= gamma e^{-alpha t} ||z|| over points sampled from the domain.

    r(t) = max_z ||X(t,z)||/||z||; alpha is the least-squares slope of
    -log r(t) over the second half of the grid; gamma = max_t r(t) e^{alpha t}.
    """
    if n_samples < 1:
        raise EmptySample("n_samples must be at least 1")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    z = np.asarray(domain.sample(n_samples, seed), dtype=complex)
    norms = np.linalg.norm(z, axis=-1)
    z = z[norms > 0]
    norms = norms[norms > 0]
    if len(z) == 0:
        raise EmptySample("no nonzero sample points")
    count = int(round(horizon / grid_step))
    times = np.linspace(0.0, count * grid_step, count + 1)
    pts = flow_on_grid(fld, times, z, tol, method)
    r = (np.linalg.norm(pts, axis=-1) / norms).max(axis=1)
    tail = times >= times[-1] / 2
    tt, lr = times[tail], -np.log(r[tail])
    slope = float(np.polyfit(tt, lr, 1)[0])
    gamma = float(np.max(r * np.exp(slope * times)))
    non_decaying = slope <= 0 or not (r[tail][-1] < r[tail][0])
    curve = tuple((float(t), float(v)) for t, v in zip(times, r))
    return DecayEstimate(
        gamma=max(1.0, gamma),
        alpha=slope,
        samples_used=int(len(z)),
        horizon=float(times[-1]),
        worst_ratio_curve=curve,
        non_decaying=bool(non_decaying),
    )
