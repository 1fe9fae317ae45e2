"""Domain predicates and samplers, trajectory-based spirallike verification,
entry times of compact sets and the complex-time set V_K."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fields as F
from .errors import ConfigError, DimensionMismatch, Diverged, EmptySample, NotAbsorbed, StepUnderflow
from .ode import dopri5


@dataclass(frozen=True)
class DomainSpec:
    """An open domain in C^n given by strict inequalities.

    contains and margin are vectorized over leading axes; margin is the
    smallest signed slack of the defining inequalities (positive inside).
    Sampling is rejection from the real box `box` of shape (2n, 2), ordered
    (Re z1, Im z1, Re z2, ...).
    """

    n: int
    name: str
    margin: Callable
    box: np.ndarray
    aux_margins: dict = field(default_factory=dict)
    spec: dict | None = None

    def contains(self, z) -> np.ndarray | bool:
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.n:
            raise DimensionMismatch(f"domain {self.name!r} lives in C^{self.n}, got {z.shape[-1]} coordinates")
        with np.errstate(all="ignore"):
            m = self.margin(z)
        res = np.asarray(m > 0)
        return bool(res) if res.ndim == 0 else res

    def slack(self, z):
        with np.errstate(all="ignore"):
            return self.margin(np.asarray(z, dtype=complex))

    def sample(self, count: int, seed: int = 0, max_batches: int = 1000) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo, hi = self.box[:, 0], self.box[:, 1]
        out = []
        have = 0
        batch = max(64, 4 * count)
        for _ in range(max_batches):
            if have >= count:
                break
            x = rng.uniform(lo, hi, size=(batch, 2 * self.n))
            z = x[:, 0::2] + 1j * x[:, 1::2]
            keep = z[self.contains(z)]
            out.append(keep)
            have += len(keep)
        if have < count:
            raise EmptySample(f"rejection sampling from {self.name!r} produced {have} < {count} points")
        return np.concatenate(out)[:count]

    def to_json(self) -> dict:
        if self.spec is None:
            raise ConfigError(f"domain {self.name!r} has no serializable description")
        return self.spec


def contains(domain: DomainSpec, z):
    return domain.contains(z)


def _box(pairs) -> np.ndarray:
    return np.array(pairs, dtype=float)


# ---------------------------------------------------------------------------
# builtin domains


def hartogs(n: int = 2, bound: float = 3.0) -> DomainSpec:
    """{Re z1 < bound, |z_j| < e^{-Re z1 / 2} for j >= 2}."""

    def margin(z):
        x = z[..., 0].real
        s = np.exp(-0.5 * x)[..., None] - np.abs(z[..., 1:])
        return np.minimum(bound - x, s.min(axis=-1))

    def log_margin(z):
        x = z[..., 0].real
        s = -0.5 * x[..., None] - np.log(np.abs(z[..., 1:]))
        return np.minimum(bound - x, s.min(axis=-1))

    r = math.exp(1.5)
    box = [[-3.0, bound], [-3.0, 3.0]] + [[-r, r], [-r, r]] * (n - 1)
    return DomainSpec(
        n=n,
        name="hartogs" if n == 2 else f"hartogs-{n}",
        margin=margin,
        box=_box(box),
        aux_margins={"log": log_margin},
        spec={"builtin": "hartogs", "params": {"n": n, "bound": bound}},
    )


def nilpotent_log(n: int = 2, lam1: float = -1.0) -> DomainSpec:
    """{|z_{n-1} - (z_n / lam1) ln|z_n|| < 1}, lam1 < 0 (z_n = 0 gives the limit value 0)."""
    if n < 2 or not lam1 < 0:
        raise ConfigError("nilpotent-log domain needs n >= 2 and lam1 < 0")

    def margin(z):
        zn = z[..., -1]
        a = np.abs(zn)
        term = np.where(a > 0, zn * np.log(np.where(a > 0, a, 1.0)) / lam1, 0.0)
        return 1.0 - np.abs(z[..., -2] - term)

    shift = 1.0 + 3.0 / abs(lam1)
    box = [[-2.0, 2.0], [-2.0, 2.0]] * n
    box[2 * (n - 2)] = [-shift, shift]
    box[2 * (n - 2) + 1] = [-shift, shift]
    return DomainSpec(
        n=n,
        name="nilpotent-log",
        margin=margin,
        box=_box(box),
        spec={"builtin": "nilpotent-log", "params": {"n": n, "lam1": lam1}},
    )


def power_difference(n: int = 2, lambdas=(2, 3), i: int = 0, j: int = 1, powers=(3, 2)) -> DomainSpec:
    """{|z_i^{m_i} - z_j^{m_j}| < 1} with m_i lambda_i = m_j lambda_j.

    The unpowered slack 1 - |z_i - z_j| is recorded as an auxiliary margin.
    """
    lambdas = [int(v) for v in lambdas]
    mi, mj = int(powers[0]), int(powers[1])
    if len(lambdas) != n or mi * lambdas[i] != mj * lambdas[j]:
        raise ConfigError("power-difference domain needs m_i*lambda_i == m_j*lambda_j")

    def margin(z):
        return 1.0 - np.abs(z[..., i] ** mi - z[..., j] ** mj)

    def unpowered(z):
        return 1.0 - np.abs(z[..., i] - z[..., j])

    return DomainSpec(
        n=n,
        name="power-difference",
        margin=margin,
        box=_box([[-1.5, 1.5]] * (2 * n)),
        aux_margins={"unpowered": unpowered},
        spec={"builtin": "power-difference", "params": {"n": n, "lambdas": lambdas, "i": i, "j": j, "powers": [mi, mj]}},
    )


def ball(n: int = 2, radius: float = 1.0) -> DomainSpec:
    def margin(z):
        return radius - np.linalg.norm(z, axis=-1)

    return DomainSpec(
        n=n,
        name="ball",
        margin=margin,
        box=_box([[-radius, radius]] * (2 * n)),
        spec={"builtin": "ball", "params": {"n": n, "radius": radius}},
    )


def product_ball(base: DomainSpec, m: int = 1, radius: float = 1.0) -> DomainSpec:
    """base x {||w|| < radius} in C^{n+m}."""
    n = base.n

    def margin(z):
        return np.minimum(base.margin(z[..., :n]), radius - np.linalg.norm(z[..., n:], axis=-1))

    spec = None
    if base.spec is not None:
        spec = {"builtin": "product-ball", "params": {"base": base.spec, "m": m, "radius": radius}}
    return DomainSpec(
        n=n + m,
        name=f"{base.name}-x-ball",
        margin=margin,
        box=np.vstack([base.box, _box([[-radius, radius]] * (2 * m))]),
        spec=spec,
    )


# ---------------------------------------------------------------------------
# user-defined inequality domains


def _const(v):
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def eval_expr(node, z: np.ndarray):
    """Evaluate an expression tree at points z (coordinates on the last axis)."""
    if isinstance(node, (int, float)) or (isinstance(node, list) and len(node) == 2 and not isinstance(node[0], dict)):
        return np.full(z.shape[:-1], _const(node))
    if not isinstance(node, dict) or len(node) != 1:
        raise ConfigError(f"bad expression node {node!r}")
    (op, arg), = node.items()
    if op == "var":
        k = int(arg)
        if not 1 <= k <= z.shape[-1]:
            raise ConfigError(f"variable index {k} out of range")
        return z[..., k - 1]
    if op == "const":
        return np.full(z.shape[:-1], _const(arg))
    if op == "poly":
        n = z.shape[-1]
        table = {F._parse_exponents(k, n): F._parse_coeff(v) for k, v in arg.items()}
        return F._poly_eval_table(table, z)
    unary = {
        "re": lambda a: np.real(a) + 0j,
        "im": lambda a: np.imag(a) + 0j,
        "abs": lambda a: np.abs(a) + 0j,
        "log": np.log,
        "exp": np.exp,
        "neg": lambda a: -a,
    }
    if op in unary:
        return unary[op](eval_expr(arg, z))
    if op == "add":
        return sum(eval_expr(a, z) for a in arg)
    if op == "mul":
        out = eval_expr(arg[0], z)
        for a in arg[1:]:
            out = out * eval_expr(a, z)
        return out
    if op == "sub":
        return eval_expr(arg[0], z) - eval_expr(arg[1], z)
    if op == "pow":
        return eval_expr(arg[0], z) ** int(arg[1])
    raise ConfigError(f"unknown operator {op!r}")


def inequality_domain(n: int, constraints, box=None, name: str = "inequality") -> DomainSpec:
    """Domain {lhs_k < rhs_k for all k}; each constraint is {"lt": [lhs, rhs]}.

    Both sides are expression trees; their real parts are compared.
    """
    pairs = []
    for c in constraints:
        if "lt" not in c or len(c["lt"]) != 2:
            raise ConfigError(f"constraint must be {{'lt': [lhs, rhs]}}, got {c!r}")
        pairs.append(tuple(c["lt"]))

    def margin(z):
        vals = [np.real(eval_expr(r, z) - eval_expr(lft, z)) for lft, r in pairs]
        return np.min(np.stack(vals, axis=-1), axis=-1)

    if box is None:
        box = [[-3.0, 3.0]] * (2 * n)
    box = _box(box)
    if box.shape != (2 * n, 2):
        raise ConfigError(f"box must have {2 * n} [lo, hi] rows")
    return DomainSpec(
        n=n,
        name=name,
        margin=margin,
        box=box,
        spec={"inequality": {"n": n, "constraints": list(constraints), "box": box.tolist()}},
    )


DOMAIN_BUILTINS = {
    "hartogs": hartogs,
    "hartogs-n": lambda **p: hartogs(**{"n": 3, **p}),
    "nilpotent-log": nilpotent_log,
    "power-difference": power_difference,
    "ball": ball,
}


def builtin_domain(name: str, **params) -> DomainSpec:
    if name == "product-ball":
        base = params.pop("base", {"builtin": "hartogs"})
        return product_ball(domain_from_json(base), **params)
    if name not in DOMAIN_BUILTINS:
        raise ConfigError(f"unknown builtin domain {name!r}; choose from {sorted(DOMAIN_BUILTINS) + ['product-ball']}")
    return DOMAIN_BUILTINS[name](**params)


def domain_from_json(obj) -> DomainSpec:
    if isinstance(obj, str):
        return builtin_domain(obj)
    if "builtin" in obj:
        return builtin_domain(obj["builtin"], **dict(obj.get("params", {})))
    if "inequality" in obj:
        q = obj["inequality"]
        return inequality_domain(int(q["n"]), q["constraints"], q.get("box"), name=obj.get("name", "inequality"))
    raise ConfigError(f"unrecognized domain description: {obj!r}")


def builtin_pair(name: str):
    """(domain, field) pairs that are spirallike by construction."""
    if name == "hartogs":
        return hartogs(2), F.example_field(2)
    if name == "hartogs-n":
        return hartogs(3), F.example_field(3)
    if name == "nilpotent-log":
        return nilpotent_log(2, -1.0), F.nilpotent_field(2, -1.0 + 0.5j)
    if name == "power-difference":
        return power_difference(), F.diagonal_field((2, 3))
    if name == "product-ball":
        return product_ball(hartogs(2)), F.builtin_field("product-example", beta=1.75)
    if name == "ball":
        return ball(2), F.linear_field(-np.eye(2), name="-I")
    raise ConfigError(f"unknown builtin pair {name!r}; choose from {PAIR_NAMES}")


PAIR_NAMES = ("hartogs", "hartogs-n", "nilpotent-log", "power-difference", "product-ball", "ball")


# ---------------------------------------------------------------------------
# spirallike verification


@dataclass(frozen=True)
class SpiralReport:
    verified: bool
    n_samples: int
    horizon: float
    violations: tuple
    min_margin: float
    domain_name: str = ""
    field_name: str = ""
    aux_min_margins: dict = field(default_factory=dict)
    checked_times: int = 0

    def to_json(self) -> dict:
        return {
            "verified": self.verified,
            "domain": self.domain_name,
            "field": self.field_name,
            "n_samples": self.n_samples,
            "horizon": self.horizon,
            "checked_times": self.checked_times,
            "min_margin": self.min_margin,
            "aux_min_margins": dict(self.aux_min_margins),
            "violations": [
                {"start": _cvec(z), "t_exit": t, "point": _cvec(p)} for z, t, p in self.violations
            ],
        }

    def violations_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "t_exit", "start", "point"])
        for k, (z, t, p) in enumerate(self.violations):
            w.writerow([k, repr(float(t)), _cstr(z), _cstr(p)])
        return buf.getvalue()


def _cvec(z) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(z, dtype=complex).ravel()]


def _cstr(z) -> str:
    return " ".join(f"{v.real!r}{v.imag:+.17g}j" for v in np.asarray(z, dtype=complex).ravel())


class _Tracker:
    """Accumulates first exits and margins over a batch of trajectories."""

    def __init__(self, domain: DomainSpec, starts: np.ndarray):
        self.domain = domain
        self.starts = starts
        self.first_exit = np.full(len(starts), np.inf)
        self.exit_point = np.zeros_like(starts)
        self.min_margin = np.inf
        self.aux = {k: np.inf for k in domain.aux_margins}
        self.count = 0

    def check(self, t: float, pts: np.ndarray, idx: np.ndarray):
        m = self.domain.slack(pts)
        m = np.where(np.isnan(m), -np.inf, m)
        self.count += 1
        self.min_margin = min(self.min_margin, float(m.min()))
        for k, fn in self.domain.aux_margins.items():
            with np.errstate(all="ignore"):
                self.aux[k] = min(self.aux[k], float(np.nanmin(fn(pts))))
        bad = (m <= 0) & (t < self.first_exit[idx])
        if np.any(bad):
            self.first_exit[idx[bad]] = t
            self.exit_point[idx[bad]] = pts[bad]

    def mark_diverged(self, idx, t: float, point):
        if t < self.first_exit[idx]:
            self.first_exit[idx] = t
            self.exit_point[idx] = point


def _numeric_sweep(fld, tracker: _Tracker, z: np.ndarray, idx: np.ndarray, horizon: float, dense: np.ndarray, tol: float):
    sol = dopri5(lambda t, x: fld.eval(x), 0.0, z, horizon, rtol=tol, atol=tol, t_eval=dense, record_steps=True)
    for t, y in zip(sol.step_t, sol.step_y):
        tracker.check(t, y, idx)
    for t, y in zip(dense, sol.y_eval):
        tracker.check(t, y, idx)


def spirallike_verify(
    domain: DomainSpec,
    fld: F.Field,
    n_samples: int = 1000,
    horizon: float = 20.0,
    step: float = 0.05,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
    starts=None,
    chunk: int = 250,
) -> SpiralReport:
    """Sample starts in the domain and check X(t, z) stays inside for t in [0, horizon].

    Membership is checked at every multiple of step/4 and, for numerical
    flows, also at every accepted integrator step. A trajectory that
    diverges counts as leaving the domain at the divergence time.
    """
    if domain.n != fld.n:
        raise DimensionMismatch(f"domain is in C^{domain.n} but the field is on C^{fld.n}")
    if not (horizon > 0 and step > 0):
        raise ValueError("horizon and step must be positive")
    z0 = domain.sample(n_samples, seed) if starts is None else np.atleast_2d(np.asarray(starts, dtype=complex))
    count = int(math.ceil(horizon / (step / 4) - 1e-9))
    dense = np.linspace(0.0, horizon, count + 1)
    tracker = _Tracker(domain, z0)
    use_closed = F._use_closed(fld, method)
    for lo in range(0, len(z0), chunk):
        idx = np.arange(lo, min(lo + chunk, len(z0)))
        z = z0[idx]
        if use_closed:
            for t in dense:
                with np.errstate(all="ignore"):
                    tracker.check(t, fld.closed_flow(t, z) if t else z, idx)
            continue
        try:
            _numeric_sweep(fld, tracker, z, idx, horizon, dense, tol)
        except (Diverged, StepUnderflow):
            # isolate the offending starts one at a time
            for k in idx:
                try:
                    _numeric_sweep(fld, tracker, z0[k : k + 1], np.array([k]), horizon, dense, tol)
                except (Diverged, StepUnderflow) as exc:
                    t_bad = getattr(exc, "t", None)
                    tracker.mark_diverged(k, float(t_bad) if t_bad is not None else 0.0, np.full(fld.n, np.nan + 0j))
    viol = tuple(
        (z0[k], float(tracker.first_exit[k]), tracker.exit_point[k])
        for k in range(len(z0))
        if np.isfinite(tracker.first_exit[k])
    )
    return SpiralReport(
        verified=len(viol) == 0,
        n_samples=len(z0),
        horizon=float(horizon),
        violations=viol,
        min_margin=float(tracker.min_margin),
        domain_name=domain.name,
        field_name=fld.name,
        aux_min_margins=tracker.aux,
        checked_times=tracker.count,
    )


# ---------------------------------------------------------------------------
# entry times


@dataclass(frozen=True)
class EntryTime:
    compact_label: str
    M_K: float
    certified_grid: tuple

    def to_json(self) -> dict:
        times, flags = self.certified_grid
        return {
            "compact": self.compact_label,
            "M_K": self.M_K,
            "grid_points": len(times),
            "all_inside_after_M_K": bool(all(f for t, f in zip(times, flags) if t > self.M_K)),
        }


def entry_time(
    domain: DomainSpec,
    fld: F.Field,
    compact,
    horizon: float = 20.0,
    step: float = 0.05,
    tol: float = 1e-10,
    label: str | None = None,
    method: str = "auto",
) -> EntryTime:
    """Smallest time after which every trajectory from the compact set stays inside.

    The last grid time with some trajectory outside is followed by bisection
    down to step/16 to locate the final entry.
    """
    K = np.atleast_2d(np.asarray(compact, dtype=complex))
    count = int(math.ceil(horizon / step - 1e-9))
    times = np.linspace(0.0, count * step, count + 1)
    pts = F.flow_on_grid(fld, times, K, tol, method)
    inside = np.array([bool(np.all(domain.contains(p))) for p in pts])
    if not inside[-1]:
        raise NotAbsorbed(f"some trajectory is outside at the horizon t={times[-1]:g}")
    out_idx = np.nonzero(~inside)[0]
    label = label or f"{len(K)} point(s)"
    if len(out_idx) == 0:
        return EntryTime(label, 0.0, (tuple(times.tolist()), tuple(inside.tolist())))
    k = int(out_idx[-1])
    lo, hi = times[k], times[k + 1]
    base = pts[k]
    while hi - lo > step / 16 * (1 + 1e-12):
        mid = 0.5 * (lo + hi)
        p = F.flow(fld, mid - times[k], base, tol, method)
        if np.all(domain.contains(p)):
            hi = mid
        else:
            lo = mid
    return EntryTime(label, float(hi), (tuple(times.tolist()), tuple(inside.tolist())))


# ---------------------------------------------------------------------------
# V_K


@dataclass(frozen=True)
class VKSample:
    members: tuple  # w = e^{-tau} for accepted tau, plus 0
    accepted_taus: tuple
    rejected_taus: tuple
    fraction_failures: tuple  # (tau, fraction) pairs whose scaled member was rejected
    fractions: tuple

    @property
    def star_shaped(self) -> bool:
        return len(self.fraction_failures) == 0

    def to_json(self) -> dict:
        return {
            "members": _cvec(self.members),
            "accepted": len(self.accepted_taus),
            "rejected": len(self.rejected_taus),
            "fractions": list(self.fractions),
            "fraction_failures": [[[t.real, t.imag], f] for t, f in self.fraction_failures],
        }


def vk_sample(
    domain: DomainSpec,
    fld: F.Field,
    compact,
    tau_grid,
    tol: float = 1e-10,
    fractions=(0.25, 0.5, 0.75),
    method: str = "auto",
) -> VKSample:
    """{e^{-tau}: X(tau, z) in the domain for all z in K} over a grid of complex tau.

    Each accepted member w = e^{-tau} is re-tested at f*w = e^{-(tau - ln f)}.
    """
    K = np.atleast_2d(np.asarray(compact, dtype=complex))

    def ok(tau):
        try:
            return bool(np.all(domain.contains(F.flow_complex_time(fld, tau, K, tol, method))))
        except (Diverged, StepUnderflow):
            return False

    acc, rej, fails = [], [], []
    for tau in np.asarray(tau_grid, dtype=complex).ravel():
        tau = complex(tau)
        if ok(tau):
            acc.append(tau)
            for f in fractions:
                if not ok(tau - math.log(f)):
                    fails.append((tau, f))
        else:
            rej.append(tau)
    members = tuple([0j] + [complex(np.exp(-t)) for t in acc])
    return VKSample(members, tuple(acc), tuple(rej), tuple(fails), tuple(fractions))
