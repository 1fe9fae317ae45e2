"""Herglotz fields, evolution families and Loewner chains at desk scale.

An evolution family solves d/dt phi_{s,t}(z) = H(phi_{s,t}(z), t) with
phi_{s,s} = id. A Loewner chain f_t satisfies f_s = f_t o phi_{s,t} and the
PDE  d/dt f_t(z) = -Df_t(z) H(z, t). For a stable field V with limit map F the
family f_t = exp(-tA) F is such a chain for the autonomous data H(z, t) = V(z),
because F o X_u = exp(uA) F.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cxlinalg
from . import fields as F
from .errors import ConfigError, HypothesisViolated, NoConvergence
from .linearize import LinearizationResult
from .ode import dopri5

PDE_STEP = 1e-4
FUNCTIONAL_THRESHOLD = 1e-5


@dataclass(frozen=True)
class HerglotzField:
    """H(z, t), vectorized over leading axes of z."""

    n: int
    eval: Callable
    order: float = math.inf
    name: str = "herglotz"
    breaks: tuple = ()
    autonomous: F.Field | None = None
    spec: dict | None = None

    def __call__(self, z, t: float):
        return self.eval(np.asarray(z, dtype=complex), t)

    def bound(self, compact, t0: float, steps: int = 32) -> float:
        """Sampled sup of |H(z, t)| over compact x [0, t0], the constant c^K_{t0}."""
        K = np.atleast_2d(np.asarray(compact, dtype=complex))
        ts = np.linspace(0.0, t0, steps + 1)
        return float(max(np.linalg.norm(self.eval(K, float(t)), axis=-1).max() for t in ts))

    def to_json(self) -> dict:
        return {"name": self.name, "n": self.n, "order": "inf" if math.isinf(self.order) else self.order, "spec": self.spec}


def autonomous(fld: F.Field) -> HerglotzField:
    return HerglotzField(
        n=fld.n,
        eval=lambda z, t: fld.eval(z),
        name=f"autonomous({fld.name})",
        autonomous=fld,
        spec={"autonomous": fld.spec},
    )


def piecewise_linear(matrices, breaks) -> HerglotzField:
    """H(z, t) = A_k z for t in [breaks[k-1], breaks[k]); the last matrix runs to infinity.

    breaks holds len(matrices) - 1 increasing interior times.
    """
    mats = [cxlinalg.as_cmat(M) for M in matrices]
    breaks = tuple(float(b) for b in breaks)
    if len(breaks) != len(mats) - 1 or any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        raise ConfigError("piecewise field needs len(matrices) - 1 increasing break times")
    n = mats[0].shape[0]

    def ev(z, t):
        return z @ mats[bisect.bisect_right(breaks, t)].T

    return HerglotzField(
        n=n,
        eval=ev,
        order=math.inf,
        name="piecewise-linear",
        breaks=breaks,
        spec={"piecewise": [cxlinalg.cmat_to_json(M) for M in mats], "breaks": list(breaks)},
    )


HERGLOTZ_BUILTINS = {
    "example": lambda: autonomous(F.example_field()),
    "example-linear": lambda: autonomous(F.linear_field(F.example_field().linearization, name="example-linear")),
}


def herglotz_from_json(obj) -> HerglotzField:
    if isinstance(obj, str):
        obj = {"builtin": obj}
    if "builtin" in obj:
        try:
            return HERGLOTZ_BUILTINS[obj["builtin"]]()
        except KeyError:
            raise ConfigError(f"unknown Herglotz builtin {obj['builtin']!r}") from None
    if "piecewise" in obj:
        return piecewise_linear([cxlinalg.cmat_from_json(m) for m in obj["piecewise"]], obj.get("breaks", []))
    if "autonomous" in obj:
        return autonomous(F.field_from_json(obj["autonomous"]))
    raise ConfigError(f"unrecognized Herglotz description: {obj!r}")


# ---------------------------------------------------------------------------
# evolution family


def evolution_family(H: HerglotzField, s: float, t: float, z, tol: float = 1e-10) -> np.ndarray:
    """phi_{s,t}(z) by integrating the Loewner ODE, restarting at break times."""
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    w = np.asarray(z, dtype=complex)
    if s == t:
        return w.copy()
    knots = [s] + [b for b in H.breaks if s < b < t] + [t]
    for a, b in zip(knots, knots[1:]):
        mid = 0.5 * (a + b)
        # freeze the piece so the integrator never samples across a jump
        piece = (lambda tm: (lambda y, _t: H.eval(y, tm)))(mid) if H.breaks else H.eval
        w = dopri5(lambda tt, y: piece(y, tt), a, w, b, rtol=tol, atol=tol).y
    return w


def cocycle_defect(H: HerglotzField, s: float, t: float, u: float, z, tol: float = 1e-10) -> float:
    """|phi_{s,u}(z) - phi_{t,u}(phi_{s,t}(z))|."""
    direct = evolution_family(H, s, u, z, tol)
    split = evolution_family(H, t, u, evolution_family(H, s, t, z, tol), tol)
    return float(np.max(np.linalg.norm(direct - split, axis=-1)))


# ---------------------------------------------------------------------------
# chains


@dataclass
class LoewnerChain:
    n: int
    f: Callable
    construction: str = "user"
    source: str | None = None
    A: np.ndarray | None = field(default=None, repr=False)
    base: Callable | None = field(default=None, repr=False)

    def __call__(self, t: float, z):
        return self.f(t, np.asarray(z, dtype=complex))


def chain_from_spirallike(fld: F.Field, lin: LinearizationResult) -> LoewnerChain:
    """f_t = exp(-tA) F with F the certified limit map."""
    if not lin.C_theoretical > 0:
        raise HypothesisViolated("limit map is not certified (2*alpha + k_- <= 0)")
    A = fld.linearization
    Fz = lin.F_eval

    def f(t, z):
        return Fz(z) @ cxlinalg.mat_exp(A, -t).T

    return LoewnerChain(n=fld.n, f=f, construction="explicit-spirallike", source=fld.name, A=A, base=Fz)


def linear_chain(A) -> LoewnerChain:
    """f_t = exp(-tA), the chain of the linear field Az (F = identity)."""
    M = cxlinalg.as_cmat(A)
    return LoewnerChain(
        n=M.shape[0],
        f=lambda t, z: z @ cxlinalg.mat_exp(M, -t).T,
        construction="explicit-spirallike",
        source="linear",
        A=M,
        base=lambda z: np.asarray(z, dtype=complex),
    )


_STENCIL = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))


def _expm1_small(X: np.ndarray, terms: int = 12) -> np.ndarray:
    """exp(X) - I by its Taylor series, for small |X| (no cancellation against I)."""
    out = np.zeros_like(X)
    term = np.eye(X.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ X / k
        out = out + term
    return out


def time_derivative(chain: LoewnerChain, t: float, z, h: float = PDE_STEP) -> np.ndarray:
    """Five-point central difference in t.

    For chains exp(-tA) g(z) the stencil acts on the time factor only:
    sum_k c_k exp(-(t + k h) A) = exp(-tA) sum_k c_k (exp(-k h A) - I), so the
    large common factor carries no cancellation error.
    """
    z = np.asarray(z, dtype=complex)
    if chain.A is not None and chain.base is not None and np.linalg.norm(chain.A) * 2 * h < 0.1:
        S = sum(c * _expm1_small(-k * h * chain.A) for k, c in _STENCIL) / (12 * h)
        return chain.base(z) @ (cxlinalg.mat_exp(chain.A, -t) @ S).T
    return (-chain(t + 2 * h, z) + 8 * chain(t + h, z) - 8 * chain(t - h, z) + chain(t - 2 * h, z)) / (12 * h)


def pde_residual(chain: LoewnerChain, G: HerglotzField, t: float, z, h: float = PDE_STEP) -> float:
    """|d/dt f_t(z) + Df_t(z) G(z, t)| at one point."""
    z = np.asarray(z, dtype=complex)
    dt = time_derivative(chain, t, z, h)
    D = F.holo_jacobian(lambda w: chain(t, w), z)
    return float(np.linalg.norm(dt + D @ G(z, t)))


@dataclass
class FunctionalReport:
    max_defect: float
    threshold: float
    rows: list

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.threshold

    def to_json(self) -> dict:
        return {"max_defect": self.max_defect, "threshold": self.threshold, "passed": self.passed, "pairs": len({(r[0], r[1]) for r in self.rows})}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "t", "point", "defect"])
        for s, t, k, d in self.rows:
            w.writerow([repr(s), repr(t), k, repr(d)])
        return buf.getvalue()


def chain_functional_check(
    chain: LoewnerChain,
    H: HerglotzField,
    grid,
    compact,
    tol: float = 1e-12,
    threshold: float = FUNCTIONAL_THRESHOLD,
) -> FunctionalReport:
    """max over the (s, t) grid and the compact of |f_s(z) - f_t(phi_{s,t}(z))|."""
    K = np.atleast_2d(np.asarray(compact, dtype=complex))
    rows = []
    worst = 0.0
    for s, t in grid:
        if s > t:
            raise ValueError(f"grid pair ({s}, {t}) is not ordered")
        d = np.linalg.norm(chain(s, K) - chain(t, evolution_family(H, s, t, K, tol)), axis=-1)
        for k, v in enumerate(d):
            rows.append((float(s), float(t), k, float(v)))
        worst = max(worst, float(d.max()))
    return FunctionalReport(max_defect=worst, threshold=threshold, rows=rows)


def preimage(chain: LoewnerChain, t: float, w, z0, max_iter: int = 50, tol: float = 1e-12):
    """Damped Newton for f_t(z) = w from z0; returns (z, residual)."""
    w = np.asarray(w, dtype=complex)
    z = np.asarray(z0, dtype=complex).copy()
    r = chain(t, z) - w
    res = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if res <= tol * max(1.0, float(np.linalg.norm(w))):
            break
        D = F.holo_jacobian(lambda p: chain(t, p), z)
        step = np.linalg.solve(D, r)
        lam = 1.0
        while lam > 1e-6:
            cand = z - lam * step
            rc = chain(t, cand) - w
            if np.linalg.norm(rc) < res:
                z, r, res = cand, rc, float(np.linalg.norm(rc))
                break
            lam /= 2
        else:
            raise NoConvergence(f"Newton line search stalled at residual {res:.3g}")
    return z, res


def exhausting_time(A, domain, radius: float, times, n_samples: int = 400, seed: int = 0) -> float | None:
    """Smallest grid t with exp(-tA)(domain) containing the sampled ball of radius R.

    w lies in exp(-tA)(domain) exactly when exp(tA) w lies in the domain.
    """
    M = cxlinalg.as_cmat(A)
    n = M.shape[0]
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n_samples, 2 * n))
    g /= np.linalg.norm(g, axis=1)[:, None]
    rad = radius * rng.uniform(size=n_samples) ** (1 / (2 * n))
    pts = (g[:, :n] + 1j * g[:, n:]) * rad[:, None]
    pts = np.concatenate([pts, (g[:, :n] + 1j * g[:, n:]) * radius * (1 - 1e-12)])
    for t in times:
        if np.all(domain.contains(pts @ cxlinalg.mat_exp(M, float(t)).T)):
            return float(t)
    return None
