"""Constructive refutation of linear spirallikeness for the Hartogs domain.

Given an invertible 2x2 matrix A, build a point z of

    Omega = {Re z1 < 3, |z2| < exp(-Re z1 / 2)}

and a time t > 0 with exp(tA) z outside Omega. The case analysis follows the
eigenstructure of A: diagonal, Jordan block, upper-triangular with distinct
eigenvalues, and full conjugates of the last two. "Large enough" parameters
are grown by doubling until the closing inequality holds *and* the candidate
survives an independent check (strict membership on the matrix exponential).
Anything the recipes cannot settle falls through to a numeric search.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import cxlinalg
from . import fields as F
from .domains import DomainSpec, hartogs
from .errors import (
    Diverged,
    HypothesisViolated,
    NearDefective,
    NonSquare,
    Overflow,
    SearchExhausted,
    StepUnderflow,
    VerificationFailed,
)

DOUBLING_CAP = 2.0**60
REPEAT_TOL = 1e-9
COND_LIMIT = 1e8
T_MAX = 50.0

CASE_LABELS = (
    "diagonal.b1!=0",
    "diagonal.a1<0",
    "diagonal.a1>0",
    "triangular.lambda2!=0",
    "triangular.lambda1>0",
    "triangular.lambda1<0",
    "conjugated.diagonalizable.ac!=0",
    "conjugated.diagonalizable.ac=0.sub1",
    "conjugated.diagonalizable.ac=0.sub2",
    "conjugated.diagonalizable.ac=0.sub3",
    "conjugated.diagonalizable.ac=0.sub4",
    "conjugated.diagonalizable.ac=0.sub5",
    "conjugated.diagonalizable.ac=0.sub6",
    "conjugated.diagonalizable.ac=0.sub7",
    "conjugated.triangularizable.c!=0",
    "conjugated.triangularizable.c=0.lambda2!=0",
    "conjugated.triangularizable.c=0.lambda1<0",
    "conjugated.triangularizable.c=0.lambda1>0",
)

_OMEGA = hartogs(2)


def _cnum(x) -> list:
    x = complex(x)
    return [x.real, x.imag]


@dataclass
class Certificate:
    """A witness (z, t): z in the domain, exp(tA) z (or X(t, z)) outside it."""

    matrix: np.ndarray | None
    start: np.ndarray
    t_exit: float
    case_label: str
    parameters: dict = field(default_factory=dict)
    verified: bool = False
    trace: list = field(default_factory=list)
    exit_point: np.ndarray | None = None
    field_name: str | None = None

    def to_json(self) -> dict:
        params = {}
        for k, v in self.parameters.items():
            params[k] = _cnum(v) if isinstance(v, complex) else v
        return {
            "matrix": None if self.matrix is None else cxlinalg.cmat_to_json(self.matrix),
            "field": self.field_name,
            "start": [_cnum(v) for v in self.start],
            "t_exit": float(self.t_exit),
            "case_label": self.case_label,
            "parameters": params,
            "verified": bool(self.verified),
            "exit_point": None if self.exit_point is None else [_cnum(v) for v in self.exit_point],
            "trace": list(self.trace),
        }


def verify_certificate(cert: Certificate, domain: DomainSpec | None = None, fld: F.Field | None = None) -> bool:
    """Re-check a certificate from scratch: start inside, image outside.

    Linear certificates are pushed forward with mat_exp; others need the
    field and use the numeric integrator at a tight tolerance.
    """
    domain = _OMEGA if domain is None else domain
    z = np.asarray(cert.start, dtype=complex)
    try:
        if cert.matrix is not None:
            w = cxlinalg.mat_exp(cert.matrix, cert.t_exit) @ z
        elif fld is not None:
            w = F.flow(fld, cert.t_exit, z, tol=1e-12, method="numeric")
        else:
            return False
    except (Overflow, Diverged, StepUnderflow):
        return False
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
        return False
    return bool(domain.contains(z)) and not bool(domain.contains(w))


def _doubling(start: float = 1.0, cap: float = DOUBLING_CAP) -> Iterator[float]:
    x = start
    while x <= cap:
        yield x
        x *= 2.0


class _Builder:
    """Shared bookkeeping: the true matrix, a case label and a trace."""

    def __init__(self, A: np.ndarray, label: str, trace: list | None = None):
        self.A = A
        self.label = label
        self.trace = list(trace or [])
        self.trace.append(f"case {label}")

    def attempt(self, z, t_exit: float, **params) -> Certificate | None:
        z = np.asarray(z, dtype=complex)
        t = t_exit
        if not (t > 0 and math.isfinite(t) and np.all(np.isfinite(z))):
            return None
        cert = Certificate(matrix=self.A, start=z, t_exit=float(t), case_label=self.label, parameters=params)
        if not verify_certificate(cert):
            return None
        cert.exit_point = cxlinalg.mat_exp(self.A, t) @ z
        cert.verified = True
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in params.items())
        cert.trace = self.trace + [f"parameters: {shown}", f"start {_fmt_vec(z)} exits at t={t:.6g}"]
        return cert

    def fail(self, why: str):
        raise VerificationFailed(f"{self.label}: {why}")


def _fmt(v) -> str:
    if isinstance(v, complex):
        return f"{v.real:.6g}{v.imag:+.6g}j"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _fmt_vec(z) -> str:
    return "(" + ", ".join(_fmt(complex(x)) for x in z) + ")"


def _exp_ok(x: float) -> bool:
    return x < 700.0


# ---------------------------------------------------------------------------
# diagonal matrices


def _diagonal(A: np.ndarray, d1: complex, d2: complex, trace=None) -> Certificate:
    a1, b1 = d1.real, d1.imag
    a2 = d2.real
    if b1 != 0:
        b = _Builder(A, "diagonal.b1!=0", trace)
        t = math.pi / abs(b1)
        for p in _doubling():
            if not _exp_ok(a1 * t):
                break
            if a2 * t + p * math.exp(a1 * t) > 0:
                cert = b.attempt([-2 * p, 1.0], t, p=p)
                if cert:
                    return cert
        b.fail("p doubling exhausted")
    if a1 < 0:
        b = _Builder(A, "diagonal.a1<0", trace)
        t = 1.0
        p = 2 * abs(d2) / (1 - math.exp(a1))
        lo = p * math.exp(a1) + abs(a2)
        z2 = math.exp(0.5 * (lo + p))
        cert = b.attempt([-2 * p, z2], t, p=p, z2=z2, bracket_low=lo, bracket_high=p)
        if cert:
            return cert
        b.fail("bracket midpoint did not exit")
    b = _Builder(A, "diagonal.a1>0", trace)
    for k in range(-10, 60):
        t = 2.0**k
        if not _exp_ok(a1 * t):
            break
        if math.exp(a1 * t) + a2 * t - 2 > 0:
            cert = b.attempt([2.0, math.exp(-2.0)], t)
            if cert:
                return cert
    b.fail("no grid time satisfied the exit inequality")


def refute_diagonal(d1: complex, d2: complex) -> Certificate:
    """Certificate for A = diag(d1, d2).

    Examples
    --------
    >>> c = refute_diagonal(1j, 1)
    >>> c.case_label, c.start.tolist(), round(c.t_exit, 12)
    ('diagonal.b1!=0', [(-2+0j), (1+0j)], 3.14159265359)
    """
    d1, d2 = complex(d1), complex(d2)
    if d1 * d2 == 0:
        raise HypothesisViolated("diagonal entries must be nonzero (invertible matrix)")
    return _diagonal(np.diag([d1, d2]), d1, d2)


# ---------------------------------------------------------------------------
# Jordan block [[lam, 1], [0, lam]]


def _jordan(A: np.ndarray, lam: complex, trace=None) -> Certificate:
    l1, l2 = lam.real, lam.imag
    if l2 != 0:
        b = _Builder(A, "triangular.lambda2!=0", trace)
        t = math.pi / abs(l2)
        if not _exp_ok(l1 * t):
            b.fail("exp(lambda1 t) out of range")
        e = math.exp(l1 * t)
        for p in _doubling():
            if l1 * t - t * e / 2 + p * e > 0:
                cert = b.attempt([-2 * p, 1.0], t, p=p)
                if cert:
                    return cert
        b.fail("p doubling exhausted")
    if l1 > 0:
        b = _Builder(A, "triangular.lambda1>0", trace)
        for t in _doubling(cap=T_MAX * 64):
            if not _exp_ok(l1 * t) or not _exp_ok(l1 * t + 0.25 * t * math.exp(l1 * t)):
                break
            if l1 * t + 0.25 * t * math.exp(l1 * t) > math.log(2):
                cert = b.attempt([0.0, 0.5], t)
                if cert:
                    return cert
        b.fail("t doubling exhausted")
    b = _Builder(A, "triangular.lambda1<0", trace)
    k = -l1
    for t1 in _doubling():
        if not _exp_ok(k * t1):
            break
        ek = math.exp(k * t1)
        if math.log(2) + t1 * (k - ek) < 0:
            cert = b.attempt([-2 * t1 * ek, 2 * ek], t1, k=k, t1=t1)
            if cert:
                return cert
    b.fail("t1 doubling exhausted")


def refute_upper_triangular(lam: complex) -> Certificate:
    """Certificate for the Jordan block [[lam, 1], [0, lam]].

    Examples
    --------
    >>> c = refute_upper_triangular(-1)
    >>> c.case_label, c.t_exit
    ('triangular.lambda1<0', 1.0)
    """
    lam = complex(lam)
    if lam == 0:
        raise HypothesisViolated("lambda must be nonzero (invertible matrix)")
    return _jordan(np.array([[lam, 1], [0, lam]], dtype=complex), lam)


# ---------------------------------------------------------------------------
# distinct eigenvalues, upper triangular: A = [[up, s], [0, lo]]


def _triangular_distinct(A: np.ndarray, trace=None) -> Certificate:
    up, s, lo = complex(A[0, 0]), complex(A[0, 1]), complex(A[1, 1])
    # flow: w1 = e^{up t} z1 + kappa (e^{up t} - e^{lo t}) z2,  w2 = e^{lo t} z2
    kappa = s / (up - lo)
    ak = abs(kappa)
    a1, b1 = lo.real, lo.imag
    a2, b2 = up.real, up.imag
    trace = list(trace or []) + [f"kappa = s/(up - lo) = {_fmt(kappa)}"]

    def gap(t):
        return cmath.exp(up * t) - cmath.exp(lo * t)

    if a1 > 0:
        b = _Builder(A, "conjugated.diagonalizable.ac=0.sub1", trace)
        for t1 in _doubling(2.0**-6):
            if not _exp_ok(a1 * t1):
                break
            E = gap(t1)
            if math.exp(a1 * t1) / 2 > 1 and abs(kappa * E) > 0:
                z2 = 0.5j * (kappa * E).conjugate() / abs(kappa * E)
                cert = b.attempt([0.0, z2], t1, t1=t1)
                if cert:
                    return cert
        b.fail("t1 doubling exhausted")

    if a1 == 0 and b2 == 0 and a2 > 0:
        b = _Builder(A, "conjugated.diagonalizable.ac=0.sub2", trace)
        b.trace.append("bracket read as max(0, log|kappa|) < p < |kappa|^2 / 2")
        p = 0.5 * (max(0.0, math.log(ak)) + ak * ak / 2)
        for m in _doubling():
            t = (2 * m + 1) * math.pi / abs(b1)
            if not _exp_ok(a2 * t):
                break
            if (p - ak * ak / 2) * math.exp(a2 * t) - ak * ak / 2 < math.log(ak):
                cert = b.attempt([-2 * p, kappa.conjugate()], t, p=p, m=m)
                if cert:
                    return cert
        b.fail("m doubling exhausted")

    if a1 == 0 and b2 == 0 and a2 < 0:
        b = _Builder(A, "conjugated.diagonalizable.ac=0.sub3", trace)
        q = max(1.0, 2.0 / ak)
        p = math.log(q * ak) + 1.0
        for m in _doubling():
            t = (2 * m + 1) * math.pi / abs(b1)
            re_w1 = -2 * p * math.exp(a2 * t) + q * ak * ak * (math.exp(a2 * t) + 1)
            if math.log(q * ak) > -re_w1 / 2:
                cert = b.attempt([-2 * p, q * kappa.conjugate()], t, p=p, q=q, m=m)
                if cert:
                    return cert
        b.fail("m doubling exhausted")

    if a1 == 0:
        b = _Builder(A, "conjugated.diagonalizable.ac=0.sub4", trace)
        t1 = math.pi / abs(b2)
        if not _exp_ok(abs(a2) * t1):
            b.fail("exp(a2 t1) out of range")
        e = math.exp(a2 * t1)
        for p in _doubling():
            if ak < math.exp(min(p, 700.0)) and -p * e + ak * ak * (e + math.cos(b1 * t1)) / 2 < math.log(ak):
                cert = b.attempt([-2 * p, kappa.conjugate()], t1, p=p, t1=t1)
                if cert:
                    return cert
        b.fail("p doubling exhausted")

    L = -a1
    if b2 != 0:
        b = _Builder(A, "conjugated.diagonalizable.ac=0.sub5", trace)
        t1 = math.pi / abs(b2)
        E = gap(t1)
        if abs(E) == 0 or not _exp_ok(abs(a2) * t1):
            b.fail("degenerate exit time")
        z2 = (1 / kappa) * ak * E.conjugate() * 1j / abs(E)
        for p in _doubling():
            if p * math.exp(a2 * t1) > L * t1:
                cert = b.attempt([-2 * p, z2], t1, p=p, t1=t1)
                if cert:
                    return cert
        b.fail("p doubling exhausted")

    if a2 > 0:
        b = _Builder(A, "conjugated.diagonalizable.ac=0.sub6", trace)
        M = 2 * ak
        z2 = kappa.conjugate() / M
        for m in _doubling():
            t = m if b1 == 0 else 2 * m * math.pi / abs(b1)
            if not _exp_ok(a2 * t):
                break
            re_w1 = (kappa * gap(t) * z2).real
            if re_w1 > 3:
                cert = b.attempt([0.0, z2], t, M=M, m=m)
                if cert:
                    return cert
        b.fail("t doubling exhausted")

    b = _Builder(A, "conjugated.diagonalizable.ac=0.sub7", trace)
    L1 = -a2
    beta = L1 / 2
    if L <= L1:
        b.trace.append("L <= L1: z2 phase aligned with kappa (e^{up t} - e^{lo t}), odd multiples of pi/|b1|")
    for m in _doubling():
        if b1 == 0:
            t1 = m
        elif L > L1:
            t1 = 2 * m * math.pi / abs(b1)
        else:
            t1 = (2 * m + 1) * math.pi / abs(b1)
        if not _exp_ok(2 * L * t1) or not _exp_ok(beta * t1):
            break
        Q = gap(t1)
        if abs(Q) == 0:
            continue
        r = ak * math.exp(2 * L * t1)
        z2 = r * (kappa * Q).conjugate() / abs(kappa * Q)
        z1 = -2 * math.exp(beta * t1)
        if math.log(r) >= math.exp(beta * t1):
            continue
        cert = b.attempt([z1, z2], t1, beta=beta, t1=t1, m=m)
        if cert:
            return cert
    b.fail("t1 doubling exhausted")


# ---------------------------------------------------------------------------
# conjugates


def _diagonalizable_general(A: np.ndarray, d1: complex, d2: complex, P: np.ndarray, trace=None) -> Certificate:
    # A = P^{-1} diag(d1, d2) P
    a, bb, c, d = P[0, 0], P[0, 1], P[1, 0], P[1, 1]
    mu = a * d - bb * c
    b = _Builder(A, "conjugated.diagonalizable.ac!=0", trace)
    b.trace.append(f"P = [[{_fmt(complex(a))}, {_fmt(complex(bb))}], [{_fmt(complex(c))}, {_fmt(complex(d))}]], mu = {_fmt(complex(mu))}")
    for k in range(0, 40):
        t = 2.0**-k
        e1, e2 = cmath.exp(d1 * t), cmath.exp(d2 * t)
        if abs(e1 - e2) < 1e-12 * max(abs(e1), abs(e2)):
            continue
        G = a * d * e1 - bb * c * e2
        scale = abs(a * c) * abs(e1 - e2)
        if abs(G) > 0:
            z1 = 3 * mu * G.conjugate() * 1j / (scale * abs(G))
            if z1.real > 0:
                z1 = -z1
        else:
            z1 = -3 * abs(mu) / scale
        cert = b.attempt([z1, 0.0], t, mu=complex(mu))
        if cert:
            return cert
    b.fail("no admissible time")


def _jordan_factor(N: np.ndarray):
    """(c, d) with N = [[dc, d^2], [-c^2, -cd]] (mu = 1), for nilpotent N."""
    if N[1, 0] != 0:
        c = cmath.sqrt(-N[1, 0])
        d = N[0, 0] / c
    else:
        c = 0j
        d = cmath.sqrt(N[0, 1])
    return complex(c), complex(d)


def _jordan_general(A: np.ndarray, lam: complex, trace=None) -> Certificate:
    N = A - lam * np.eye(2)
    c, d = _jordan_factor(N)
    # with mu = 1: e^{tA} = e^{lam t} (I + t [[dc, d^2], [-c^2, -cd]])
    l1, l2 = lam.real, lam.imag
    trace = list(trace or []) + [f"N = A - lambda I factors with c = {_fmt(c)}, d = {_fmt(d)}, mu = 1"]
    if c != 0:
        b = _Builder(A, "conjugated.triangularizable.c!=0", trace)
        for t1 in _doubling(2.0**-6):
            if not _exp_ok(abs(l1) * t1):
                break
            g = 1 + t1 * d * c
            if t1 * abs(c) ** 2 * abs(g) > 1:
                z1 = cmath.exp(-lam * t1) * g.conjugate() * 1j
                if z1.real > 0:
                    z1 = -z1
                cert = b.attempt([z1, 0.0], t1, t1=t1)
                if cert:
                    return cert
        b.fail("t1 doubling exhausted")
    s = d * d
    inv = 1 / s
    if l2 != 0:
        b = _Builder(A, "conjugated.triangularizable.c=0.lambda2!=0", trace)
        t1 = math.pi / abs(l2)
        if not _exp_ok(abs(l1) * t1):
            b.fail("exp(lambda1 t1) out of range")
        e = math.exp(l1 * t1)
        for p in _doubling():
            if abs(inv) < math.exp(min(p, 700.0)) and l1 * t1 - math.log(abs(s)) + e * (p - t1 / 2) > 0:
                cert = b.attempt([-2 * p, inv], t1, p=p, t1=t1)
                if cert:
                    return cert
        b.fail("p doubling exhausted")
    if l1 < 0:
        b = _Builder(A, "conjugated.triangularizable.c=0.lambda1<0", trace)
        k = -l1
        for t1 in _doubling(2.0**-6):
            if not _exp_ok(k * t1) or not _exp_ok(2 * k * t1):
                break
            ek = math.exp(k * t1)
            inside = math.log(abs(inv)) + 2 * k * t1 - ek / 2 < 0
            exits = math.log(abs(inv)) + k * t1 + 0.5 * (t1 * ek) - 0.5 > 0
            if inside and exits:
                cert = b.attempt([-ek, inv * ek * ek], t1, t1=t1, k=k)
                if cert:
                    return cert
        b.fail("t1 doubling exhausted")
    b = _Builder(A, "conjugated.triangularizable.c=0.lambda1>0", trace)
    p = max(1.0, math.log(abs(inv)) + 1.0)
    for t1 in _doubling(2.0**-6):
        if not _exp_ok(l1 * t1):
            break
        if math.log(abs(inv)) + l1 * t1 - math.exp(l1 * t1) * (p - t1 / 2) > 0:
            cert = b.attempt([-2 * p, inv], t1, p=p, t1=t1)
            if cert:
                return cert
    b.fail("t1 doubling exhausted")


def _check_2x2(A) -> np.ndarray:
    M = cxlinalg.as_cmat(A)
    if M.shape != (2, 2):
        raise NonSquare(f"refutation is for 2x2 matrices, got shape {M.shape}")
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) <= 1e-14 * max(1.0, np.abs(M).max()) ** 2:
        raise HypothesisViolated("matrix is singular")
    return M


def _rounding_level_discriminant(M: np.ndarray) -> bool:
    # a defective pair splits by about sqrt(eps) |A| under rounding, which the
    # gap test alone would read as distinct
    half_tr = (M[0, 0] + M[1, 1]) / 2
    disc = (M[0, 0] - half_tr) ** 2 + M[0, 1] * M[1, 0]
    scale = max(abs(M[0, 0]), abs(M[1, 1]), abs(M[0, 1] * M[1, 0]) ** 0.5, 1e-300)
    return abs(disc) <= 64 * cxlinalg.EPS * scale * scale


def classify(A) -> dict:
    """Eigenstructure of a 2x2 matrix as used by the case dispatch."""
    M = _check_2x2(A)
    ev = cxlinalg.eigenvalues(M)
    nrm = cxlinalg.op_norm(M)
    info = {"eigenvalues": ev, "norm": nrm}
    if M[0, 1] == 0 and M[1, 0] == 0:
        info["kind"] = "diagonal"
    elif M[1, 0] == 0 and M[0, 1] == 1 and M[0, 0] == M[1, 1]:
        info["kind"] = "jordan"
    elif abs(ev[0] - ev[1]) < REPEAT_TOL * nrm or _rounding_level_discriminant(M):
        lam = complex(np.trace(M)) / 2
        info["lambda"] = lam
        info["kind"] = "scalar" if cxlinalg.op_norm(M - lam * np.eye(2)) <= REPEAT_TOL * nrm else "defective"
    elif M[1, 0] == 0:
        info["kind"] = "triangular"
    else:
        info["kind"] = "diagonalizable"
    return info


def refute_conjugated(A) -> Certificate:
    """Certificate for a 2x2 matrix reached by conjugation.

    Raises NearDefective when the eigenvector basis is too ill-conditioned
    for the explicit construction.
    """
    M = _check_2x2(A)
    info = classify(M)
    kind = info["kind"]
    trace = [f"classified as {kind}"]
    if kind == "diagonal":
        return _diagonal(M, complex(M[0, 0]), complex(M[1, 1]), trace)
    if kind == "jordan":
        return _jordan(M, complex(M[0, 0]), trace)
    if kind == "scalar":
        lam = info["lambda"]
        return _diagonal(M, lam, lam, trace + ["exp(tA) = exp(lambda t) I"])
    if kind == "defective":
        return _jordan_general(M, info["lambda"], trace)
    if kind == "triangular":
        return _triangular_distinct(M, trace)
    d1, d2 = info["eigenvalues"]
    Q = np.column_stack([cxlinalg.eigenvector(M, d1), cxlinalg.eigenvector(M, d2)])
    cond = np.linalg.cond(Q)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NearDefective(f"eigenvector basis condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    P = np.linalg.inv(Q)
    return _diagonalizable_general(M, complex(d1), complex(d2), P, trace)


# ---------------------------------------------------------------------------
# numeric search


def _slog(x):
    return np.sign(x) * np.log1p(np.abs(x))


def _sexp(u):
    return np.sign(u) * np.expm1(np.abs(u))


def numeric_exit_search(
    fld: F.Field,
    domain: DomainSpec,
    budget: int = 16,
    seed: int = 0,
    sweeps: int = 60,
) -> Certificate | None:
    """Multistart coordinate ascent for a point whose flow leaves the domain.

    Parameters are the signed-log real and imaginary parts of z together
    with log t, t in (0, 50]. The objective is the negative membership
    margin (the log margin when the domain provides one) at time t.
    budget is the number of starts.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = fld.n
    rng = np.random.default_rng(seed)
    starts = domain.sample(budget, seed=seed)
    margin = domain.aux_margins.get("log", domain.margin)
    linear = fld.spec is not None and "linear" in fld.spec
    A = fld.linearization if linear else None

    def push(z, t):
        if linear:
            return cxlinalg.mat_exp(A, t) @ z
        return F.flow(fld, t, z)

    def objective(u):
        z = _sexp(u[0 : 2 * n : 2]) + 1j * _sexp(u[1 : 2 * n : 2])
        t = min(T_MAX, math.exp(u[-1]))
        if not domain.contains(z):
            return -np.inf, z, t
        try:
            with np.errstate(all="ignore"):
                m = float(margin(push(z, t)))
        except (Overflow, Diverged, StepUnderflow):
            return -np.inf, z, t
        return (-m if np.isfinite(m) else -np.inf), z, t

    for z0 in starts:
        u = np.empty(2 * n + 1)
        u[0 : 2 * n : 2] = _slog(z0.real)
        u[1 : 2 * n : 2] = _slog(z0.imag)
        u[-1] = rng.uniform(math.log(0.05), math.log(T_MAX))
        best, z, t = objective(u)
        step = 0.5
        for _ in range(sweeps):
            if best > 0:
                break
            improved = False
            for i in range(len(u)):
                for sgn in (1.0, -1.0):
                    v = u.copy()
                    v[i] += sgn * step
                    if i == len(u) - 1:
                        v[i] = min(v[i], math.log(T_MAX))
                    val, zz, tt = objective(v)
                    if val > best:
                        u, best, z, t = v, val, zz, tt
                        improved = True
                        break
            if not improved:
                step /= 2
                if step < 1e-3:
                    break
        if best > 0:
            cert = Certificate(
                matrix=A,
                start=np.asarray(z, dtype=complex),
                t_exit=float(t),
                case_label="numeric",
                parameters={"seed": seed, "budget": budget},
                field_name=fld.name,
            )
            if verify_certificate(cert, domain, fld):
                cert.verified = True
                cert.exit_point = push(cert.start, cert.t_exit)
                cert.trace = ["case numeric", f"start {_fmt_vec(cert.start)} exits at t={cert.t_exit:.6g}"]
                return cert
    return None


def refute_any(A, budget: int = 32, seed: int = 0) -> Certificate:
    """Dispatch to the constructive recipes; fall back to numeric search."""
    M = _check_2x2(A)
    why = None
    try:
        return refute_conjugated(M)
    except (VerificationFailed, NearDefective, Overflow) as exc:
        why = str(exc)
    cert = numeric_exit_search(F.linear_field(M), _OMEGA, budget=budget, seed=seed)
    if cert is None:
        raise SearchExhausted(f"no exit found: constructive step said {why!r}; numeric search used {budget} starts")
    cert.trace.insert(0, f"constructive recipe failed: {why}")
    return cert


# ---------------------------------------------------------------------------
# battery


def _rand_c(rng, lo=0.3, hi=2.5) -> complex:
    r = rng.uniform(lo, hi)
    return complex(r * cmath.exp(1j * rng.uniform(0, 2 * math.pi)))


def _rand_r(rng, lo=0.3, hi=2.5) -> float:
    return float(rng.uniform(lo, hi))


def _sign(rng) -> float:
    return 1.0 if rng.uniform() < 0.5 else -1.0


def _well_conditioned(rng) -> np.ndarray:
    while True:
        P = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        if np.linalg.cond(P) < 20 and abs(P[0, 0] * P[1, 0]) > 0.05:
            return P


def _battery_member(kind: str, rng) -> np.ndarray:
    r, c = _rand_r, _rand_c
    if kind == "diagonal.b1!=0":
        return np.diag([complex(_sign(rng) * r(rng), _sign(rng) * r(rng)), c(rng)])
    if kind == "diagonal.a1<0":
        return np.diag([-r(rng) + 0j, c(rng)])
    if kind == "diagonal.a1>0":
        return np.diag([r(rng) + 0j, c(rng)])
    if kind == "triangular.lambda2!=0":
        lam = complex(_sign(rng) * r(rng), _sign(rng) * r(rng))
        return np.array([[lam, 1], [0, lam]])
    if kind == "triangular.lambda1>0":
        lam = r(rng) + 0j
        return np.array([[lam, 1], [0, lam]])
    if kind == "triangular.lambda1<0":
        lam = -r(rng) + 0j
        return np.array([[lam, 1], [0, lam]])
    if kind == "conjugated.diagonalizable.ac!=0":
        P = _well_conditioned(rng)
        D = np.diag([c(rng), c(rng)])
        return np.linalg.inv(P) @ D @ P
    if kind.startswith("conjugated.diagonalizable.ac=0"):
        sub = kind.rsplit(".", 1)[1]
        b1 = _sign(rng) * r(rng)
        if sub == "sub1":
            lo, up = complex(r(rng), b1), c(rng)
        elif sub == "sub2":
            lo, up = complex(0, b1), complex(r(rng), 0)
        elif sub == "sub3":
            lo, up = complex(0, b1), complex(-r(rng), 0)
        elif sub == "sub4":
            lo, up = complex(0, b1), complex(_sign(rng) * r(rng), _sign(rng) * r(rng))
        elif sub == "sub5":
            lo, up = complex(-r(rng), b1), complex(_sign(rng) * r(rng), _sign(rng) * r(rng))
        elif sub == "sub6":
            lo = complex(-r(rng), b1 if rng.uniform() < 0.5 else 0.0)
            up = complex(r(rng), 0)
        else:
            lo = complex(-r(rng), b1 if rng.uniform() < 0.5 else 0.0)
            up = complex(-r(rng), 0)
        return np.array([[up, c(rng)], [0, lo]])
    if kind == "conjugated.triangularizable.c!=0":
        lam = c(rng)
        cc, dd = c(rng, 0.3, 1.5), c(rng, 0.3, 1.5)
        N = np.array([[dd * cc, dd * dd], [-cc * cc, -cc * dd]])
        return lam * np.eye(2) + N
    if kind.startswith("conjugated.triangularizable.c=0"):
        if kind.endswith("lambda2!=0"):
            lam = complex(_sign(rng) * r(rng), _sign(rng) * r(rng))
        elif kind.endswith("lambda1<0"):
            lam = complex(-r(rng), 0)
        else:
            lam = complex(r(rng), 0)
        s = c(rng)
        while abs(s - 1) < 0.1:
            s = c(rng)
        return np.array([[lam, s], [0, lam]])
    raise ValueError(f"unknown battery kind {kind!r}")


def battery(count: int = 200, seed: int = 0) -> list[tuple[str, np.ndarray]]:
    """Seeded random invertible 2x2 matrices cycling through every case label.

    Every fifth slot is a plain Gaussian matrix instead, which lands in the
    generic conjugated branch.
    """
    rng = np.random.default_rng(seed)
    out = []
    i = 0
    while len(out) < count:
        if i % 5 == 4:
            kind = "gaussian"
            M = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        else:
            kind = CASE_LABELS[(i - i // 5) % len(CASE_LABELS)]
            M = _battery_member(kind, rng)
        i += 1
        M = np.asarray(M, dtype=complex)
        if abs(np.linalg.det(M)) < 1e-3:
            continue
        out.append((kind, M))
    return out
