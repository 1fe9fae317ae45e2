"""Dense complex linear algebra for small matrices.

Eigenvalues come from a Householder-Hessenberg reduction followed by a
single-shift complex QR iteration. The matrix exponential uses the degree 13
Pade approximant with scaling and squaring. Both are written here rather than
borrowed so that tests can compare them against numpy/scipy independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, InvalidGrid, MissingInput, NonSquare, Overflow

EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# construction and serialization


def as_cmat(A) -> np.ndarray:
    """Coerce A (array-like, nested list, or JSON dict) to a complex square array."""
    if isinstance(A, dict):
        return cmat_from_json(A)
    M = np.array(A, dtype=complex)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {M.shape}")
    return M


def cmat_to_json(A) -> dict:
    M = as_cmat(A)
    return {
        "n": int(M.shape[0]),
        "entries": [[float(v.real), float(v.imag)] for v in M.ravel()],
    }


def cmat_from_json(obj: dict) -> np.ndarray:
    n = int(obj["n"])
    entries = obj["entries"]
    if n < 1 or len(entries) != n * n:
        raise NonSquare(f"entries length {len(entries)} does not match n={n}")
    vals = [complex(e[0], e[1]) if isinstance(e, (list, tuple)) else complex(e) for e in entries]
    return np.array(vals, dtype=complex).reshape(n, n)


# ---------------------------------------------------------------------------
# eigenvalues


def _eig2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]], ordered so the first has the larger modulus."""
    m = 0.5 * (a + d)
    s = np.sqrt(0.25 * (a - d) ** 2 + b * c + 0j)
    l1 = m + s if abs(m + s) >= abs(m - s) else m - s
    det = a * d - b * c
    l2 = det / l1 if l1 != 0 else m - (l1 - m)
    return complex(l1), complex(l2)


def hessenberg(A) -> np.ndarray:
    """Upper Hessenberg form of A via Householder reflections (similarity)."""
    H = as_cmat(A).copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H


def _givens(a, b):
    """(c, s) with [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]."""
    r = math.hypot(abs(a), abs(b))
    if r == 0.0:
        return 1.0, 0j
    if a == 0:
        return 0.0, 1.0 + 0j
    return abs(a) / r, (a / abs(a)) * b.conjugate() / r


def _hqr(H: np.ndarray, max_sweeps: int) -> list[complex]:
    n = H.shape[0]
    eigs = [0j] * n
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            eigs[0] = complex(H[0, 0])
            break
        # locate the start of the trailing unreduced block
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if s == 0.0:
                s = np.abs(H).sum()
            if abs(H[lo, lo - 1]) <= EPS * s:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eigs[hi] = complex(H[hi, hi])
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            l1, l2 = _eig2(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
            eigs[hi - 1], eigs[hi] = l1, l2
            hi -= 2
            its = 0
            continue
        its += 1
        total += 1
        if total > max_sweeps:
            raise ConvergenceFailure(f"QR iteration did not converge in {max_sweeps} sweeps")
        if its % 11 == 0:
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])  # exceptional shift
        else:
            l1, l2 = _eig2(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
            mu = l1 if abs(l1 - H[hi, hi]) < abs(l2 - H[hi, hi]) else l2
        # one shifted QR sweep on H[lo:hi+1, lo:hi+1] by Givens rotations
        rots = []
        for k in range(lo, hi + 1):
            H[k, k] -= mu
        for k in range(lo, hi):
            c, s = _givens(H[k, k], H[k + 1, k])
            G = np.array([[c, s], [-s.conjugate(), c]])
            H[k : k + 2, k:] = G @ H[k : k + 2, k:]
            rots.append((k, G))
        for k, G in rots:
            H[:, k : k + 2] = H[:, k : k + 2] @ G.conj().T
        for k in range(lo, hi + 1):
            H[k, k] += mu
    return eigs


def eigenvalues(A) -> list[complex]:
    """All eigenvalues of a small complex matrix, with multiplicity.

    Triangular input returns its diagonal exactly; n <= 2 uses the quadratic
    formula; larger matrices go through Hessenberg + shifted QR.
    """
    M = as_cmat(A)
    n = M.shape[0]
    if not np.all(np.isfinite(M)):
        raise ConvergenceFailure("matrix has non-finite entries")
    if n == 1 or not np.any(np.tril(M, -1)) or not np.any(np.triu(M, 1)):
        return [complex(v) for v in np.diag(M)]
    if n == 2:
        return list(_eig2(M[0, 0], M[0, 1], M[1, 0], M[1, 1]))
    return _hqr(hessenberg(M), max_sweeps=60 * n)


def eigenvector(A, lam: complex, iterations: int = 3) -> np.ndarray:
    """Unit eigenvector for the eigenvalue lam by inverse iteration."""
    M = as_cmat(A)
    n = M.shape[0]
    scale = max(np.abs(M).max(), 1.0)
    shift = lam + 1e-10 * scale
    B = M - shift * np.eye(n)
    v = np.ones(n, dtype=complex) / math.sqrt(n)
    for _ in range(iterations):
        try:
            w = np.linalg.solve(B, v)
        except np.linalg.LinAlgError:
            B = M - (lam + 1e-8 * scale) * np.eye(n)
            w = np.linalg.solve(B, v)
        v = w / np.linalg.norm(w)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


# ---------------------------------------------------------------------------
# matrix exponential

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152
_MAX_SQUARINGS = 1100


def mat_exp(A, t: complex = 1.0) -> np.ndarray:
    """e^{tA} by scaling and squaring with the [13/13] Pade approximant."""
    M = as_cmat(A) * t
    n = M.shape[0]
    ident = np.eye(n, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise Overflow("non-finite entries in tA")
    norm1 = np.abs(M).sum(axis=0).max()
    if norm1 == 0.0:
        return ident
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA13))))
    if s > _MAX_SQUARINGS:
        raise Overflow(f"||tA||_1 = {norm1:.3g} needs {s} squarings")
    M = M / 2.0**s
    b = _PADE13
    M2 = M @ M
    M4 = M2 @ M2
    M6 = M4 @ M2
    U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2) + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
    V = M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2) + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    if not np.all(np.isfinite(E)):
        raise Overflow("matrix exponential overflowed during squaring")
    return E


# ---------------------------------------------------------------------------
# spectral functionals


def op_norm(A) -> float:
    """Spectral norm (largest singular value)."""
    return float(np.linalg.norm(as_cmat(A), 2))


@dataclass(frozen=True)
class SpectralSummary:
    eigenvalues: tuple
    k_plus: float
    k_minus: float
    m_lower: float

    def to_json(self) -> dict:
        return {
            "eigenvalues": [[v.real, v.imag] for v in self.eigenvalues],
            "k_plus": self.k_plus,
            "k_minus": self.k_minus,
            "m_lower": self.m_lower,
        }


def spectral_summary(A) -> SpectralSummary:
    M = as_cmat(A)
    eigs = eigenvalues(M)
    re = [v.real for v in eigs]
    herm = 0.5 * (M + M.conj().T)
    m_lower = min(v.real for v in eigenvalues(herm))
    return SpectralSummary(tuple(eigs), max(re), min(re), m_lower)


@dataclass(frozen=True)
class GrowthConstants:
    epsilon: float
    rho: float
    m_eps: float
    t_horizon: float
    grid_step: float
    rho_argmax: float = 0.0
    m_eps_argmax: float = 0.0
    tail_exponent: float = 0.0
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "rho": self.rho,
            "m_eps": self.m_eps,
            "t_horizon": self.t_horizon,
            "grid_step": self.grid_step,
            "rho_argmax": self.rho_argmax,
            "m_eps_argmax": self.m_eps_argmax,
            "tail_exponent": self.tail_exponent,
        }


def _exp_on_grid(A: np.ndarray, step: float, count: int, reanchor: int = 64) -> np.ndarray:
    """Stack of e^{k*step*A} for k = 0..count-1 (products re-anchored periodically)."""
    n = A.shape[0]
    out = np.empty((count, n, n), dtype=complex)
    E1 = mat_exp(A, step)
    cur = np.eye(n, dtype=complex)
    for k in range(count):
        if k % reanchor == 0:
            cur = mat_exp(A, k * step)
        out[k] = cur
        cur = cur @ E1
    return out


def growth_constants(A, epsilon: float, t_horizon: float = 50.0, grid_step: float = 1e-2) -> GrowthConstants:
    """Grid-certified constants rho(eps), m(eps) of the exponential bounds.

    rho = max_t ||e^{-tA}|| e^{(k_- - eps)t} and m = max_t ||e^{tA}|| e^{-(k_+ + eps)t}
    over t = 0, step, ..., horizon, both clamped below by 1.
    """
    if not (epsilon > 0):
        raise InvalidGrid("epsilon must be positive")
    if not (t_horizon > 0) or not (grid_step > 0) or grid_step > t_horizon:
        raise InvalidGrid("need 0 < grid_step <= t_horizon")
    M = as_cmat(A)
    summ = spectral_summary(M)
    count = int(math.floor(t_horizon / grid_step + 1e-9)) + 1
    ts = np.arange(count) * grid_step
    neg = np.linalg.norm(_exp_on_grid(-M, grid_step, count), ord=2, axis=(1, 2))
    pos = np.linalg.norm(_exp_on_grid(M, grid_step, count), ord=2, axis=(1, 2))
    rho_curve = neg * np.exp((summ.k_minus - epsilon) * ts)
    m_curve = pos * np.exp(-(summ.k_plus + epsilon) * ts)
    i_r = int(np.argmax(rho_curve))
    i_m = int(np.argmax(m_curve))
    return GrowthConstants(
        epsilon=float(epsilon),
        rho=max(1.0, float(rho_curve[i_r])),
        m_eps=max(1.0, float(m_curve[i_m])),
        t_horizon=float(ts[-1]),
        grid_step=float(grid_step),
        rho_argmax=float(ts[i_r]),
        m_eps_argmax=float(ts[i_m]),
        # both curves behave like poly(t)*e^{-eps t} beyond the grid
        tail_exponent=-float(epsilon),
        details={"rho_at_horizon": float(rho_curve[-1]), "m_eps_at_horizon": float(m_curve[-1])},
    )


CHECK_NAMES = ("decay_spectral", "spectral_gap", "numerical_range", "product")


def condition_checks(A, alpha=None, B=None, alphas=None, checks=None) -> dict:
    """Evaluate the spectral hypotheses that apply to the given inputs.

    decay_spectral: 2*alpha + k_-(A) > 0.
    spectral_gap: 2*k_+(A) < k_-(A).
    numerical_range: k_+(A) < 2*m(A) with m(A) > 0.
    product: min(alpha1, alpha2) > max(-k_-(A)/2, -k_-(B)/2).

    With checks=None every check whose inputs are present runs; naming a
    check whose inputs are missing raises MissingInput.
    """
    sa = spectral_summary(A)
    available = {"spectral_gap", "numerical_range"}
    if alpha is not None:
        available.add("decay_spectral")
    if B is not None and alphas is not None:
        available.add("product")
    if checks is None:
        wanted = [c for c in CHECK_NAMES if c in available]
    else:
        wanted = list(checks)
        for c in wanted:
            if c not in CHECK_NAMES:
                raise MissingInput(f"unknown check {c!r}")
            if c not in available:
                raise MissingInput(f"check {c!r} needs inputs that were not supplied")
    out = {"spectrum": sa.to_json(), "checks": {}}
    res = out["checks"]
    if "decay_spectral" in wanted:
        margin = 2.0 * float(alpha) + sa.k_minus
        res["decay_spectral"] = {"pass": margin > 0, "margin": margin, "value": margin}
    if "spectral_gap" in wanted:
        margin = sa.k_minus - 2.0 * sa.k_plus
        res["spectral_gap"] = {"pass": margin > 0, "margin": margin, "two_k_plus": 2 * sa.k_plus, "k_minus": sa.k_minus}
    if "numerical_range" in wanted:
        m1 = 2.0 * sa.m_lower - sa.k_plus
        m2 = sa.m_lower
        res["numerical_range"] = {"pass": m1 > 0 and m2 > 0, "margin": min(m1, m2), "m_lower": sa.m_lower}
    if "product" in wanted:
        sb = spectral_summary(B)
        a1, a2 = alphas
        margin = min(a1, a2) - max(-sa.k_minus / 2.0, -sb.k_minus / 2.0)
        res["product"] = {"pass": margin > 0, "margin": margin}
    out["all_pass"] = all(v["pass"] for v in res.values())
    return out
