"""Words in shears, overshears and affine maps of C^n.

A shear is (z', z_n) -> (z', z_n + f(z')) and an overshear is
(z', z_n) -> (z', exp(f(z')) z_n), with f a polynomial in z' = (z_1, ...,
z_{n-1}). Either may be conjugated by an invertible linear map C, giving
z -> C^{-1} sigma(C z). Words apply their letters left to right.

Linear data is stored together with its inverse so that inverting a word
twice returns the identical word.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, DimensionMismatch, OddDimension
from .fields import fd_jacobian

MAX_DEGREE = 16


def _cnum(x) -> list:
    x = complex(x)
    return [x.real, x.imag]


def _c(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _freeze(M) -> tuple:
    M = np.asarray(M, dtype=complex)
    return tuple(tuple(complex(x) for x in row) for row in M)


# ---------------------------------------------------------------------------
# polynomials in z'


@dataclass(frozen=True)
class Poly:
    """Sparse polynomial: ((exponent tuple, coefficient), ...) sorted by exponent."""

    nvars: int
    terms: tuple

    @classmethod
    def from_dict(cls, nvars: int, table: dict) -> "Poly":
        terms = []
        for exps, coeff in table.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars or min(exps, default=0) < 0:
                raise ConfigError(f"bad exponent tuple {exps} for {nvars} variables")
            if sum(exps) > MAX_DEGREE:
                raise ConfigError(f"degree {sum(exps)} exceeds the cap {MAX_DEGREE}")
            if complex(coeff) != 0:
                terms.append((exps, complex(coeff)))
        return cls(nvars, tuple(sorted(terms)))

    def __call__(self, zp: np.ndarray) -> np.ndarray:
        zp = np.asarray(zp, dtype=complex)
        out = np.zeros(zp.shape[:-1], dtype=complex)
        for exps, coeff in self.terms:
            term = np.full(zp.shape[:-1], coeff, dtype=complex)
            for k, e in enumerate(exps):
                if e:
                    term = term * zp[..., k] ** e
            out = out + term
        return out

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, tuple((e, -c) for e, c in self.terms))

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def to_json(self) -> list:
        return [[list(e), _cnum(c)] for e, c in self.terms]

    @classmethod
    def from_json(cls, nvars: int, obj) -> "Poly":
        return cls.from_dict(nvars, {tuple(e): _c(c) for e, c in obj})


# ---------------------------------------------------------------------------
# letters


@dataclass(frozen=True)
class Linear:
    """An invertible matrix paired with its inverse."""

    matrix: tuple
    inverse: tuple

    @classmethod
    def of(cls, M) -> "Linear":
        M = np.asarray(M, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionMismatch("conjugation must be a square matrix")
        if np.linalg.cond(M) > 1e12:
            raise ConfigError("conjugation matrix is not invertible")
        return cls(_freeze(M), _freeze(np.linalg.inv(M)))

    @property
    def M(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex)

    @property
    def Minv(self) -> np.ndarray:
        return np.array(self.inverse, dtype=complex)

    def swapped(self) -> "Linear":
        return Linear(self.inverse, self.matrix)

    def to_json(self) -> dict:
        return {"matrix": [[_cnum(x) for x in r] for r in self.matrix], "inverse": [[_cnum(x) for x in r] for r in self.inverse]}

    @classmethod
    def from_json(cls, obj) -> "Linear":
        if isinstance(obj, dict) and "inverse" in obj:
            return cls(_freeze([[_c(x) for x in r] for r in obj["matrix"]]), _freeze([[_c(x) for x in r] for r in obj["inverse"]]))
        M = obj["matrix"] if isinstance(obj, dict) else obj
        return cls.of([[_c(x) for x in r] for r in M])


@dataclass(frozen=True)
class Shear:
    f: Poly
    conj: Linear | None = None


@dataclass(frozen=True)
class Overshear:
    f: Poly
    conj: Linear | None = None


@dataclass(frozen=True)
class Affine:
    """z -> M z + b, stored with the inverse pair (M^{-1}, -M^{-1} b)."""

    lin: Linear
    offset: tuple
    inv_offset: tuple

    @classmethod
    def of(cls, M, b) -> "Affine":
        lin = Linear.of(M)
        b = np.asarray(b, dtype=complex)
        return cls(lin, tuple(complex(x) for x in b), tuple(complex(x) for x in -(lin.Minv @ b)))


Letter = Union[Shear, Overshear, Affine]


def _letter_dim(letter) -> int:
    if isinstance(letter, Affine):
        return len(letter.offset)
    return letter.f.nvars + 1


def _apply_core(letter, z: np.ndarray, sign: int = 1) -> np.ndarray:
    w = np.array(z, dtype=complex)
    f = letter.f(z[..., :-1])
    if isinstance(letter, Shear):
        w[..., -1] = z[..., -1] + sign * f
    else:
        w[..., -1] = np.exp(sign * f) * z[..., -1]
    return w


def letter_eval(letter, z: np.ndarray) -> np.ndarray:
    if isinstance(letter, Affine):
        return z @ letter.lin.M.T + np.array(letter.offset)
    if letter.conj is None:
        return _apply_core(letter, z)
    C = letter.conj
    return _apply_core(letter, z @ C.M.T) @ C.Minv.T


def letter_invert(letter):
    if isinstance(letter, Affine):
        return Affine(letter.lin.swapped(), letter.inv_offset, letter.offset)
    return type(letter)(-letter.f, letter.conj)


def letter_det(letter, z: np.ndarray) -> np.ndarray:
    if isinstance(letter, Affine):
        return np.full(z.shape[:-1], np.linalg.det(letter.lin.M), dtype=complex)
    if isinstance(letter, Shear):
        return np.ones(z.shape[:-1], dtype=complex)
    y = z if letter.conj is None else z @ letter.conj.M.T
    return np.exp(letter.f(y[..., :-1]))


# ---------------------------------------------------------------------------
# words


@dataclass(frozen=True)
class Word:
    n: int
    letters: tuple

    def __post_init__(self):
        for letter in self.letters:
            if _letter_dim(letter) != self.n:
                raise DimensionMismatch(f"letter of dimension {_letter_dim(letter)} in a word on C^{self.n}")

    def __matmul__(self, other: "Word") -> "Word":
        """self @ other applies other first, then self."""
        if other.n != self.n:
            raise DimensionMismatch("words live in different dimensions")
        return Word(self.n, other.letters + self.letters)

    def __call__(self, z):
        return word_eval(self, z)

    @property
    def pure_shear(self) -> bool:
        return all(isinstance(x, Shear) for x in self.letters)

    def to_json(self) -> dict:
        out = []
        for x in self.letters:
            if isinstance(x, Affine):
                out.append(
                    {
                        "kind": "affine",
                        "linear": x.lin.to_json(),
                        "offset": [_cnum(v) for v in x.offset],
                        "inv_offset": [_cnum(v) for v in x.inv_offset],
                    }
                )
            else:
                out.append(
                    {
                        "kind": "shear" if isinstance(x, Shear) else "overshear",
                        "f": x.f.to_json(),
                        "conj": None if x.conj is None else x.conj.to_json(),
                    }
                )
        return {"n": self.n, "letters": out}

    @classmethod
    def from_json(cls, obj) -> "Word":
        n = int(obj["n"])
        letters = []
        for item in obj["letters"]:
            kind = item.get("kind")
            if kind == "affine":
                lin = Linear.from_json(item["linear"])
                off = tuple(_c(v) for v in item["offset"])
                if "inv_offset" in item:
                    inv = tuple(_c(v) for v in item["inv_offset"])
                else:
                    inv = tuple(complex(v) for v in -(lin.Minv @ np.array(off)))
                letters.append(Affine(lin, off, inv))
            elif kind in ("shear", "overshear"):
                f = Poly.from_json(n - 1, item["f"])
                conj = None if item.get("conj") is None else Linear.from_json(item["conj"])
                letters.append((Shear if kind == "shear" else Overshear)(f, conj))
            else:
                raise ConfigError(f"unknown letter kind {kind!r}")
        return cls(n, tuple(letters))


def shear(n: int, table: dict, conj=None) -> Word:
    """One-letter word; table maps exponent tuples of z' to coefficients."""
    return Word(n, (Shear(Poly.from_dict(n - 1, table), None if conj is None else Linear.of(conj)),))


def overshear(n: int, table: dict, conj=None) -> Word:
    return Word(n, (Overshear(Poly.from_dict(n - 1, table), None if conj is None else Linear.of(conj)),))


def affine(M, b=None) -> Word:
    M = np.asarray(M, dtype=complex)
    b = np.zeros(M.shape[0]) if b is None else b
    return Word(M.shape[0], (Affine.of(M, b),))


def _check(w: Word, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != w.n:
        raise DimensionMismatch(f"word acts on C^{w.n}, got {z.shape[-1]} coordinates")
    return z


def word_eval(w: Word, z) -> np.ndarray:
    """Apply the letters left to right.

    Examples
    --------
    >>> word_eval(shear(2, {(2,): 1}), [1, 1])
    array([1.+0.j, 2.+0.j])
    """
    z = _check(w, z)
    for letter in w.letters:
        z = letter_eval(letter, z)
    return z


def word_invert(w: Word) -> Word:
    return Word(w.n, tuple(letter_invert(x) for x in reversed(w.letters)))


def word_jacobian_det(w: Word, z) -> complex | np.ndarray:
    """Product of letter determinants along the running point."""
    z = _check(w, z)
    det = np.ones(z.shape[:-1], dtype=complex)
    for letter in w.letters:
        det = det * letter_det(letter, z)
        z = letter_eval(letter, z)
    return complex(det) if det.ndim == 0 else det


def fd_jacobian_det(w: Word, z, h: float = 1e-6) -> complex:
    return complex(np.linalg.det(fd_jacobian(lambda p: word_eval(w, p), np.asarray(z, dtype=complex), h)))


def random_word(n: int, length: int, rng: np.random.Generator, kinds=("shear", "overshear", "affine"), scale: float = 0.3) -> Word:
    """Random word with small coefficients (degree <= 2, entries of size `scale`)."""
    letters = []
    for _ in range(length):
        kind = kinds[rng.integers(len(kinds))]
        if kind == "affine":
            M = np.eye(n) + scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
            b = scale * (rng.normal(size=n) + 1j * rng.normal(size=n))
            letters.append(Affine.of(M, b))
            continue
        table = {}
        for _ in range(int(rng.integers(1, 4))):
            exps = [0] * (n - 1)
            for _ in range(int(rng.integers(0, 3))):
                exps[int(rng.integers(n - 1))] += 1
            table[tuple(exps)] = complex(scale * rng.normal(), scale * rng.normal())
        conj = None
        if rng.uniform() < 0.5:
            conj = Linear.of(np.eye(n) + scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))))
        cls = Shear if kind == "shear" else Overshear
        letters.append(cls(Poly.from_dict(n - 1, table), conj))
    return Word(n, tuple(letters))


# ---------------------------------------------------------------------------
# symplectic structure


def standard_J(n: int) -> np.ndarray:
    """[[0, I], [-I, 0]] on C^n, n even."""
    if n % 2:
        raise OddDimension(f"symplectic form needs even dimension, got {n}")
    k = n // 2
    J = np.zeros((n, n), dtype=complex)
    J[:k, k:] = np.eye(k)
    J[k:, :k] = -np.eye(k)
    return J


def symplectic_defect(fmap, z, J=None, h: float = 1e-6) -> float:
    """Frobenius norm of Dmap^T J Dmap - J at z (central differences)."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    J = standard_J(n) if J is None else np.asarray(J, dtype=complex)
    if n % 2:
        raise OddDimension(f"symplectic form needs even dimension, got {n}")
    D = fd_jacobian(fmap, z, h)
    return float(np.linalg.norm(D.T @ J @ D - J))


def sp_membership(A, J=None, tol: float = 1e-9) -> bool:
    """A^T J A = J within tol (Frobenius)."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    J = standard_J(n) if J is None else np.asarray(J, dtype=complex)
    if n % 2:
        raise OddDimension(f"symplectic form needs even dimension, got {n}")
    return bool(np.linalg.norm(A.T @ J @ A - J) <= tol)
