"""Quadratic forms Q(x,y) = x^T a x + x^T b y + y^T c y and their invariants.

All invariant computations (matrix discriminant, determinant identity,
genericity) are exact over Q via Fraction arithmetic: genericity is a
Zariski condition and floating point would misclassify nearby degenerate
forms.  Eigenvalues themselves are never computed; distinctness is decided
by the resultant of the characteristic polynomial with its derivative, and
the forbidden eigenvalues by direct evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .ringcore import charpoly_mod, is_prime, mat_det, poly_eval, poly_gcd


class SingularB(ValueError):
    pass


# -- exact linear algebra over Q (lists of Fractions) ------------------------


def _fmat(m) -> list[list[Fraction]]:
    return [[Fraction(x) for x in row] for row in m]


def fmat_mul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m)] for i in range(n)]


def fmat_det(m) -> Fraction:
    a = [row[:] for row in _fmat(m)]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, n):
            if a[r][col]:
                f = a[r][col] * inv
                for c in range(col, n):
                    a[r][c] -= f * a[col][c]
    return det


def fmat_inv(m):
    a = [row[:] for row in _fmat(m)]
    n = len(a)
    aug = [a[i] + [Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix over Q")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def fmat_charpoly(m) -> list[Fraction]:
    """Characteristic polynomial det(xI - M), constant term first, monic."""
    M = _fmat(m)
    n = len(M)
    coeffs = [Fraction(1)]
    Mk = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        Mk = fmat_mul(M, Mk)
        tr = sum(Mk[i][i] for i in range(n))
        ck = -tr / k
        coeffs.append(ck)
        for i in range(n):
            Mk[i][i] += ck
    return list(reversed(coeffs))


def poly_deriv_q(f: list[Fraction]) -> list[Fraction]:
    return [Fraction(i) * f[i] for i in range(1, len(f))]


def resultant_q(f: list[Fraction], g: list[Fraction]) -> Fraction:
    """Res(f, g) via the Sylvester matrix over Q."""
    fd, gd = len(f) - 1, len(g) - 1
    n = fd + gd
    syl = [[Fraction(0)] * n for _ in range(n)]
    for i in range(gd):
        for j, c in enumerate(reversed(f)):
            syl[i][i + j] = c
    for i in range(fd):
        for j, c in enumerate(reversed(g)):
            syl[gd + i][i + j] = c
    return fmat_det(syl)


def poly_eval_q(f: list[Fraction], x) -> Fraction:
    acc = Fraction(0)
    for c in reversed(f):
        acc = acc * x + c
    return acc


# -- the quadratic form -------------------------------------------------------


@dataclass(frozen=True)
class QuadForm:
    """Integer matrices (a, b, c); a and c symmetric, entries below 2**31."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c"):
            m = np.asarray(getattr(self, name), dtype=np.int64)
            if m.shape != (4, 4):
                raise ValueError(f"{name} must be 4x4")
            if np.abs(m).max() >= 2**31:
                raise ValueError(f"{name} entries must stay below 2**31")
            object.__setattr__(self, name, m)
        if not np.array_equal(self.a, self.a.T):
            raise ValueError("a must be symmetric")
        if not np.array_equal(self.c, self.c.T):
            raise ValueError("c must be symmetric")

    @property
    def det_b(self) -> int:
        return mat_det(self.b)

    @property
    def det_a(self) -> int:
        return mat_det(self.a)

    @property
    def K(self) -> int:
        """8 * max |b_ij|, the arc-geometry constant of the form."""
        return 8 * int(np.abs(self.b).max())

    def value(self, x, y) -> int:
        x = np.asarray(x, dtype=object)
        y = np.asarray(y, dtype=object)
        return int(x @ self.a @ x + x @ self.b @ y + y @ self.c @ y)

    def gram8(self) -> list[list[Fraction]]:
        """The 8x8 rational Gram matrix [[a, b/2], [b^T/2, c]]."""
        g = [[Fraction(0)] * 8 for _ in range(8)]
        for i in range(4):
            for j in range(4):
                g[i][j] = Fraction(int(self.a[i, j]))
                g[i][4 + j] = Fraction(int(self.b[i, j]), 2)
                g[4 + i][j] = Fraction(int(self.b[j, i]), 2)
                g[4 + i][4 + j] = Fraction(int(self.c[i, j]))
        return g

    def key(self) -> bytes:
        return json.dumps(
            {"a": self.a.tolist(), "b": self.b.tolist(), "c": self.c.tolist()},
            separators=(",", ":"),
        ).encode()


E1 = QuadForm(a=np.diag([1, 2, 3, 5]), b=np.eye(4, dtype=np.int64), c=np.eye(4, dtype=np.int64))


def matrix_discriminant(f: QuadForm) -> list[list[Fraction]]:
    """Delta = 4 b^{-1} a b^{-T} c - I, exact over Q."""
    if f.det_b == 0:
        raise SingularB("det b = 0")
    binv = fmat_inv(f.b.tolist())
    bTinv = fmat_inv(f.b.T.tolist())
    prod = fmat_mul(fmat_mul(fmat_mul(binv, _fmat(f.a.tolist())), bTinv), _fmat(f.c.tolist()))
    return [
        [4 * prod[i][j] - (1 if i == j else 0) for j in range(4)] for i in range(4)
    ]


def det_identity_check(f: QuadForm) -> tuple[Fraction, Fraction, bool]:
    """(det of 8x8 Gram matrix, 2^{-16} (det b)^2 det Delta, equal?)."""
    if f.det_b == 0:
        raise SingularB("det b = 0")
    lhs = fmat_det(f.gram8())
    delta = matrix_discriminant(f)
    rhs = Fraction(f.det_b**2, 2**16) * fmat_det(delta)
    return lhs, rhs, lhs == rhs


@dataclass(frozen=True)
class GenericityVerdict:
    det_b_nonzero: bool
    delta: tuple | None
    char_poly: tuple | None
    distinct_eigenvalues: bool
    zero_is_eigenvalue: bool
    minus_one_is_eigenvalue: bool
    generic: bool


def is_generic(f: QuadForm) -> GenericityVerdict:
    """Generic: det b != 0 and Delta has 4 distinct eigenvalues not in {0,-1}.

    Also requires det a != 0 (the theorem hypothesis is det ab != 0).
    Distinctness is decided by Res(charpoly, charpoly') != 0.
    """
    if f.det_b == 0 or f.det_a == 0:
        return GenericityVerdict(f.det_b != 0, None, None, False, False, False, False)
    delta = matrix_discriminant(f)
    cp = fmat_charpoly(delta)
    res = resultant_q(cp, poly_deriv_q(cp))
    distinct = res != 0
    zero_ev = poly_eval_q(cp, 0) == 0
    minus_one_ev = poly_eval_q(cp, -1) == 0
    generic = distinct and not zero_ev and not minus_one_ev
    return GenericityVerdict(
        det_b_nonzero=True,
        delta=tuple(tuple(r) for r in delta),
        char_poly=tuple(cp),
        distinct_eigenvalues=distinct,
        zero_is_eigenvalue=zero_ev,
        minus_one_is_eigenvalue=minus_one_ev,
        generic=generic,
    )


def delta_mod(f: QuadForm, p: int) -> np.ndarray:
    """Delta reduced mod p (requires p coprime to det b)."""
    from .ringcore import mat_inverse, mat_mul

    binv = mat_inverse(f.b, p)
    btinv = mat_inverse(f.b.T % p, p)
    d = mat_mul(mat_mul(mat_mul(binv, f.a % p, p), btinv, p), f.c % p, p)
    return (4 * d - np.eye(4, dtype=np.int64)) % p


def admissible_prime(f: QuadForm, p: int) -> bool:
    """p odd, coprime to det a and det b, and char poly of Delta mod p
    squarefree with no root at 0 or -1."""
    if not is_prime(p) or p == 2:
        return False
    verdict = is_generic(f)
    if not verdict.generic:
        raise ValueError("admissible_prime requires a generic form")
    if f.det_a % p == 0 or f.det_b % p == 0:
        return False
    dp = delta_mod(f, p)
    cp = charpoly_mod(dp, p)
    dcp = [(i * cp[i]) % p for i in range(1, len(cp))]
    if poly_gcd(cp, dcp, p) != [1]:
        return False
    if poly_eval(cp, 0, p) == 0 or poly_eval(cp, p - 1, p) == 0:
        return False
    return True


def admissible_primes(f: QuadForm, bound: int) -> list[int]:
    from .ringcore import primes_up_to

    return [p for p in primes_up_to(bound) if p > 2 and admissible_prime(f, p)]


# -- form files ---------------------------------------------------------------


def load_form(path) -> QuadForm:
    with open(path) as fh:
        data = json.load(fh)
    for key in ("a", "b", "c"):
        if key not in data:
            raise ValueError(f"form file missing field '{key}'")
    return QuadForm(a=np.array(data["a"]), b=np.array(data["b"]), c=np.array(data["c"]))


def save_form(f: QuadForm, path) -> None:
    with open(path, "w") as fh:
        json.dump({"a": f.a.tolist(), "b": f.b.tolist(), "c": f.c.tolist()}, fh, indent=1)


def random_form(rng: np.random.Generator, bound: int = 5, unimodular_b: bool = False) -> QuadForm:
    """Random integer form with symmetric a, c and nonzero det b."""
    while True:
        a = rng.integers(-bound, bound + 1, size=(4, 4))
        a = np.triu(a) + np.triu(a, 1).T
        c = rng.integers(-bound, bound + 1, size=(4, 4))
        c = np.triu(c) + np.triu(c, 1).T
        if unimodular_b:
            b = np.eye(4, dtype=np.int64)
        else:
            b = rng.integers(-bound, bound + 1, size=(4, 4))
        f = QuadForm(a=a, b=b, c=c)
        if f.det_b != 0:
            return f
