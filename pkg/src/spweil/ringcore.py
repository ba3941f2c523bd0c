"""Exact arithmetic over Z/qZ, prime fields and small extensions F_{p^d}.

Everything here is deliberately elementary: moduli are capped below 2**31 so
that all intermediate products fit in 64-bit integers, polynomial
factorization is by exhaustive trial division (degrees <= 8, small p), and
extension fields are realized as coefficient vectors modulo the
lexicographically least irreducible polynomial, with full multiplication
tables when the field is small enough to enumerate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, isqrt

import numpy as np

MAX_MODULUS = 2**31


class NotInvertible(ValueError):
    """Raised when an inverse does not exist; carries an offending prime."""

    def __init__(self, msg, prime=None):
        super().__init__(msg)
        self.prime = prime


def factorize(n: int) -> list[tuple[int, int]]:
    """Prime factorization by trial division, n < 2**31."""
    if n <= 0:
        raise ValueError("need a positive integer")
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def primes_up_to(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return [int(p) for p in np.nonzero(sieve)[0]]


@dataclass(frozen=True)
class Modulus:
    """An odd modulus q with its factorization, q >= 3, q < 2**31."""

    q: int
    factorization: tuple[tuple[int, int], ...] = field(default=None)

    def __post_init__(self):
        if self.q < 3 or self.q % 2 == 0 or self.q >= MAX_MODULUS:
            raise ValueError(f"modulus must be odd, >= 3 and < 2**31, got {self.q}")
        if self.factorization is None:
            object.__setattr__(self, "factorization", tuple(factorize(self.q)))
        prod = 1
        for p, e in self.factorization:
            prod *= p**e
        if prod != self.q:
            raise ValueError("factorization does not multiply back to q")

    @property
    def squarefree(self) -> bool:
        return all(e == 1 for _, e in self.factorization)

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factorization)

    @property
    def inv2(self) -> int:
        return pow(2, -1, self.q)

    def phi(self) -> int:
        out = 1
        for p, e in self.factorization:
            out *= p ** (e - 1) * (p - 1)
        return out

    def units(self) -> list[int]:
        return [r for r in range(1, self.q) if gcd(r, self.q) == 1]


def crt_lift(residues: list[tuple[int, int]]) -> tuple[int, int]:
    """Combine residues [(value, prime), ...] into (value mod prod, prod).

    Primes must be distinct; the result is the unique lift mod their product.
    """
    primes = [p for _, p in residues]
    if len(set(primes)) != len(primes):
        raise ValueError("duplicate primes in CRT input")
    q = 1
    for p in primes:
        q *= p
    x = 0
    for v, p in residues:
        lam = q // p
        x = (x + lam * (pow(lam, -1, p) * v % p)) % q
    return x, q


def legendre(a: int, p: int) -> int:
    """Legendre symbol (a/p), p an odd prime."""
    if p == 2 or not is_prime(p):
        raise ValueError(f"legendre needs an odd prime, got {p}")
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd n > 0."""
    if n <= 0 or n % 2 == 0:
        raise ValueError("jacobi needs odd positive n")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


# ---------------------------------------------------------------------------
# matrices over Z/qZ (plain int64 ndarrays, reduced representatives in [0, q))
# ---------------------------------------------------------------------------


def mat(m, q: int) -> np.ndarray:
    return np.asarray(m, dtype=np.int64) % q


def mat_mul(a, b, q: int) -> np.ndarray:
    return (np.asarray(a, dtype=np.int64) @ np.asarray(b, dtype=np.int64)) % q


def mat_det(m, q: int | None = None) -> int:
    """Exact integer determinant (Bareiss); reduced mod q when q is given."""
    a = [[int(x) for x in row] for row in np.asarray(m)]
    n = len(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    d = sign * a[n - 1][n - 1]
    return d % q if q is not None else d


def mat_inverse(m, q: int) -> np.ndarray:
    """Inverse of an integer matrix mod q.

    Works prime-by-prime: invert mod each prime power by Gaussian elimination
    (Hensel-lifted for powers), then CRT.  Raises NotInvertible carrying the
    offending prime when det(m) shares a factor with q.
    """
    m = mat(m, q)
    d = mat_det(m, q)
    g = gcd(d, q)
    if g != 1:
        bad = next(p for p, _ in factorize(q) if d % p == 0)
        raise NotInvertible(f"matrix not invertible mod {q} (prime {bad})", prime=bad)
    parts = []
    for p, e in factorize(q):
        inv_p = _mat_inverse_prime(m % p, p)
        pe = p**e
        if e > 1:
            # Newton/Hensel lift: X <- X(2I - MX) doubles the precision.
            n = m.shape[0]
            x = inv_p.astype(object)
            mm = (m % pe).astype(object)
            k = 1
            while k < e:
                x = (x @ ((2 * np.eye(n, dtype=object)) - mm @ x)) % pe
                k *= 2
            inv_p = x.astype(np.int64)
        parts.append((inv_p, pe))
    if len(parts) == 1:
        return parts[0][0] % q
    out = np.zeros_like(m)
    for inv_pe, pe in parts:
        lam = q // pe
        coef = lam * pow(lam, -1, pe)
        out = (out + coef * inv_pe) % q
    return out


def _mat_inverse_prime(m: np.ndarray, p: int) -> np.ndarray:
    n = m.shape[0]
    aug = np.concatenate([m % p, np.eye(n, dtype=np.int64)], axis=1)
    row = 0
    for col in range(n):
        piv = None
        for r in range(row, n):
            if aug[r, col] % p:
                piv = r
                break
        if piv is None:
            raise NotInvertible(f"singular mod {p}", prime=p)
        aug[[row, piv]] = aug[[piv, row]]
        aug[row] = aug[row] * pow(int(aug[row, col]), -1, p) % p
        for r in range(n):
            if r != row and aug[r, col]:
                aug[r] = (aug[r] - aug[r, col] * aug[row]) % p
        row += 1
    return aug[:, n:] % p


def charpoly_mod(m, p: int) -> list[int]:
    """char poly det(xI - M) mod p, coefficients constant-first, monic.

    Computed exactly over Z on the integer lift (Faddeev-LeVerrier with
    rational intermediates), then reduced; this avoids divisions mod small p.
    """
    M = [[Fraction(int(x)) for x in row] for row in np.asarray(m)]
    n = len(M)

    def mult(A, B):
        return [
            [sum(A[i][k] * B[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)
        ]

    I = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    coeffs = [Fraction(1)]  # c_n = 1 (monic), then c_{n-1}, ...
    Mk = [row[:] for row in I]
    for k in range(1, n + 1):
        Mk = mult(M, Mk)
        tr = sum(Mk[i][i] for i in range(n))
        ck = -tr / k
        coeffs.append(ck)
        for i in range(n):
            Mk[i][i] += ck
    # coeffs = [1, c_{n-1}, ..., c_0] for x^n + c_{n-1} x^{n-1} + ... + c_0
    ints = []
    for c in coeffs:
        assert c.denominator == 1
        ints.append(int(c))
    return [c % p for c in reversed(ints)]


# ---------------------------------------------------------------------------
# polynomials over F_p (coefficient lists, constant term first)
# ---------------------------------------------------------------------------


def poly_trim(f: list[int]) -> list[int]:
    f = list(f)
    while len(f) > 1 and f[-1] == 0:
        f.pop()
    return f


def poly_mul(f, g, p: int) -> list[int]:
    out = [0] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a:
            for j, b in enumerate(g):
                out[i + j] = (out[i + j] + a * b) % p
    return poly_trim(out)


def poly_divmod(f, g, p: int) -> tuple[list[int], list[int]]:
    f = [c % p for c in f]
    g = poly_trim([c % p for c in g])
    if g == [0]:
        raise ZeroDivisionError("polynomial division by zero")
    ginv = pow(g[-1], -1, p)
    quo = [0] * max(1, len(f) - len(g) + 1)
    rem = list(f)
    while len(poly_trim(rem)) - 1 >= len(g) - 1 and poly_trim(rem) != [0]:
        rem = poly_trim(rem)
        if len(rem) < len(g):
            break
        shift = len(rem) - len(g)
        c = rem[-1] * ginv % p
        quo[shift] = c
        for i, gc in enumerate(g):
            rem[shift + i] = (rem[shift + i] - c * gc) % p
        rem = rem[:-1]
    return poly_trim(quo), poly_trim(rem)


def poly_eval(f, x: int, p: int) -> int:
    acc = 0
    for c in reversed(f):
        acc = (acc * x + c) % p
    return acc


def poly_gcd(f, g, p: int) -> list[int]:
    a, b = poly_trim(f), poly_trim(g)
    while b != [0]:
        _, r = poly_divmod(a, b, p)
        a, b = b, r
    if a != [0]:
        lead = pow(a[-1], -1, p)
        a = [c * lead % p for c in a]
    return a


def monic_polys(degree: int, p: int):
    """All monic polynomials of the given degree over F_p, lexicographic."""
    if degree == 0:
        yield [1]
        return
    coeffs = [0] * degree
    while True:
        yield coeffs + [1]
        i = 0
        while i < degree:
            coeffs[i] += 1
            if coeffs[i] < p:
                break
            coeffs[i] = 0
            i += 1
        else:
            return


def is_irreducible(f, p: int) -> bool:
    """Irreducibility by exhaustive trial division up to degree deg(f)//2."""
    f = poly_trim(f)
    d = len(f) - 1
    if d <= 0:
        return False
    if d == 1:
        return True
    for x in range(p):
        if poly_eval(f, x, p) == 0:
            return False
    for e in range(2, d // 2 + 1):
        for g in monic_polys(e, p):
            if is_irreducible(g, p):
                _, r = poly_divmod(f, g, p)
                if r == [0]:
                    return False
    return True


def factor_poly(f, p: int) -> list[tuple[list[int], int]]:
    """Factor f over F_p into irreducibles with multiplicity.

    Exhaustive trial division; admissible for deg <= 8 and small p.  Returns
    monic factors (constant-first coefficient lists), the unit content is
    dropped after normalization.  Even p is rejected.
    """
    if p == 2 or not is_prime(p):
        raise ValueError(f"factor_poly requires an odd prime, got {p}")
    f = poly_trim([c % p for c in f])
    if f == [0]:
        raise ValueError("cannot factor the zero polynomial")
    if len(f) - 1 > 8:
        raise ValueError("degree above 8 unsupported")
    lead = pow(f[-1], -1, p)
    f = [c * lead % p for c in f]
    out = []
    deg = 1
    while len(f) > 1:
        while deg <= (len(f) - 1) // 2:
            hit = False
            for g in monic_polys(deg, p):
                if not is_irreducible(g, p):
                    continue
                quo, r = poly_divmod(f, g, p)
                if r == [0]:
                    mult = 1
                    f = quo
                    while True:
                        quo, r = poly_divmod(f, g, p)
                        if r == [0]:
                            mult += 1
                            f = quo
                        else:
                            break
                    out.append((g, mult))
                    hit = True
                    break
            if not hit:
                deg += 1
        if len(f) > 1:
            out.append((f, 1))  # remaining factor is irreducible
            f = [1]
    out.sort(key=lambda t: (len(t[0]), t[0]))
    return out


# ---------------------------------------------------------------------------
# small extension fields F_{p^d}
# ---------------------------------------------------------------------------


def least_irreducible(p: int, d: int) -> list[int]:
    """Lexicographically least monic irreducible of degree d over F_p."""
    if d == 1:
        return [0, 1]
    for g in monic_polys(d, p):
        if is_irreducible(g, p):
            return g
    raise RuntimeError("unreachable: irreducibles exist in every degree")


class FieldExt:
    """F_{p^d} with elements encoded as integers in [0, p^d).

    The encoding is the little-endian base-p expansion of the coefficient
    vector.  Multiplication/addition tables are materialized when p^d is
    small (<= table_cap), which is what the group-enumeration code relies on.
    """

    def __init__(self, p: int, d: int, modpoly: list[int] | None = None, table_cap: int = 1 << 14):
        if not is_prime(p) or p == 2:
            raise ValueError("FieldExt needs an odd prime")
        if not 1 <= d <= 4:
            raise ValueError("degree must be between 1 and 4")
        self.p, self.d = p, d
        self.q = p**d
        self.modpoly = modpoly if modpoly is not None else least_irreducible(p, d)
        if len(self.modpoly) - 1 != d or not is_irreducible(self.modpoly, p):
            raise ValueError("modulus polynomial must be irreducible of degree d")
        self._tables = None
        if self.q <= table_cap:
            self._build_tables()

    def encode(self, coeffs) -> int:
        v = 0
        for c in reversed(list(coeffs)):
            v = v * self.p + (c % self.p)
        return v

    def decode(self, v: int) -> list[int]:
        out = []
        for _ in range(self.d):
            out.append(v % self.p)
            v //= self.p
        return out

    def scalar(self, x: int) -> int:
        return self.encode([x] + [0] * (self.d - 1))

    @property
    def zero(self) -> int:
        return 0

    @property
    def one(self) -> int:
        return self.scalar(1)

    @property
    def gen(self) -> int:
        """The class of X, a root of the modulus polynomial."""
        return self.encode([0, 1] + [0] * (self.d - 2)) if self.d > 1 else self.scalar(0)

    def _build_tables(self):
        q = self.q
        mul = np.zeros((q, q), dtype=np.int64)
        add = np.zeros((q, q), dtype=np.int64)
        dec = [self.decode(v) for v in range(q)]
        for a in range(q):
            ca = dec[a]
            for b in range(a, q):
                cb = dec[b]
                s = self.encode([(x + y) % self.p for x, y in zip(ca, cb)])
                add[a, b] = add[b, a] = s
                pr = poly_mul(ca, cb, self.p)
                _, r = poly_divmod(pr, self.modpoly, self.p)
                r = r + [0] * (self.d - len(r))
                m = self.encode(r)
                mul[a, b] = mul[b, a] = m
        self.mul_table = mul
        self.add_table = add
        self.neg_table = np.array(
            [self.encode([(-x) % self.p for x in dec[v]]) for v in range(q)], dtype=np.int64
        )
        self._tables = True

    def add(self, a: int, b: int) -> int:
        if self._tables:
            return int(self.add_table[a, b])
        ca, cb = self.decode(a), self.decode(b)
        return self.encode([(x + y) % self.p for x, y in zip(ca, cb)])

    def neg(self, a: int) -> int:
        if self._tables:
            return int(self.neg_table[a])
        return self.encode([(-x) % self.p for x in self.decode(a)])

    def mul(self, a: int, b: int) -> int:
        if self._tables:
            return int(self.mul_table[a, b])
        pr = poly_mul(self.decode(a), self.decode(b), self.p)
        _, r = poly_divmod(pr, self.modpoly, self.p)
        r = r + [0] * (self.d - len(r))
        return self.encode(r)

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return self.pow(a, self.q - 2)

    def pow(self, a: int, e: int) -> int:
        out = self.one
        base = a
        while e:
            if e & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            e >>= 1
        return out
