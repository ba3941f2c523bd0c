"""Sp8(Z/qZ): the symplectic element of a quadratic form, dilations,
block DUL factorization, and the 2x2 scalar matrices over extension fields.

Conventions (blocks are 4x4, elements are 8x8 over Z/qZ):
    J      = [[0, I], [-I, 0]]
    s(E)   = [[E, 0], [0, E^{-T}]]
    u(B)   = [[I, B], [0, I]]      (B symmetric)
    l(C)   = [[I, 0], [C, I]]      (C symmetric)
    g(Q)   = [[-2 b^{-T} c, b^{-T}], [4 a b^{-T} c - b, -2 a b^{-T}]]
           = l(-2a) s(b^{-T}) J l(-2c)
    dilate by r: [[A, B], [C, D]] -> [[A, r^{-1} B], [r C, D]]
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from .quadform import QuadForm
from .ringcore import FieldExt, Modulus, NotInvertible, mat_det, mat_inverse, mat_mul


class NotSymplectic(ValueError):
    pass


class NotFactorizable(ValueError):
    pass


def _J(q: int) -> np.ndarray:
    J = np.zeros((8, 8), dtype=np.int64)
    J[:4, 4:] = np.eye(4, dtype=np.int64)
    J[4:, :4] = -np.eye(4, dtype=np.int64) % q
    return J


@dataclass(frozen=True)
class SpElement:
    """A certified element of Sp8(Z/qZ); construction verifies g^T J g = J."""

    m: np.ndarray
    q: int

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.int64) % self.q
        object.__setattr__(self, "m", m)
        if m.shape != (8, 8):
            raise NotSymplectic("need an 8x8 matrix")
        J = _J(self.q)
        if not np.array_equal(mat_mul(mat_mul(m.T, J, self.q), m, self.q), J):
            raise NotSymplectic(f"g^T J g != J mod {self.q}")

    @property
    def A(self) -> np.ndarray:
        return self.m[:4, :4]

    @property
    def B(self) -> np.ndarray:
        return self.m[:4, 4:]

    @property
    def C(self) -> np.ndarray:
        return self.m[4:, :4]

    @property
    def D(self) -> np.ndarray:
        return self.m[4:, 4:]

    def __mul__(self, other: "SpElement") -> "SpElement":
        if self.q != other.q:
            raise ValueError("modulus mismatch")
        return SpElement(mat_mul(self.m, other.m, self.q), self.q)

    def inverse(self) -> "SpElement":
        # closed form [[D^T, -B^T], [-C^T, A^T]]
        q = self.q
        inv = np.zeros((8, 8), dtype=np.int64)
        inv[:4, :4] = self.D.T
        inv[:4, 4:] = (-self.B.T) % q
        inv[4:, :4] = (-self.C.T) % q
        inv[4:, 4:] = self.A.T
        return SpElement(inv, q)

    def encode(self) -> bytes:
        """Canonical key: the 64 residues row-major as little-endian uint32."""
        return self.m.astype("<u4").tobytes()

    @staticmethod
    def decode(key: bytes, q: int) -> "SpElement":
        m = np.frombuffer(key, dtype="<u4").astype(np.int64).reshape(8, 8)
        return SpElement(m, q)

    def __eq__(self, other):
        return self.q == other.q and np.array_equal(self.m, other.m)

    def __hash__(self):
        return hash((self.q, self.encode()))


def sp_identity(q: int) -> SpElement:
    return SpElement(np.eye(8, dtype=np.int64), q)


def sp_J(q: int) -> SpElement:
    return SpElement(_J(q), q)


def sp_s(E, q: int) -> SpElement:
    E = np.asarray(E, dtype=np.int64) % q
    m = np.zeros((8, 8), dtype=np.int64)
    m[:4, :4] = E
    m[4:, 4:] = mat_inverse(E.T, q)
    return SpElement(m, q)


def sp_u(B, q: int) -> SpElement:
    B = np.asarray(B, dtype=np.int64) % q
    m = np.eye(8, dtype=np.int64)
    m[:4, 4:] = B
    return SpElement(m, q)


def sp_l(C, q: int) -> SpElement:
    C = np.asarray(C, dtype=np.int64) % q
    m = np.eye(8, dtype=np.int64)
    m[4:, :4] = C
    return SpElement(m, q)


def symplectic_element(f: QuadForm, q: Modulus | int) -> SpElement:
    """The symplectic element g(Q) mod q; q odd with gcd(q, det b) = 1."""
    qv = q.q if isinstance(q, Modulus) else int(q)
    if gcd(f.det_b % qv, qv) != 1:
        raise NotInvertible(f"det b shares a factor with {qv}")
    btinv = mat_inverse(f.b.T % qv, qv)
    a, b, c = f.a % qv, f.b % qv, f.c % qv
    m = np.zeros((8, 8), dtype=np.int64)
    m[:4, :4] = (-2 * mat_mul(btinv, c, qv)) % qv
    m[:4, 4:] = btinv
    m[4:, :4] = (4 * mat_mul(mat_mul(a, btinv, qv), c, qv) - b) % qv
    m[4:, 4:] = (-2 * mat_mul(a, btinv, qv)) % qv
    return SpElement(m, qv)


def dilate(g: SpElement, r: int) -> SpElement:
    """g^{(r)}: scale the top-right block by r^{-1} and bottom-left by r."""
    q = g.q
    if gcd(r % q, q) != 1:
        raise NotInvertible(f"{r} is not a unit mod {q}")
    rinv = pow(r, -1, q)
    m = g.m.copy()
    m[:4, 4:] = (rinv * g.B) % q
    m[4:, :4] = (r * g.C) % q
    return SpElement(m, q)


def gamma_generator(g: SpElement, r: int, s: int) -> SpElement:
    """g^{-(r)} g^{(s)} = dilate(g, r)^{-1} * dilate(g, s)."""
    return dilate(g, r).inverse() * dilate(g, s)


@dataclass(frozen=True)
class DulFactorization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    q: int

    def reassemble(self) -> SpElement:
        return sp_s(self.A, self.q) * sp_u(self.B, self.q) * sp_l(self.C, self.q)


def dul_factorize(g: SpElement) -> DulFactorization:
    """g = s(A) u(B) l(C) with A = S^{-T}, B = S^T Q, C = S^{-1} R
    for g = [[P, Q], [R, S]]; requires the S block invertible."""
    q = g.q
    S = g.D
    try:
        Sinv = mat_inverse(S, q)
    except NotInvertible as e:
        raise NotFactorizable(f"D block singular mod {e.prime}") from e
    A = mat_inverse(S.T, q)
    B = mat_mul(S.T, g.B, q)
    C = mat_mul(Sinv, g.C, q)
    fact = DulFactorization(A=A, B=B, C=C, q=q)
    if not np.array_equal(fact.reassemble().m, g.m):
        raise NotFactorizable("reassembly mismatch")  # pragma: no cover
    return fact


def tau_matrix(f: QuadForm, p: int) -> np.ndarray:
    """tau = [[I, 0], [0, B]] with B = -2 b^{-1} a b^{-T} (the DUL B of g(Q))."""
    binv = mat_inverse(f.b, p)
    btinv = mat_inverse(f.b.T % p, p)
    B = (-2 * mat_mul(mat_mul(binv, f.a % p, p), btinv, p)) % p
    t = np.eye(8, dtype=np.int64)
    t[4:, 4:] = B
    return t


def sp8_order(p: int) -> int:
    """|Sp8(F_p)| = p^16 (p^8-1)(p^6-1)(p^4-1)(p^2-1)."""
    if p == 2 or p < 2:
        raise ValueError("p must be an odd prime")
    return p**16 * (p**8 - 1) * (p**6 - 1) * (p**4 - 1) * (p**2 - 1)


# -- 2x2 scalar matrices over F_{p^d} -----------------------------------------


def m_theta(field: FieldExt, theta: int, r: int, s: int):
    """M_theta(r,s), the product
    [[1,0],[-r theta,1]] [[1,-r^{-1}],[0,1]] [[1,s^{-1}],[0,1]] [[1,0],[s theta,1]]
    as a 2x2 matrix over the field, entries encoded as field indices."""
    p = field.p
    if theta == field.zero or theta == field.scalar(p - 1):
        raise ValueError("theta must avoid 0 and -1")
    if r % p == 0 or s % p == 0:
        raise ValueError("r, s must be units in F_p")
    one, zero = field.one, field.zero
    rinv, sinv = pow(r, -1, p), pow(s, -1, p)

    def mul2(X, Y):
        a, b, c, d = X
        e, f, g, h = Y
        m, ad = field.mul, field.add
        return (
            ad(m(a, e), m(b, g)),
            ad(m(a, f), m(b, h)),
            ad(m(c, e), m(d, g)),
            ad(m(c, f), m(d, h)),
        )

    A = (one, zero, field.neg(field.mul(theta, field.scalar(r))), one)
    B = (one, field.scalar(-rinv), zero, one)
    C = (one, field.scalar(sinv), zero, one)
    D = (one, zero, field.mul(theta, field.scalar(s)), one)
    return mul2(mul2(mul2(A, B), C), D)


def det2(field: FieldExt, M) -> int:
    a, b, c, d = M
    return field.add(field.mul(a, d), field.neg(field.mul(b, c)))


def mat2_mul(field: FieldExt, X, Y):
    a, b, c, d = X
    e, f, g, h = Y
    m, ad = field.mul, field.add
    return (
        ad(m(a, e), m(b, g)),
        ad(m(a, f), m(b, h)),
        ad(m(c, e), m(d, g)),
        ad(m(c, f), m(d, h)),
    )


def mat2_inv_sl2(field: FieldExt, M):
    a, b, c, d = M
    return (d, field.neg(b), field.neg(c), a)


def m_theta_conj_bottom_left(field: FieldExt, theta: int, r: int, s: int, P) -> int:
    """Closed form for the bottom-left entry of P M_theta(r,s) P^{-1}, P in SL2:
    (1/rs) ( d^2 th (1+th) (s^2 r - r^2 s) + c^2 (s - r) + c d th (r^2 - s^2) )."""
    p = field.p
    _, _, c, d = P
    m, ad, sc = field.mul, field.add, field.scalar
    th1 = ad(theta, field.one)
    t1 = m(m(m(d, d), m(theta, th1)), sc(s * s * r - r * r * s))
    t2 = m(m(c, c), sc(s - r))
    t3 = m(m(m(c, d), theta), sc(r * r - s * s))
    tot = ad(ad(t1, t2), t3)
    return m(tot, sc(pow(r * s, -1, p)))
