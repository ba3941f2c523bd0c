"""Matrix-free Weil representation of Sp8(Z/qZ) on l^2((Z/qZ)^4).

Operators act on complex amplitude arrays of shape (q, q, q, q) and are
composed from three generator tokens:

    ("S", E)   : f(x) -> xi(E) f(E^{-1} x),  xi(E) = Jacobi(det E, q)
    ("F",)     : f    -> q^2 E_y f(y) e_q(x^T y)      (and ("FINV",))
    ("L", W)   : f(x) -> e_q(-1/2 x^T W x) f(x),  W symmetric

For odd prime q these multipliers realize a genuine representation; for odd
squarefree q the same global formulas agree exactly with the tensor/twist
construction from the per-prime representations (verified by
`squarefree_consistency`), so no phase bookkeeping is needed downstream.

Dense operator matrices are never materialized above dimension `q**4` with
q > 7; everything applies to vectors, with batched leading axes supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np

from .quadform import QuadForm
from .ringcore import Modulus, NotInvertible, factorize, jacobi, mat_det, mat_inverse

_GRID_CACHE_CAP = 3_200_000  # cache coordinate grids only while q^4 stays small


@lru_cache(maxsize=8)
def _omega(q: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(q) / q)


@lru_cache(maxsize=4)
def _coord_grid(q: int) -> np.ndarray:
    """All points of (Z/qZ)^4 as a (4, q^4) int64 array, row-major order."""
    return np.indices((q,) * 4).reshape(4, -1).astype(np.int64)


def coord_grid(q: int) -> np.ndarray:
    if q**4 <= _GRID_CACHE_CAP:
        return _coord_grid(q)
    return np.indices((q,) * 4).reshape(4, -1).astype(np.int64)


def quad_phase_table(W, q: int) -> np.ndarray:
    """x^T W x mod q on the (q,)*4 grid, built by broadcasting axis vectors."""
    W = np.asarray(W, dtype=np.int64) % q
    xs = []
    for k in range(4):
        sh = [1] * 4
        sh[k] = q
        xs.append(np.arange(q, dtype=np.int64).reshape(sh))
    tot = np.zeros((1,) * 4, dtype=np.int64)
    for i in range(4):
        for j in range(4):
            if W[i, j]:
                tot = (tot + W[i, j] * xs[i] * xs[j]) % q
    return np.broadcast_to(tot, (q,) * 4) if tot.shape != (q,) * 4 else tot


# ---------------------------------------------------------------------------
# state vectors
# ---------------------------------------------------------------------------


@dataclass
class StateVector:
    """Amplitudes on (Z/qZ)^4 with the expectation inner product
    <f1, f2> = E_x f1(x) conj(f2(x))."""

    q: int
    amp: np.ndarray

    def __post_init__(self):
        self.amp = np.ascontiguousarray(self.amp, dtype=np.complex128).reshape((self.q,) * 4)

    def norm(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.amp) ** 2)))

    def inner(self, other: "StateVector") -> complex:
        return complex(np.mean(self.amp * np.conj(other.amp)))


def inner(f1: np.ndarray, f2: np.ndarray) -> complex:
    return complex(np.mean(f1 * np.conj(f2)))


def l2_norm(f: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(f) ** 2)))


def random_unit_vector(q: int, rng: np.random.Generator) -> np.ndarray:
    """Standard complex Gaussian coordinates, normalized to E-norm 1."""
    f = rng.standard_normal((q,) * 4) + 1j * rng.standard_normal((q,) * 4)
    return f / l2_norm(f)


def delta_vector(q: int, point=(0, 0, 0, 0)) -> np.ndarray:
    f = np.zeros((q,) * 4, dtype=np.complex128)
    f[tuple(point)] = 1.0
    return f


# ---------------------------------------------------------------------------
# token application
# ---------------------------------------------------------------------------


def _gather(arr: np.ndarray, flat_index: np.ndarray, q: int) -> np.ndarray:
    """out[..., x] = arr[..., sigma(x)] for a flat permutation/map sigma."""
    lead = arr.shape[:-4]
    flat = arr.reshape(lead + (q**4,))
    out = flat[..., flat_index]
    return out.reshape(lead + (q,) * 4)


def apply_s(f: np.ndarray, E, q: int) -> np.ndarray:
    """f(x) -> Jacobi(det E, q) * f(E^{-1} x)."""
    E = np.asarray(E, dtype=np.int64)
    det = mat_det(E, q)
    if gcd(det, q) != 1:
        raise NotInvertible(f"det E not a unit mod {q}")
    xi = jacobi(det, q)
    Einv = mat_inverse(E, q)
    idx = (Einv @ coord_grid(q)) % q
    flat = np.ravel_multi_index(tuple(idx), (q,) * 4)
    return xi * _gather(np.asarray(f), flat, q)


def apply_fourier(f: np.ndarray, q: int) -> np.ndarray:
    """f -> q^2 E_y f(y) e_q(x^T y), via four axis-wise DFTs (cost O(q^4 log q))."""
    f = np.asarray(f)
    axes = tuple(range(f.ndim - 4, f.ndim))
    return q**2 * np.fft.ifftn(f, axes=axes)


def apply_fourier_inv(f: np.ndarray, q: int) -> np.ndarray:
    """rho(J)^{-1} = rho(s(-I) J): Fourier, then x -> -x (xi = +1)."""
    g = apply_fourier(f, q)
    neg = (-np.arange(q)) % q
    return g[..., neg, :, :, :][..., :, neg, :, :][..., :, :, neg, :][..., :, :, :, neg]


def apply_l(f: np.ndarray, W, q: int) -> np.ndarray:
    """f(x) -> e_q(-1/2 x^T W x) f(x); W must be symmetric, q odd."""
    W = np.asarray(W, dtype=np.int64) % q
    if not np.array_equal(W, W.T):
        raise ValueError("quadratic modulation needs a symmetric matrix")
    inv2 = pow(2, -1, q)
    Qw = quad_phase_table(W, q)
    return _omega(q)[(-inv2 * Qw) % q] * np.asarray(f)


def apply_token(f: np.ndarray, token, q: int) -> np.ndarray:
    kind = token[0]
    if kind == "S":
        return apply_s(f, token[1], q)
    if kind == "F":
        return apply_fourier(f, q)
    if kind == "FINV":
        return apply_fourier_inv(f, q)
    if kind == "L":
        return apply_l(f, token[1], q)
    raise ValueError(f"unknown token {token!r}")


def apply_word(f: np.ndarray, word, q: int) -> np.ndarray:
    """Apply a composition of tokens; the rightmost token acts first."""
    out = np.asarray(f, dtype=np.complex128)
    for token in reversed(word):
        out = apply_token(out, token, q)
    return out


@dataclass
class WeilOperator:
    """A lazily composed operator: a token word plus an accumulated scalar."""

    q: int
    word: tuple
    multiplier: complex = 1.0

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.multiplier * apply_word(f, self.word, self.q)

    def __matmul__(self, other: "WeilOperator") -> "WeilOperator":
        if self.q != other.q:
            raise ValueError("modulus mismatch")
        return WeilOperator(self.q, self.word + other.word, self.multiplier * other.multiplier)

    def matrix(self) -> np.ndarray:
        """Dense (q^4, q^4) matrix; refuse above q = 7 (matrix-free design)."""
        if self.q > 7:
            raise ValueError("dense operator matrices are capped at q = 7")
        return operator_matrix(self.word, self.q, self.multiplier)


def operator_matrix(word, q: int, multiplier: complex = 1.0) -> np.ndarray:
    """Dense matrix of a token word, via batched application to the basis."""
    dim = q**4
    basis = np.eye(dim, dtype=np.complex128).reshape((dim,) + (q,) * 4)
    cols = apply_word(basis, word, q).reshape(dim, dim)
    # cols[j] is the image of e_j; the matrix has those images as columns
    return multiplier * cols.T


def validate_word(word, q: int) -> None:
    for token in word:
        if token[0] not in ("S", "F", "FINV", "L"):
            raise ValueError(f"unknown token {token!r}")
        if token[0] == "S" and gcd(mat_det(np.asarray(token[1]), q), q) != 1:
            raise NotInvertible("S token with singular matrix")
        if token[0] == "L":
            W = np.asarray(token[1]) % q
            if not np.array_equal(W, W.T):
                raise ValueError("L token must carry a symmetric matrix")


def rho_of_word(word, q: int) -> WeilOperator:
    validate_word(word, q)
    return WeilOperator(q=q, word=tuple(word))


# ---------------------------------------------------------------------------
# words for specific group elements
# ---------------------------------------------------------------------------


def word_for_dilated_form(f: QuadForm, q: int, r: int = 1) -> tuple:
    """Token word realizing rho(g(Q)^{(r)}):
    g^{(r)} = l(-2ra) s(r^{-1} b^{-T}) J l(-2rc)."""
    if gcd(f.det_b % q, q) != 1 or gcd(r % q, q) != 1:
        raise NotInvertible("need gcd(det b, q) = gcd(r, q) = 1")
    rinv = pow(r, -1, q)
    btinv = mat_inverse(f.b.T % q, q)
    return (
        ("L", (-2 * r * f.a) % q),
        ("S", (rinv * btinv) % q),
        ("F",),
        ("L", (-2 * r * f.c) % q),
    )


def word_for_u(W, q: int) -> tuple:
    """u(W) = J^{-1} l(-W) J, so rho(u(W)) = rho(J)^{-1} rho(l(-W)) rho(J)."""
    W = np.asarray(W, dtype=np.int64) % q
    return (("FINV",), ("L", (-W) % q), ("F",))


def word_for_gamma_generator(f: QuadForm, q: int, r: int, s: int) -> tuple:
    """g^{-(r)} g^{(s)} = l(-rC) u((s^{-1}-r^{-1}) B) l(sC) with B, C the
    DUL blocks of g(Q)."""
    from .symplectic import dul_factorize, symplectic_element

    fact = dul_factorize(symplectic_element(f, q))
    rinv, sinv = pow(r, -1, q), pow(s, -1, q)
    W = ((sinv - rinv) * fact.B) % q
    return (("L", (-r * fact.C) % q),) + word_for_u(W, q) + (("L", (s * fact.C) % q),)


def word_for_element(g, max_tries: int = 64, rng_seed: int = 0) -> tuple:
    """Token word for an arbitrary SpElement.

    If the D block is invertible, g = u(B D^{-1}) s(D^{-T}) l(D^{-1} C).
    Otherwise right-multiply by u(W) for random symmetric W until the new D
    block C W + D becomes invertible, and compensate with u(-W).
    """
    from .symplectic import SpElement, sp_u

    q = g.q
    rng = np.random.default_rng(rng_seed)
    suffix = ()
    h = g
    for _ in range(max_tries):
        if gcd(mat_det(h.D, q), q) == 1:
            break
        W = rng.integers(0, q, size=(4, 4))
        W = (np.triu(W) + np.triu(W, 1).T) % q
        h = h * sp_u(W, q)
        suffix = word_for_u((-W) % q, q) + suffix
    else:
        raise NotInvertible("could not regularize the D block")
    Dinv = mat_inverse(h.D, q)
    DTinv = mat_inverse(h.D.T % q, q)
    word = (
        word_for_u((h.B @ Dinv) % q, q)
        + (("S", DTinv),)
        + (("L", (Dinv @ h.C) % q),)
        + suffix
    )
    return word


# ---------------------------------------------------------------------------
# squarefree tensor/twist construction
# ---------------------------------------------------------------------------


class CrtSplitter:
    """Bijection between (Z/qZ)^4 grids and stacked per-prime grids for
    squarefree q = p_1 ... p_n."""

    def __init__(self, q: int):
        fact = factorize(q)
        if any(e > 1 for _, e in fact) or q % 2 == 0:
            raise ValueError("q must be odd and squarefree")
        self.q = q
        self.primes = [p for p, _ in fact]
        self.lams = [q // p for p in self.primes]
        # x -> (x mod p_1, ..., x mod p_n) and its inverse as index arrays
        self.residues = [np.arange(q) % p for p in self.primes]
        radix = np.zeros(tuple(self.primes), dtype=np.int64)
        for x in range(q):
            radix[tuple(x % p for p in self.primes)] = x
        self.value_of_residues = radix

    def _perm(self) -> list[int]:
        # interleaved axes (coord-major) -> grouped axes (prime-major)
        n = len(self.primes)
        return [c * n + i for i in range(n) for c in range(4)]

    def _radix_key(self) -> np.ndarray:
        # position of x's residue tuple in the C-order mixed-radix flattening
        mult = np.ones(len(self.primes), dtype=np.int64)
        for i in range(len(self.primes) - 2, -1, -1):
            mult[i] = mult[i + 1] * self.primes[i + 1]
        xs = np.arange(self.q, dtype=np.int64)
        key = np.zeros(self.q, dtype=np.int64)
        for p, m in zip(self.primes, mult):
            key += (xs % p) * m
        return key

    def split(self, f: np.ndarray) -> np.ndarray:
        """(q,)*4 -> (p_1,)*4 + ... + (p_n,)*4 with axes grouped by prime."""
        flat_x = self.value_of_residues.reshape(-1)
        g = f[np.ix_(flat_x, flat_x, flat_x, flat_x)]
        g = g.reshape(tuple(self.primes) * 4)
        return np.transpose(g, self._perm())

    def unsplit(self, g: np.ndarray) -> np.ndarray:
        h = np.transpose(g, np.argsort(self._perm()))
        h = h.reshape((self.q,) * 4)
        key = self._radix_key()
        return h[np.ix_(key, key, key, key)]


def _apply_prime_token(F: np.ndarray, token, p: int, lam: int, axes: tuple) -> np.ndarray:
    """Apply the sigma-twist of a token in the mod-p factor representation.

    Twists: s(E)^sigma = s(E); J^sigma = s(lam I) J; l(W)^sigma = l(lam^{-1} W).
    Prime multipliers: xi(l) = xi(J) = 1, xi(s(E)) = Legendre(det E, p).
    """
    from .ringcore import legendre

    om = np.exp(2j * np.pi * np.arange(p) / p)
    inv2 = pow(2, -1, p)
    kind = token[0]
    if kind == "L":
        W = (np.asarray(token[1], dtype=np.int64) * pow(lam, -1, p)) % p
        xs = []
        for k in range(4):
            sh = [1] * F.ndim
            sh[axes[k]] = p
            xs.append(np.arange(p, dtype=np.int64).reshape(sh))
        Qw = np.zeros((1,) * F.ndim, dtype=np.int64)
        for i in range(4):
            for j in range(4):
                if W[i, j]:
                    Qw = (Qw + W[i, j] * xs[i] * xs[j]) % p
        return om[(-inv2 * Qw) % p] * F

    if kind in ("F", "FINV"):
        # J^sigma = s(lam I) J acts as Fourier then x -> lam^{-1} x;
        # its inverse composes an extra x -> -x (both multipliers are +1).
        G = p**2 * np.fft.ifftn(F, axes=axes)
        scale = pow(lam, -1, p) if kind == "F" else (-pow(lam, -1, p)) % p
        gidx = (scale * np.arange(p)) % p
        ixr = [np.arange(s) for s in G.shape]
        for ax in axes:
            ixr[ax] = gidx
        return G[np.ix_(*ixr)]

    if kind == "S":
        E = np.asarray(token[1], dtype=np.int64) % p
        xi = legendre(mat_det(E, p), p)
        Einv = mat_inverse(E, p)
        idx = np.indices((p,) * 4).reshape(4, -1)
        gi = np.ravel_multi_index(tuple((Einv @ idx) % p), (p,) * 4)
        Fm = np.moveaxis(F, axes, (0, 1, 2, 3))
        sh = Fm.shape
        Fg = Fm.reshape(p**4, -1)[gi].reshape(sh)
        return np.moveaxis(xi * Fg, (0, 1, 2, 3), axes)

    raise ValueError(f"unknown token {token!r}")


def apply_word_squarefree(f: np.ndarray, word, q: int) -> np.ndarray:
    """Apply a word through the tensor/twist construction: split f along CRT
    coordinates, act with the sigma_i-twisted prime words, recombine."""
    splitter = CrtSplitter(q)
    F = splitter.split(np.asarray(f, dtype=np.complex128))
    n = len(splitter.primes)
    for token in reversed(word):
        for i, p in enumerate(splitter.primes):
            axes = tuple(range(4 * i, 4 * i + 4))
            F = _apply_prime_token(F, token, p, splitter.lams[i], axes)
    return splitter.unsplit(F)


def squarefree_consistency(word, q: int, f: np.ndarray) -> float:
    """Max pointwise deviation between the global action and the CRT-split
    twisted construction (should be ~1e-15: the multiplier conventions agree
    exactly, not only up to phase)."""
    g1 = apply_word(f, word, q)
    g2 = apply_word_squarefree(f, word, q)
    return float(np.abs(g1 - g2).max())
