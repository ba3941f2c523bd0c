"""The group generated by g^{-(r)} g^{(s)}, its algebra structure, and
quasirandomness certificates for the restricted Weil action.

The conjugate picture: with tau = [[I,0],[0,B]] and the DUL blocks B, C of
g(Q) (so BC = Delta mod p), every generator satisfies
    tau (g^{-(r)} g^{(s)}) tau^{-1} = [[I,0],[-r Delta,I]] [[I,-r^{-1}I],[0,I]]
                                      [[I,s^{-1}I],[0,I]] [[I,0],[s Delta,I]],
an element of SL2(F_p[Delta]).  Membership testing solves each 4x4 block as
a polynomial in Delta; generation is probed by breadth-first closure.

A caution discovered while building this module: for p = 3 the unit group
has two elements, the two nontrivial generators are mutually inverse, and
the generated group is therefore cyclic - far smaller than SL2(F_3[Delta]).
The structure identification needs p >= 5 (the scalar-generation lemma's own
hypothesis), and the full 12-dimensional group is already too large to
enumerate at p = 5.  Order counts therefore verify per-factor generation
(scalar_generation_check), inclusion (algebra_membership), and the honest
cyclic closure at p = 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from .quadform import QuadForm, admissible_prime, delta_mod, is_generic, random_form
from .ringcore import FieldExt, crt_lift, factor_poly, charpoly_mod, mat_inverse, mat_mul
from .symplectic import (
    SpElement,
    dilate,
    dul_factorize,
    gamma_generator,
    m_theta,
    mat2_mul,
    sp_identity,
    symplectic_element,
    tau_matrix,
)
from .weilrep import apply_word, inner, l2_norm, word_for_gamma_generator


@dataclass(frozen=True)
class AlgebraDecomposition:
    p: int
    factor_degrees: tuple
    expected_order: int


def algebra_decomposition(form: QuadForm, p: int) -> AlgebraDecomposition:
    """Degrees of the irreducible factors of charpoly(Delta) mod p and the
    order of the product of the per-factor SL2 groups."""
    cp = charpoly_mod(delta_mod(form, p), p)
    factors = factor_poly(cp, p)
    if any(mult > 1 for _, mult in factors):
        raise ValueError(f"repeated factors mod {p}: inadmissible prime slipped through")
    degrees = tuple(sorted(len(f) - 1 for f, _ in factors))
    if sum(degrees) != 4:
        raise AssertionError("factor degrees must partition 4")
    order = 1
    for d in degrees:
        order *= p**d * (p ** (2 * d) - 1)
    return AlgebraDecomposition(p=p, factor_degrees=degrees, expected_order=order)


@dataclass
class GammaResult:
    mode: str  # "FULL_BFS" or "INCLUSION_ONLY"
    order: int | None
    expected_order: int
    structure_match: bool
    generators: list
    elements: frozenset | None = None


def gamma_generators(form: QuadForm, p: int) -> list[SpElement]:
    g = symplectic_element(form, p)
    out = []
    seen = set()
    for r in range(1, p):
        for s in range(1, p):
            el = gamma_generator(g, r, s)
            k = el.encode()
            if k not in seen:
                seen.add(k)
                out.append(el)
    return out


def generate_gamma(form: QuadForm, p: int, budget: int = 2_000_000) -> GammaResult:
    """BFS closure of the generators; degrades to membership checks when the
    predicted order exceeds the budget."""
    decomp = algebra_decomposition(form, p)
    gens = gamma_generators(form, p)
    if decomp.expected_order > budget:
        ok = all(algebra_membership(x, form, p) for x in gens)
        return GammaResult(
            mode="INCLUSION_ONLY",
            order=None,
            expected_order=decomp.expected_order,
            structure_match=ok,
            generators=gens,
        )
    known = {sp_identity(p).encode()}
    frontier = [sp_identity(p)]
    gen_mats = [g.m for g in gens]
    q = p
    while frontier:
        new = []
        for el in frontier:
            for gm in gen_mats:
                prod = (el.m @ gm) % q
                key = prod.astype("<u4").tobytes()
                if key not in known:
                    known.add(key)
                    new.append(SpElement(prod, q))
                    if len(known) > budget:
                        ok = all(algebra_membership(x, form, p) for x in gens)
                        return GammaResult(
                            mode="INCLUSION_ONLY",
                            order=None,
                            expected_order=decomp.expected_order,
                            structure_match=ok,
                            generators=gens,
                        )
        frontier = new
    return GammaResult(
        mode="FULL_BFS",
        order=len(known),
        expected_order=decomp.expected_order,
        structure_match=len(known) == decomp.expected_order,
        generators=gens,
        elements=frozenset(known),
    )


def _algebra_basis(form: QuadForm, p: int) -> np.ndarray:
    """Columns: I, Delta, Delta^2, Delta^3 flattened (16 x 4 mod p)."""
    d = delta_mod(form, p)
    cols = [np.eye(4, dtype=np.int64) % p]
    for _ in range(3):
        cols.append(mat_mul(cols[-1], d, p))
    return np.stack([c.reshape(16) for c in cols], axis=1)


def _solve_in_span(basis: np.ndarray, vec: np.ndarray, p: int):
    """Solve basis @ x = vec mod p (16 equations, 4 unknowns) or None."""
    aug = np.concatenate([basis, vec.reshape(16, 1)], axis=1) % p
    aug = aug.astype(np.int64)
    rows, cols = aug.shape
    r = 0
    pivots = []
    for c in range(4):
        piv = next((i for i in range(r, rows) if aug[i, c] % p), None)
        if piv is None:
            continue
        aug[[r, piv]] = aug[[piv, r]]
        aug[r] = aug[r] * pow(int(aug[r, c]), -1, p) % p
        for i in range(rows):
            if i != r and aug[i, c]:
                aug[i] = (aug[i] - aug[i, c] * aug[r]) % p
        pivots.append(c)
        r += 1
    # consistency: zero rows of the basis part must have zero rhs
    for i in range(rows):
        if not aug[i, :4].any() and aug[i, 4] % p:
            return None
    x = np.zeros(4, dtype=np.int64)
    for row_idx, c in enumerate(pivots):
        x[c] = aug[row_idx, 4]
    return x


def algebra_membership(x: SpElement, form: QuadForm, p: int) -> bool:
    """Is tau x tau^{-1} a 2x2 matrix over F_p[Delta] with determinant 1?"""
    tau = tau_matrix(form, p)
    tau_inv = mat_inverse(tau, p)
    y = mat_mul(mat_mul(tau, x.m, p), tau_inv, p)
    basis = _algebra_basis(form, p)
    blocks = [y[:4, :4], y[:4, 4:], y[4:, :4], y[4:, 4:]]
    for blk in blocks:
        if _solve_in_span(basis, blk.reshape(16) % p, p) is None:
            return False
    A, B, C, D = blocks
    det = (mat_mul(A, D, p) - mat_mul(B, C, p)) % p
    return np.array_equal(det, np.eye(4, dtype=np.int64) % p)


# ---------------------------------------------------------------------------
# scalar generation in SL2 over extension fields
# ---------------------------------------------------------------------------


def scalar_generation_check(p: int, d: int, theta: int | None = None, budget: int = 10_000_000) -> dict:
    """BFS closure of {M_theta(r, s) : r, s units of F_p} inside
    SL2(F_{p^d}); confirms the order equals p^d (p^{2d} - 1)."""
    field = FieldExt(p, d)
    if theta is None:
        theta = field.gen if d > 1 else field.scalar(2)
    if theta in (field.zero, field.scalar(p - 1)):
        raise ValueError("theta must avoid 0 and -1")
    expected = p**d * (p ** (2 * d) - 1)
    if expected > budget:
        raise ValueError(f"group order {expected} exceeds budget {budget}")
    gens = []
    seen = set()
    for r in range(1, p):
        for s in range(1, p):
            if r == s:
                continue
            M = m_theta(field, theta, r, s)
            if M not in seen:
                seen.add(M)
                gens.append(M)
    qf = field.q
    mul_t, add_t = field.mul_table, field.add_table

    def mul_batch(X, g):
        a, b, c, dd = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
        e, f, gg, h = g
        return np.stack(
            [
                add_t[mul_t[a, e], mul_t[b, gg]],
                add_t[mul_t[a, f], mul_t[b, h]],
                add_t[mul_t[c, e], mul_t[dd, gg]],
                add_t[mul_t[c, f], mul_t[dd, h]],
            ],
            axis=1,
        )

    def keys(X):
        return X[:, 0] * qf**3 + X[:, 1] * qf**2 + X[:, 2] * qf + X[:, 3]

    ident = np.array([[field.one, field.zero, field.zero, field.one]], dtype=np.int64)
    known = set(keys(ident).tolist())
    frontier = ident
    while len(frontier):
        batches = [mul_batch(frontier, g) for g in gens]
        allnew = np.concatenate(batches, axis=0)
        k = keys(allnew)
        uniq, first = np.unique(k, return_index=True)
        fresh = [i for u, i in zip(uniq.tolist(), first.tolist()) if u not in known]
        known.update(int(keys(allnew[i : i + 1])[0]) for i in fresh)
        frontier = allnew[fresh]
        if len(known) > budget:
            raise RuntimeError("BFS exceeded budget")
    return {
        "p": p,
        "d": d,
        "theta": theta,
        "order": len(known),
        "expected": expected,
        "match": len(known) == expected,
    }


# ---------------------------------------------------------------------------
# invariant vectors of the restricted representation
# ---------------------------------------------------------------------------


def _gamma_words(form: QuadForm, p: int, num_generators: int | None):
    pairs = [(r, s) for r in range(1, p) for s in range(1, p) if r != s]
    if num_generators is not None:
        pairs = pairs[:num_generators]
    words = [word_for_gamma_generator(form, p, r, s) for r, s in pairs]
    inv_words = [word_for_gamma_generator(form, p, s, r) for r, s in pairs]
    return pairs, words, inv_words


def _batched_apply(word, q: int, mat: np.ndarray) -> np.ndarray:
    """Apply a token word to every row of `mat` (rows are flattened vectors)."""
    n = mat.shape[0]
    arr = mat.reshape((n,) + (q,) * 4)
    return apply_word(arr, word, q).reshape(n, q**4)


def sigma_min_stack(words, inv_words, q: int, tol: float = 1e-7) -> float:
    """Smallest singular value of the stacked maps (rho(gamma_i) - I),
    computed as sqrt(lambda_min(sum_i (2I - rho_i - rho_i^{-1})))."""
    dim = q**4
    if dim <= 1500:
        G = np.zeros((dim, dim), dtype=np.complex128)
        ident = np.eye(dim, dtype=np.complex128)
        for wrd, iwrd in zip(words, inv_words):
            G += 2 * ident - _batched_apply(wrd, q, ident).T - _batched_apply(iwrd, q, ident).T
        lam = np.linalg.eigvalsh(G)[0]
        return float(np.sqrt(max(lam.real, 0.0)))
    # matrix-free LOBPCG for larger dimensions
    from scipy.sparse.linalg import LinearOperator, lobpcg

    def matvec_block(V):
        V = np.asarray(V)
        cols = V.T  # (k, dim)
        out = 2 * len(words) * cols.astype(np.complex128)
        for wrd, iwrd in zip(words, inv_words):
            out = out - _batched_apply(wrd, q, cols) - _batched_apply(iwrd, q, cols)
        return out.T

    op = LinearOperator((dim, dim), matvec=lambda v: matvec_block(v.reshape(dim, 1)).reshape(dim), matmat=matvec_block, dtype=np.complex128)
    rng = np.random.default_rng(5)
    X = rng.standard_normal((dim, 6)) + 1j * rng.standard_normal((dim, 6))
    vals, _ = lobpcg(op, X, largest=False, tol=tol, maxiter=400)
    return float(np.sqrt(max(float(np.min(vals.real)), 0.0)))


def common_unimodular_eigenvector(apply_ops, dim: int, q: int, seed: int = 0, tol: float = 1e-6) -> bool:
    """Phase-robust detector: does the family share an eigenvector?

    Candidates are the eigenvectors of a random Hermitian combination of the
    first few operators (any common eigenvector of the family is an
    eigenvector of every such combination); each candidate is then verified
    against every operator via equality in Cauchy-Schwarz:
    |<v, U v>| = 1 iff v is a U-eigenvector.
    """
    rng = np.random.default_rng(seed)
    probe = apply_ops[: min(3, len(apply_ops))]
    M = np.zeros((dim, dim), dtype=np.complex128)
    ident = np.eye(dim, dtype=np.complex128)
    for op in probe:
        U = op(ident.reshape((dim,) + (q,) * 4)).reshape(dim, dim).T
        w1, w2 = rng.standard_normal(2)
        M += w1 * (U + U.conj().T) + w2 * 1j * (U - U.conj().T)
    _, vecs = np.linalg.eigh(M)
    V = vecs.T  # candidates as rows, orthonormal in the counting norm
    ok = np.ones(len(V), dtype=bool)
    for op in apply_ops:
        W = op(V.reshape((len(V),) + (q,) * 4)).reshape(len(V), dim)
        coeff = np.abs(np.sum(V.conj() * W, axis=1))  # |<v, U v>| counting norm
        ok &= coeff >= 1.0 - tol
        if not ok.any():
            return False
    return bool(ok.any())


@dataclass
class InvariantVectorReport:
    p: int
    sigma_min: float
    passed: bool
    phase_robust_passed: bool
    modes_agree: bool
    num_generators: int


def invariant_vector_check(form: QuadForm, p: int, num_generators: int | None = None, threshold: float = 0.05) -> InvariantVectorReport:
    """No nontrivial invariant vector for the generator family: sigma_min of
    the stacked (rho(gamma_i) - I) must clear the threshold, and the
    phase-robust mode must agree."""
    if p**4 > 20000:
        raise ValueError("dimension cap p^4 <= 20000 exceeded")
    if not admissible_prime(form, p):
        raise ValueError(f"form not admissible at {p}")
    pairs, words, inv_words = _gamma_words(form, p, num_generators)
    sig = sigma_min_stack(words, inv_words, p)
    ops = [lambda arr, w=w: apply_word(arr, w, p) for w in words]
    has_common = common_unimodular_eigenvector(ops, p**4, p)
    passed = sig > threshold
    return InvariantVectorReport(
        p=p,
        sigma_min=sig,
        passed=passed,
        phase_robust_passed=not has_common,
        modes_agree=(passed == (not has_common)),
        num_generators=len(pairs),
    )


# ---------------------------------------------------------------------------
# support conditions
# ---------------------------------------------------------------------------


def support_condition_check(form: QuadForm, p: int, delta_override=None) -> bool:
    """Over F_p^4: x^T C Delta^j x = 0 for j = 0..3 forces x = 0, and
    likewise x^T Delta^{j+1} B x = 0 forces x = 0 (B, C the DUL blocks)."""
    if p**4 > 10_000_000:
        raise ValueError("p^4 cap exceeded")
    fact = dul_factorize(symplectic_element(form, p))
    B, C = fact.B, fact.C
    delta = mat_mul(B, C, p) if delta_override is None else np.asarray(delta_override, dtype=np.int64) % p
    X = np.indices((p,) * 4).reshape(4, -1).astype(np.int64)

    def only_zero_solution(mats) -> bool:
        alive = np.ones(X.shape[1], dtype=bool)
        for M in mats:
            vals = np.einsum("in,ij,jn->n", X, M % p, X) % p
            alive &= vals == 0
        return int(alive.sum()) == 1  # only the origin

    dj = np.eye(4, dtype=np.int64) % p
    c_family = []
    bu_family = []
    for j in range(4):
        c_family.append(mat_mul(C, dj, p))
        bu_family.append(mat_mul(mat_mul(delta, dj, p), B, p))
        dj = mat_mul(dj, delta, p)
    return only_zero_solution(c_family) and only_zero_solution(bu_family)


# ---------------------------------------------------------------------------
# product structure over two primes
# ---------------------------------------------------------------------------


def _bfs_with_words(form: QuadForm, p: int, budget: int):
    g = symplectic_element(form, p)
    pair_list = [(r, s) for r in range(1, p) for s in range(1, p) if r != s]
    gens = [(rs, gamma_generator(g, *rs)) for rs in pair_list]
    words = {sp_identity(p).encode(): ()}
    frontier = [sp_identity(p)]
    while frontier and len(words) < budget:
        new = []
        for el in frontier:
            base = words[el.encode()]
            for rs, gm in gens:
                prod = (el.m @ gm.m) % p
                key = prod.astype("<u4").tobytes()
                if key not in words:
                    words[key] = base + (rs,)
                    new.append(SpElement(prod, p))
                    if len(words) >= budget:
                        break
            if len(words) >= budget:
                break
        frontier = new
    closed = not frontier or len(words) < budget
    return words, closed


def gamma_product_check(form: QuadForm, p1: int, p2: int, n_pairs: int = 100, budget: int = 20000, seed: int = 0) -> dict:
    """Constructive check that independently chosen targets in the two prime
    factors are hit by one word mod q = p1 p2: pad the per-prime words with
    identity generators (r = s), lift the exponents by CRT, evaluate mod q,
    and compare projections."""
    if p1 == p2:
        raise ValueError("need distinct primes")
    for p in (p1, p2):
        if not admissible_prime(form, p):
            raise ValueError(f"prime {p} not admissible")
    q = p1 * p2
    words1, closed1 = _bfs_with_words(form, p1, budget)
    words2, closed2 = _bfs_with_words(form, p2, budget)
    rng = np.random.default_rng(seed)
    keys1 = list(words1)
    keys2 = list(words2)
    g_q = symplectic_element(form, q)
    hits = 0
    for _ in range(n_pairs):
        k1 = keys1[rng.integers(len(keys1))]
        k2 = keys2[rng.integers(len(keys2))]
        w1 = list(words1[k1])
        w2 = list(words2[k2])
        n = max(len(w1), len(w2))
        w1 += [(1, 1)] * (n - len(w1))
        w2 += [(1, 1)] * (n - len(w2))
        acc = sp_identity(q)
        for (r1, s1), (r2, s2) in zip(w1, w2):
            r, _ = crt_lift([(r1, p1), (r2, p2)])
            s, _ = crt_lift([(s1, p1), (s2, p2)])
            acc = acc * gamma_generator(g_q, r, s)
        proj1 = (acc.m % p1).astype("<u4").tobytes()
        proj2 = (acc.m % p2).astype("<u4").tobytes()
        if proj1 == k1 and proj2 == k2:
            hits += 1
    return {
        "p1": p1,
        "p2": p2,
        "pairs_checked": n_pairs,
        "hits": hits,
        "all_hit": hits == n_pairs,
        "exploration": {p1: "full" if closed1 else "partial", p2: "full" if closed2 else "partial"},
    }


# ---------------------------------------------------------------------------
# deterministic search for test forms
# ---------------------------------------------------------------------------


def gamma_element_order(form: QuadForm, p: int, r: int = 1, s: int = 2, cap: int = 512) -> int | None:
    """Order of g^{-(r)} g^{(s)} in Sp8(Z/pZ), or None when above the cap."""
    g = symplectic_element(form, p)
    el = gamma_generator(g, r, s)
    acc = el
    ident = sp_identity(p)
    for k in range(1, cap + 1):
        if acc == ident:
            return k
        acc = acc * el
    return None


def search_test_form(
    p: int,
    degrees: tuple | None = None,
    max_gamma_order: int | None = None,
    exact_gamma_order: int | None = None,
    seed: int = 0,
    bound: int = 3,
    tries: int = 20000,
) -> QuadForm:
    """Deterministic randomized search for a form with b = c = I that is
    generic over Q, admissible at p, and (optionally) has a prescribed
    algebra decomposition and generator order."""
    rng = np.random.default_rng(seed)
    eye = np.eye(4, dtype=np.int64)
    for _ in range(tries):
        a = rng.integers(-bound, bound + 1, size=(4, 4))
        a = np.triu(a) + np.triu(a, 1).T
        form = QuadForm(a=a, b=eye, c=eye)
        if not is_generic(form).generic:
            continue
        if not admissible_prime(form, p):
            continue
        if degrees is not None:
            if algebra_decomposition(form, p).factor_degrees != tuple(sorted(degrees)):
                continue
        if exact_gamma_order is not None or max_gamma_order is not None:
            cap = exact_gamma_order or max_gamma_order
            order = gamma_element_order(form, p, cap=2 * cap)
            if order is None:
                continue
            if exact_gamma_order is not None and order != exact_gamma_order:
                continue
            if max_gamma_order is not None and order > max_gamma_order:
                continue
        return form
    raise RuntimeError(f"no suitable form found at p={p} within {tries} tries")
