"""Sparse probability measures on finite matrix groups.

A measure is a dict from canonical element keys to weights, together with a
group context that knows how to multiply, invert, and encode elements.  The
counting-measure norm ||mu|| = (sum mu(x)^2)^{1/2} is used throughout (this
is the normalization appropriate for comparing against uniform measures on
subgroups, NOT the expectation norm used for amplitude vectors).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .ringcore import Modulus
from .symplectic import SpElement, dilate, symplectic_element


class ContextMismatch(ValueError):
    pass


class ConvolutionBudget(RuntimeError):
    """Exact convolution would exceed the product budget; use Monte Carlo."""


class SupportEscape(RuntimeError):
    """A measure's support left the reference group."""


class SpContext:
    """Group context for Sp8(Z/qZ) elements keyed by their byte encoding."""

    def __init__(self, q: int):
        self.q = q

    def mul(self, k1: bytes, k2: bytes) -> bytes:
        m1 = np.frombuffer(k1, dtype="<u4").astype(np.int64).reshape(8, 8)
        m2 = np.frombuffer(k2, dtype="<u4").astype(np.int64).reshape(8, 8)
        return ((m1 @ m2) % self.q).astype("<u4").tobytes()

    def inv(self, k: bytes) -> bytes:
        return SpElement.decode(k, self.q).inverse().encode()

    def identity(self) -> bytes:
        q = self.q
        return np.eye(8, dtype="<u4").tobytes()

    def __eq__(self, other):
        return isinstance(other, SpContext) and self.q == other.q


class TableContext:
    """Context for a small explicitly enumerated group: integer keys into a
    precomputed multiplication table."""

    def __init__(self, mul_table: np.ndarray, inv_table: np.ndarray, identity_index: int):
        self.mul_table = mul_table
        self.inv_table = inv_table
        self.identity_index = identity_index

    @staticmethod
    def from_elements(elems, mul, identity):
        """Build from a list of hashable elements and a multiplication callable."""
        index = {e: i for i, e in enumerate(elems)}
        n = len(elems)
        table = np.zeros((n, n), dtype=np.int64)
        for i, a in enumerate(elems):
            for j, b in enumerate(elems):
                table[i, j] = index[mul(a, b)]
        inv = np.zeros(n, dtype=np.int64)
        eidx = index[identity]
        for i in range(n):
            inv[i] = int(np.nonzero(table[i] == eidx)[0][0])
        return TableContext(table, inv, eidx), index

    def mul(self, k1: int, k2: int) -> int:
        return int(self.mul_table[k1, k2])

    def inv(self, k: int) -> int:
        return int(self.inv_table[k])

    def identity(self) -> int:
        return self.identity_index

    def __eq__(self, other):
        return self is other


@dataclass
class GroupMeasure:
    weights: dict
    ctx: object

    def __post_init__(self):
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, not 1")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("negative weight")

    @property
    def support_size(self) -> int:
        return len(self.weights)

    def mass(self) -> float:
        return float(sum(self.weights.values()))

    def norm(self) -> float:
        return sqrt(sum(w * w for w in self.weights.values()))

    def norm_sq(self) -> float:
        return float(sum(w * w for w in self.weights.values()))

    def linf(self) -> float:
        return max(self.weights.values())

    def opposite(self) -> "GroupMeasure":
        return GroupMeasure({self.ctx.inv(k): w for k, w in self.weights.items()}, self.ctx)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        opp = self.opposite().weights
        keys = set(self.weights) | set(opp)
        return all(abs(self.weights.get(k, 0.0) - opp.get(k, 0.0)) <= tol for k in keys)

    def measure_of(self, keys) -> float:
        return float(sum(self.weights.get(k, 0.0) for k in keys))

    def distance_to(self, other: "GroupMeasure") -> float:
        keys = set(self.weights) | set(other.weights)
        return sqrt(sum((self.weights.get(k, 0.0) - other.weights.get(k, 0.0)) ** 2 for k in keys))


def delta_measure(key, ctx) -> GroupMeasure:
    return GroupMeasure({key: 1.0}, ctx)


def uniform_measure(keys, ctx) -> GroupMeasure:
    keys = list(keys)
    w = 1.0 / len(keys)
    return GroupMeasure({k: w for k in keys}, ctx)


def dilate_measure(form, q: int) -> GroupMeasure:
    """mu_q: weight 1/phi(q) on each dilate g(Q)^{(r)}, r a unit."""
    mod = Modulus(q)
    g = symplectic_element(form, q)
    units = mod.units()
    w = 1.0 / len(units)
    weights: dict = {}
    for r in units:
        k = dilate(g, r).encode()
        weights[k] = weights.get(k, 0.0) + w
    return GroupMeasure(weights, SpContext(q))


def convolve(mu: GroupMeasure, nu: GroupMeasure, budget: int = 100_000_000) -> GroupMeasure:
    """Exact sparse convolution (mu * nu)(x) = sum_{g1 g2 = x} mu(g1) nu(g2)."""
    if mu.ctx != nu.ctx:
        raise ContextMismatch("measures live on different groups")
    n_products = mu.support_size * nu.support_size
    if n_products > budget:
        raise ConvolutionBudget(
            f"{n_products} products exceed budget {budget}; "
            "switch to monte_carlo_power for an empirical estimate"
        )
    out: dict = {}
    mul = mu.ctx.mul
    for k1, w1 in mu.weights.items():
        for k2, w2 in nu.weights.items():
            k = mul(k1, k2)
            out[k] = out.get(k, 0.0) + w1 * w2
    return GroupMeasure(out, mu.ctx)


def symmetrized_power(mu: GroupMeasure, m: int, budget: int = 100_000_000) -> GroupMeasure:
    """mu^{(m)} for even m: the alternating product mu° * mu * mu° * ... * mu
    with m factors.  Powers of two are computed by repeated squaring
    (mu^{(2m)} = mu^{(m)} * mu^{(m)})."""
    if m < 2 or m % 2:
        raise ValueError("symmetrized power needs an even order m >= 2")
    if m & (m - 1) == 0:
        out = convolve(mu.opposite(), mu, budget)
        while m > 2:
            out = convolve(out, out, budget)
            m //= 2
        return out
    out = None
    for i in range(m):
        f = mu.opposite() if i % 2 == 0 else mu
        out = f if out is None else convolve(out, f, budget)
    return out


def odd_symmetrized_power(mu: GroupMeasure, m: int, budget: int = 100_000_000) -> GroupMeasure:
    """mu^{(m)} for odd m (used only by the walk-step analysis)."""
    if m < 1 or m % 2 == 0:
        raise ValueError("need odd m")
    out = None
    for i in range(m):
        f = mu.opposite() if i % 2 == 0 else mu
        out = f if out is None else convolve(out, f, budget)
    return out


def monte_carlo_power(mu: GroupMeasure, m: int, samples: int, seed: int = 0) -> tuple[GroupMeasure, float]:
    """Empirical mu^{(m)} from `samples` independent alternating words; the
    second return is the per-cell standard error scale 1/sqrt(samples)."""
    rng = np.random.default_rng(seed)
    keys = list(mu.weights)
    probs = np.array([mu.weights[k] for k in keys])
    inv_keys = [mu.ctx.inv(k) for k in keys]
    counts: dict = {}
    draws = rng.choice(len(keys), size=(samples, m), p=probs)
    for row in draws:
        acc = None
        for i, j in enumerate(row):
            k = inv_keys[j] if i % 2 == 0 else keys[j]
            acc = k if acc is None else mu.ctx.mul(acc, k)
        counts[acc] = counts.get(acc, 0) + 1
    weights = {k: c / samples for k, c in counts.items()}
    return GroupMeasure(weights, mu.ctx), 1.0 / sqrt(samples)


# ---------------------------------------------------------------------------
# flattening profiles
# ---------------------------------------------------------------------------


@dataclass
class FlatteningLevel:
    j: int
    m: int
    norm_sq: float
    support_size: int
    fitted_alpha: float
    fitted_beta: int
    ratio_to_next: float | None = None
    stabilized: bool | None = None


@dataclass
class FlatteningProfile:
    p: int
    levels: list
    truncated: bool = False

    def stabilization_level(self, gamma_order: int | None = None) -> int | None:
        """First j with ||mu^(2^{j+1})|| >= (1 - p^{-1/2}) ||mu^(2^j)|| and,
        when the generated group's order is known, norm_sq within 2x of
        uniform (the pointwise-domination certificate's own threshold)."""
        for lev in self.levels:
            if lev.stabilized is None:
                continue
            if not lev.stabilized:
                continue
            if gamma_order is not None and lev.norm_sq > 2.0 / gamma_order + 1e-12:
                continue
            return lev.j
        return None

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "levels": [
                {
                    "j": l.j,
                    "norm_sq": l.norm_sq,
                    "support": l.support_size,
                    "alpha": l.fitted_alpha,
                    "beta": l.fitted_beta,
                }
                for l in self.levels
            ],
        }


def _fit_alpha_beta(norm_sq: float, p: int) -> tuple[float, int]:
    """Integer beta in [0, 36] with norm_sq ~ alpha p^{-beta}; ties toward
    larger beta (round-half-up on -log_p)."""
    t = -np.log(norm_sq) / np.log(p)
    beta = int(min(36, max(0, np.floor(t + 0.5))))
    return norm_sq * p**beta, beta


def flattening_profile(form, p: int, j_max: int = 6, budget: int = 100_000_000) -> FlatteningProfile:
    """Norms of mu_p^{(2^j)} for j = 1..j_max by repeated squaring."""
    mu = dilate_measure(form, p)
    levels = []
    cur = symmetrized_power(mu, 2, budget)
    truncated = False
    for j in range(1, j_max + 1):
        alpha, beta = _fit_alpha_beta(cur.norm_sq(), p)
        levels.append(
            FlatteningLevel(
                j=j,
                m=2**j,
                norm_sq=cur.norm_sq(),
                support_size=cur.support_size,
                fitted_alpha=alpha,
                fitted_beta=beta,
            )
        )
        if j == j_max:
            break
        try:
            cur = convolve(cur, cur, budget)
        except ConvolutionBudget:
            truncated = True
            break
    for i in range(len(levels) - 1):
        ratio = sqrt(levels[i + 1].norm_sq / levels[i].norm_sq)
        levels[i].ratio_to_next = ratio
        levels[i].stabilized = ratio >= 1.0 - p**-0.5
    return FlatteningProfile(p=p, levels=levels, truncated=truncated)


@dataclass
class UniformityCertificate:
    K: float
    sup_ratio: float
    linf_dist: float
    support_contained: bool


def uniformity_certificate(mu_power: GroupMeasure, gamma_keys) -> UniformityCertificate:
    """K = sup_x mu(x) |Gamma|, the L-infinity distance to uniform, and the
    support check; raises SupportEscape when the support leaves Gamma."""
    gamma = set(gamma_keys)
    n = len(gamma)
    escaped = [k for k in mu_power.weights if k not in gamma]
    if escaped:
        raise SupportEscape(f"{len(escaped)} support points outside the group")
    sup_ratio = max(mu_power.weights.values()) * n
    linf = max(
        max(abs(mu_power.weights.get(k, 0.0) - 1.0 / n) for k in gamma),
        max(mu_power.weights.values()) - 1.0 / n,
    )
    return UniformityCertificate(K=sup_ratio, sup_ratio=sup_ratio, linf_dist=linf, support_contained=True)


# ---------------------------------------------------------------------------
# recovery of an approximate subgroup from an almost-flat measure
# ---------------------------------------------------------------------------


@dataclass
class SubgroupRecovery:
    found: bool
    subgroup: frozenset | None
    residual: float | None
    note: str = ""


def _closure(seed_keys, ctx, cap: int):
    elems = set(seed_keys)
    elems.add(ctx.identity())
    frontier = list(elems)
    while frontier:
        new = []
        for a in frontier:
            for b in list(seed_keys):
                c = ctx.mul(a, b)
                if c not in elems:
                    elems.add(c)
                    new.append(c)
                    if len(elems) > cap:
                        return None
        frontier = new
    return elems


def recover_subgroup(mu: GroupMeasure, eps: float, budget: int = 100_000_000) -> SubgroupRecovery:
    """Follow the stability argument for almost-flat symmetric measures:
    threshold mu*mu at (1 - sqrt(eps)) ||mu||^2, take the best translate,
    symmetrize, and close under products (cap 4|S|)."""
    if not mu.is_symmetric(tol=1e-9):
        raise ValueError("recover_subgroup needs a symmetric measure")
    w = convolve(mu, mu, budget)
    thresh = (1.0 - sqrt(eps)) * mu.norm_sq()
    A = [k for k, v in w.weights.items() if v >= thresh - 1e-15]
    if not A:
        return SubgroupRecovery(False, None, None, "thresholded set empty")
    # best translate B = A y^{-1} over y in supp(mu)
    best_y, best_mass = None, -1.0
    ctx = mu.ctx
    for y in mu.weights:
        yinv = ctx.inv(y)
        mass = sum(mu.weights.get(ctx.mul(a, yinv), 0.0) for a in A)
        if mass > best_mass:
            best_mass, best_y = mass, y
    yinv = ctx.inv(best_y)
    B = {ctx.mul(a, yinv) for a in A}
    S = B & {ctx.inv(b) for b in B}
    if not S:
        return SubgroupRecovery(False, None, None, "symmetrized core empty")
    H = _closure(S, ctx, cap=max(4 * len(S), 8))
    if H is None:
        return SubgroupRecovery(False, None, None, "closure exceeded 4|S| cap")
    muH = uniform_measure(H, ctx)
    residual = mu.distance_to(muH) / muH.norm()
    return SubgroupRecovery(True, frozenset(H), residual)


# ---------------------------------------------------------------------------
# matrix coefficient averages
# ---------------------------------------------------------------------------


def matrix_coeff_average(mu: GroupMeasure, rho_eval, v: np.ndarray, w: np.ndarray) -> float:
    """int |<v, rho(x) w>| dmu(x); rho_eval maps a key to an operator
    callable.  v, w must be unit in the expectation norm."""
    from .weilrep import inner, l2_norm

    if abs(l2_norm(v) - 1.0) > 1e-9 or abs(l2_norm(w) - 1.0) > 1e-9:
        raise ValueError("v, w must be unit vectors")
    total = 0.0
    for k, weight in mu.weights.items():
        total += weight * abs(inner(v, rho_eval(k)(w)))
    return float(total)


def matrix_coeff_chain(mu: GroupMeasure, rho_eval, v: np.ndarray, w: np.ndarray, depth: int = 2, budget: int = 10_000_000):
    """The amplification chain: eta = int |<v, rho(x) w>| dmu, then
    I_k = int |<w, rho(x) w>| dmu^{(2^k)} must satisfy I_1 >= eta^2 and
    I_{k+1} >= I_k^2.  Returns (eta, [I_1, ..., I_depth])."""
    eta = matrix_coeff_average(mu, rho_eval, v, w)
    out = []
    power = symmetrized_power(mu, 2, budget)
    k = 1
    while True:
        val = 0.0
        for key, weight in power.weights.items():
            from .weilrep import inner

            val += weight * abs(inner(w, rho_eval(key)(w)))
        out.append(float(val))
        if k == depth:
            break
        power = convolve(power, power, budget)
        k += 1
    return eta, out


def schur_average_check(group_elems, rep_table, v: np.ndarray, w: np.ndarray, tol: float = 1e-8):
    """Exhaustive check of the Schur average
    E_g |<v, psi(g) w>|^2 = ||v||^2 ||w||^2 / dim psi
    for an irreducible unitary rep given as an explicit matrix table.
    Standard (counting) inner products here."""
    dim = rep_table[group_elems[0]].shape[0]
    lhs = 0.0
    for g in group_elems:
        lhs += abs(np.vdot(v, rep_table[g] @ w)) ** 2
    lhs /= len(group_elems)
    rhs = (np.vdot(v, v).real * np.vdot(w, w).real) / dim
    return float(lhs), float(rhs), bool(abs(lhs - rhs) <= tol * max(1.0, abs(rhs)))
