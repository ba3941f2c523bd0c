"""Complete exponential sums T_{f1,f2}(r), the unitary map Phi_r, quadratic
Gauss sums, half-complete sums over boxes, and the dilate-average experiments.

Two evaluation paths exist for T: the O(q^5) pipeline
(modulate by e_q(r y^T c y) -> axis DFTs -> reindex x -> r b^T x -> modulate
by e_q(r x^T a x) -> pair with f1) and the O(q^8) direct double sum, kept as
ground truth.  For diagonal forms and tensor-product test vectors there is a
third route: the value distribution of Q splits into a cyclic convolution of
four pair distributions, which yields T(r) for every r from a single
length-q FFT; the prime sweeps use it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .quadform import QuadForm, admissible_prime
from .ringcore import Modulus, is_prime, legendre, mat_det
from .weilrep import (
    _omega,
    apply_word,
    coord_grid,
    inner,
    l2_norm,
    quad_phase_table,
    random_unit_vector,
    word_for_dilated_form,
)


def _is_diagonal(m) -> bool:
    m = np.asarray(m)
    return np.count_nonzero(m - np.diag(np.diagonal(m))) == 0


def phi_r(f: np.ndarray, r: int, form: QuadForm, q: int) -> np.ndarray:
    """Phi_r f(x) = q^2 E_y f(y) e_q(r Q(x,y)); unitary when gcd(q, det b)=1."""
    om = _omega(q)
    h = om[(r * quad_phase_table(form.c, q)) % q] * f
    H = q**2 * np.fft.ifftn(h)
    bt = form.b.T % q
    if _is_diagonal(bt):
        idx = [(r * int(bt[i, i]) * np.arange(q)) % q for i in range(4)]
        G = H[np.ix_(*idx)]
    else:
        gi = (r * (bt @ coord_grid(q))) % q
        G = H.reshape(-1)[np.ravel_multi_index(tuple(gi), (q,) * 4)].reshape((q,) * 4)
    return om[(r * quad_phase_table(form.a, q)) % q] * G


def t_sum_pipeline(f1: np.ndarray, f2: np.ndarray, r: int, form: QuadForm, q: int) -> complex:
    return complex(np.mean(f1 * phi_r(f2, r, form, q)))


def t_sum_direct(f1, f2, r: int, form: QuadForm, q: int, block: int = 64) -> complex:
    """The O(q^8) double sum, blocked over x; the correctness oracle."""
    om = _omega(q)
    X = coord_grid(q)
    Qa = np.einsum("in,ij,jn->n", X, form.a % q, X) % q
    Qc = np.einsum("in,ij,jn->n", X, form.c % q, X) % q
    cross_rows = (X.T @ (form.b % q)) % q  # row x -> x^T b
    f1f = np.asarray(f1).reshape(-1)
    f2f = np.asarray(f2).reshape(-1)
    total = 0.0 + 0.0j
    n = q**4
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        phases = (r * (Qa[lo:hi, None] + cross_rows[lo:hi] @ X + Qc[None, :])) % q
        total += np.sum(f1f[lo:hi, None] * f2f[None, :] * om[phases])
    return complex(total * q**2 / q**8)


@dataclass
class ExpSumReport:
    q: int
    r: int
    value: complex
    abs: float
    trivial_bound: float


def trivial_bound(f1, f2, q: int, form: QuadForm) -> float:
    return gcd(q, abs(form.det_b)) ** 2 * l2_norm(f1) * l2_norm(f2)


def t_sum(f1, f2, r: int, form: QuadForm, q: int, method: str = "auto") -> ExpSumReport:
    """T_{f1,f2}(r) = q^2 E_{x,y} f1(x) f2(y) e_q(r Q(x,y)) for a unit r."""
    if gcd(r % q, q) != 1:
        raise ValueError(f"r = {r} is not a unit mod {q}")
    if method == "auto":
        method = "pipeline"
    if method == "pipeline":
        val = t_sum_pipeline(f1, f2, r, form, q)
    elif method == "direct":
        val = t_sum_direct(f1, f2, r, form, q)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ExpSumReport(q=q, r=r, value=val, abs=abs(val), trivial_bound=trivial_bound(f1, f2, q, form))


def sharpness_pair(form: QuadForm, q: int, rng: np.random.Generator, r: int = 1):
    """(f1, f2) attaining |T(r)| = ||f1|| = ||f2|| = 1 when gcd(q, det b) = 1:
    f2 = psi random unit, f1 = conj(Phi_r psi)."""
    psi = random_unit_vector(q, rng)
    return np.conj(phi_r(psi, r, form, q)), psi


def matrix_coeff_identity_check(f1, f2, form: QuadForm, q: int) -> list[dict]:
    """For every unit r compare |T_{f1,f2}(r)| with |<conj(f1), rho(g^{(r)}) f2>|.

    The operator side uses the generator word of the dilated symplectic
    element; q must be odd squarefree and coprime to det b.
    """
    mod = Modulus(q)
    if not mod.squarefree or gcd(form.det_b % q, q) != 1:
        raise ValueError("need q odd squarefree with gcd(q, det b) = 1")
    rows = []
    for r in mod.units():
        t = t_sum_pipeline(f1, f2, r, form, q)
        rho_f2 = apply_word(f2, word_for_dilated_form(form, q, r), q)
        mc = inner(np.conj(f1), rho_f2)
        rows.append(
            {
                "r": r,
                "abs_t": abs(t),
                "abs_coeff": abs(mc),
                "gap": abs(abs(t) - abs(mc)),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# quadratic Gauss sums over F_p
# ---------------------------------------------------------------------------


def _congruence_diagonalize(M: np.ndarray, p: int):
    """U with U^T M U diagonal (odd p); returns (diag entries, U)."""
    n = M.shape[0]
    A = M.copy() % p
    U = np.eye(n, dtype=np.int64)
    inv2 = pow(2, -1, p)
    for k in range(n):
        if A[k, k] % p == 0:
            j = next((j for j in range(k + 1, n) if A[j, j] % p), None)
            if j is not None:
                A[[k, j]] = A[[j, k]]
                A[:, [k, j]] = A[:, [j, k]]
                U[:, [k, j]] = U[:, [j, k]]
            else:
                j = next((j for j in range(k + 1, n) if A[k, j] % p), None)
                if j is None:
                    continue  # remaining block is zero
                # x_j -> x_j + x_k turns the (k,k) entry into 2 A[k,j] != 0
                A[k, :] = (A[k, :] + A[j, :]) % p
                A[:, k] = (A[:, k] + A[:, j]) % p
                U[:, k] = (U[:, k] + U[:, j]) % p
        d = A[k, k] % p
        if d == 0:
            continue
        dinv = pow(int(d), -1, p)
        for j in range(k + 1, n):
            f = A[k, j] * dinv % p
            if f:
                A[:, j] = (A[:, j] - f * A[:, k]) % p
                A[j, :] = (A[j, :] - f * A[k, :]) % p
                U[:, j] = (U[:, j] - f * U[:, k]) % p
    return np.diagonal(A) % p, U % p


def gauss_sum_quadratic(M, shift, p: int) -> complex:
    """sum_{x in F_p^n} e_p(x^T M x + shift^T x), exact up to float rounding.

    Diagonalize by congruence, complete the square on nondegenerate
    directions (each contributes chi(d) g_p e_p(-s^2/4d) with g_p the
    classical Gauss sum), and count the radical exactly.
    """
    if p == 2 or not is_prime(p):
        raise ValueError("gauss_sum_quadratic needs an odd prime")
    M = np.asarray(M, dtype=np.int64) % p
    n = M.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    shift = np.zeros(n, dtype=np.int64) if shift is None else np.asarray(shift, dtype=np.int64) % p
    d, U = _congruence_diagonalize(M, p)
    s = (U.T @ shift) % p
    g_p = np.sqrt(p) * (1.0 if p % 4 == 1 else 1.0j)
    om = _omega(p)
    inv4 = pow(4, -1, p)
    total = 1.0 + 0.0j
    for k in range(n):
        dk, sk = int(d[k]), int(s[k])
        if dk == 0:
            if sk == 0:
                total *= p
            else:
                return 0.0 + 0.0j
        else:
            phase = om[(-sk * sk * inv4 * pow(dk, -1, p)) % p]
            total *= legendre(dk, p) * g_p * phase
    return complex(total)


# ---------------------------------------------------------------------------
# tensor-pair fast path (diagonal forms)
# ---------------------------------------------------------------------------


@dataclass
class TensorPair:
    """f1 = u1 x u2 x u3 x u4 and f2 = v1 x ... as rank-one test vectors,
    each factor normalized to mean-square 1 so the products are unit."""

    u: list
    v: list

    @staticmethod
    def random(q: int, rng: np.random.Generator) -> "TensorPair":
        def unit(w):
            return w / np.sqrt(np.mean(np.abs(w) ** 2))

        u = [unit(rng.standard_normal(q) + 1j * rng.standard_normal(q)) for _ in range(4)]
        v = [unit(rng.standard_normal(q) + 1j * rng.standard_normal(q)) for _ in range(4)]
        return TensorPair(u=u, v=v)

    def dense(self, which: str = "u") -> np.ndarray:
        w = self.u if which == "u" else self.v
        return w[0][:, None, None, None] * w[1][None, :, None, None] * w[2][None, None, :, None] * w[3][None, None, None, :]


def _pair_kernel(a_i: int, b_i: int, c_i: int, r: int, q: int) -> np.ndarray:
    """The q x q unitary factor q^{-1/2} e_q(r (a x^2 + b x y + c y^2))."""
    x = np.arange(q)
    ph = (r * (a_i * x[:, None] ** 2 + b_i * x[:, None] * x[None, :] + c_i * x[None, :] ** 2)) % q
    return _omega(q)[ph] / np.sqrt(q)


def t_table_tensor(form: QuadForm, q: int, pair: TensorPair) -> np.ndarray:
    """T(r) for all r in Z/qZ at once, for a diagonal form and tensor pair.

    The value distribution of Q under f1 (x) f2 is the cyclic convolution of
    the four coordinate-pair distributions; one length-q DFT then gives the
    whole table.
    """
    if not (_is_diagonal(form.a) and _is_diagonal(form.b) and _is_diagonal(form.c)):
        raise ValueError("tensor path needs a, b, c all diagonal")
    ad, bd, cd = np.diagonal(form.a), np.diagonal(form.b), np.diagonal(form.c)
    x = np.arange(q)
    w = None
    for i in range(4):
        Qi = (int(ad[i]) * x[:, None] ** 2 + int(bd[i]) * x[:, None] * x[None, :] + int(cd[i]) * x[None, :] ** 2) % q
        outer = pair.u[i][:, None] * pair.v[i][None, :]
        wi = np.zeros(q, dtype=np.complex128)
        np.add.at(wi, Qi.reshape(-1), outer.reshape(-1))
        w = wi if w is None else np.fft.ifft(np.fft.fft(w) * np.fft.fft(wi))
    # cyclic convolution of the four tables; T(r) = q^{-6} sum_t w[t] e_q(rt)
    return q * np.fft.ifft(w) / q**6


def sharpness_pair_tensor(form: QuadForm, q: int, rng: np.random.Generator) -> TensorPair:
    ad, bd, cd = np.diagonal(form.a), np.diagonal(form.b), np.diagonal(form.c)

    def unit(w):
        return w / np.sqrt(np.mean(np.abs(w) ** 2))

    v = [unit(rng.standard_normal(q) + 1j * rng.standard_normal(q)) for _ in range(4)]
    # f1 = conj(Phi_1 f2) factors as conj(M_i(1) v_i) per coordinate
    u = [np.conj(_pair_kernel(int(ad[i]), int(bd[i]), int(cd[i]), 1, q) @ v[i]) for i in range(4)]
    return TensorPair(u=u, v=v)


# ---------------------------------------------------------------------------
# dilate averages and the prime sweep
# ---------------------------------------------------------------------------


@dataclass
class AverageDecayReport:
    q: int
    avg: float
    max_pair_avg: float
    sharp_avg: float
    per_r: list
    trials: int
    seed: int
    mode: str
    empirical_exponent: float | None = None
    exponent_stderr: float | None = None


def check_admissible_modulus(form: QuadForm, q: int) -> None:
    bad = [p for p, _ in Modulus(q).factorization if not admissible_prime(form, p)]
    if bad or not Modulus(q).squarefree:
        raise ValueError(f"modulus {q} not admissible for this form (failing primes: {bad})")


def _pair_average(form: QuadForm, q: int, rng: np.random.Generator, mode: str):
    units = Modulus(q).units()
    if mode == "tensor":
        pair = TensorPair.random(q, rng)
        table = t_table_tensor(form, q, pair)
        per_r = np.abs(table[units])
    else:
        f1 = random_unit_vector(q, rng)
        f2 = random_unit_vector(q, rng)
        per_r = np.array([abs(t_sum_pipeline(f1, f2, r, form, q)) for r in units])
    return units, per_r


def _sharp_average(form: QuadForm, q: int, rng: np.random.Generator, mode: str) -> float:
    units = Modulus(q).units()
    if mode == "tensor":
        pair = sharpness_pair_tensor(form, q, rng)
        table = t_table_tensor(form, q, pair)
        return float(np.mean(np.abs(table[units])))
    f1, f2 = sharpness_pair(form, q, rng)
    return float(np.mean([abs(t_sum_pipeline(f1, f2, r, form, q)) for r in units]))


def average_over_dilates(
    form: QuadForm,
    q: int,
    trials: int = 4,
    seed: int = 0,
    vector_mode: str = "auto",
    threads: int = 1,
) -> AverageDecayReport:
    """(1/phi(q)) sum_r |T_{f1,f2}(r)| for random unit-norm pairs plus the
    sharpness pair.  vector_mode: 'dense' (Gaussian coordinates), 'tensor'
    (rank-one pairs, diagonal forms only), or 'auto' (tensor when the form is
    diagonal and q^4 is large)."""
    check_admissible_modulus(form, q)
    diag = _is_diagonal(form.a) and _is_diagonal(form.b) and _is_diagonal(form.c)
    if vector_mode == "auto":
        vector_mode = "tensor" if (diag and q**4 > 200_000) else "dense"
    if vector_mode == "tensor" and not diag:
        raise ValueError("tensor vector mode requires a diagonal form")

    def run_trial(t: int):
        rng = np.random.default_rng(seed + 1000003 * t)
        return _pair_average(form, q, rng, vector_mode)

    if threads > 1 and vector_mode == "dense":
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run_trial, range(trials)))
    else:
        results = [run_trial(t) for t in range(trials)]
    units = results[0][0]
    pair_avgs = [float(np.mean(per_r)) for _, per_r in results]
    sharp = _sharp_average(form, q, np.random.default_rng(seed + 777), vector_mode)
    return AverageDecayReport(
        q=q,
        avg=float(np.mean(pair_avgs)),
        max_pair_avg=float(np.max(pair_avgs)),
        sharp_avg=sharp,
        per_r=[{"r": r, "abs_t": float(v)} for r, v in zip(units, results[0][1])],
        trials=trials,
        seed=seed,
        mode=vector_mode,
    )


def fit_log_slope(qs, avgs) -> tuple[float, float]:
    """OLS slope and its standard error for log(avg) against log(q)."""
    x = np.log(np.asarray(qs, dtype=float))
    y = np.log(np.asarray(avgs, dtype=float))
    n = len(x)
    xc = x - x.mean()
    slope = float(np.sum(xc * (y - y.mean())) / np.sum(xc**2))
    icept = float(y.mean() - slope * x.mean())
    resid = y - (icept + slope * x)
    stderr = float(np.sqrt(np.sum(resid**2) / max(n - 2, 1) / np.sum(xc**2)))
    return slope, stderr


def average_decay_sweep(
    form: QuadForm,
    primes,
    trials: int = 4,
    seed: int = 0,
    vector_mode: str = "auto",
    threads: int = 1,
) -> list[AverageDecayReport]:
    reports = [
        average_over_dilates(form, p, trials=trials, seed=seed + i, vector_mode=vector_mode, threads=threads)
        for i, p in enumerate(primes)
    ]
    slope, stderr = fit_log_slope([r.q for r in reports], [r.avg for r in reports])
    for r in reports:
        r.empirical_exponent = slope
        r.exponent_stderr = stderr
    return reports


# ---------------------------------------------------------------------------
# half-complete sums over boxes
# ---------------------------------------------------------------------------


@dataclass
class WeightTable:
    """A finitely supported weight on [X]^4: integer points plus weights."""

    X: int
    points: np.ndarray  # (n, 4) int
    weights: np.ndarray  # (n,) complex

    @staticmethod
    def box(X: int, value: complex = 1.0) -> "WeightTable":
        g = np.stack(np.meshgrid(*[np.arange(1, X + 1)] * 4, indexing="ij"), axis=-1).reshape(-1, 4)
        return WeightTable(X=X, points=g, weights=np.full(len(g), value, dtype=np.complex128))

    @staticmethod
    def from_predicate(X: int, pred) -> "WeightTable":
        coords = [n for n in range(1, X + 1) if pred(n)]
        g = np.stack(np.meshgrid(*[np.array(coords)] * 4, indexing="ij"), axis=-1).reshape(-1, 4)
        return WeightTable(X=X, points=g, weights=np.ones(len(g), dtype=np.complex128))


def s_theta(F1: WeightTable, F2: WeightTable, theta: float, form: QuadForm, budget: int = 2_000_000_000) -> complex:
    """S_{F1,F2}(theta) = sum_{x,y} F1(x) F2(y) e(theta Q(x,y)), exact to
    rounding, looped over the two supports."""
    if F1.X > 30 or F2.X > 30:
        raise ValueError("X above 30: restrict supports for direct evaluation")
    n1, n2 = len(F1.points), len(F2.points)
    if n1 * n2 > budget:
        raise ValueError("support product too large; restrict supports")
    x = F1.points.astype(np.int64)
    y = F2.points.astype(np.int64)
    Qa = np.einsum("ni,ij,nj->n", x, form.a, x)
    Qc = np.einsum("ni,ij,nj->n", y, form.c, y)
    xb = x @ form.b
    total = 0.0 + 0.0j
    theta = float(theta)
    block = max(1, int(5_000_000 / max(n2, 1)))
    for lo in range(0, n1, block):
        hi = min(lo + block, n1)
        Qv = Qa[lo:hi, None] + xb[lo:hi] @ y.T + Qc[None, :]
        total += np.sum(F1.weights[lo:hi, None] * F2.weights[None, :] * np.exp(2j * np.pi * theta * Qv))
    return complex(total)
