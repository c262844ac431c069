"""Numerical checks for the Kaczmarz-product identities and bounds.

Everything here is dense linear algebra on small instances: the multi-step
error identity of one Kaczmarz epoch, the higher-order ("cross") part of the
epoch's product of projections, brute-force restricted isometry constants,
and the noise floor ``sup_{|S| <= 2s} ||P_S(A^T e / m)||``.
"""
import hashlib
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import hard_threshold, random_sparse_signal
from .errors import InvalidArgument, SizeGuardError
from .schedules import RESHUFFLE, RowSchedule, next_epoch_schedule
from .sensing import (
    BERNOULLI,
    GAUSSIAN,
    HADAMARD,
    SensingOperator,
    make_operator,
)
from .solvers import kz_epoch

__all__ = [
    "DENSE_GUARD",
    "RIP_GUARD",
    "schedule_hash",
    "spectral_norm",
    "multi_step_rhs",
    "IdentityReport",
    "identity_check",
    "CrossTermReport",
    "cross_term_matrix",
    "cross_term_report",
    "suffix_cross_term_norms",
    "cross_term_suite",
    "admissible_gamma",
    "RipReport",
    "rip_constant_bruteforce",
    "bias_term",
    "theorem_rate_bounds",
    "best_period",
]

DENSE_GUARD = 10 ** 6
RIP_GUARD = 10 ** 6
_MAX_DENSE_N = 4096


def schedule_hash(order):
    """Short SHA-256 digest of a row order, for report provenance."""
    return hashlib.sha256(np.asarray(order, dtype=np.int64).tobytes()).hexdigest()[:16]


def _order(schedule, m):
    order = schedule.order if isinstance(schedule, RowSchedule) else schedule
    order = np.asarray(order, dtype=np.int64)
    if order.ndim != 1 or order.shape[0] != m:
        raise InvalidArgument(f"schedule must have length {m}")
    if m and (order.min() < 0 or order.max() >= m):
        raise InvalidArgument("schedule entries out of range")
    return order


def _rows(A):
    if isinstance(A, SensingOperator):
        return np.asarray(A.rows)
    return np.asarray(A, dtype=np.float64)


def _guard(m, N):
    if m * N > DENSE_GUARD or N > _MAX_DENSE_N:
        raise SizeGuardError(
            f"dense evaluation refused for m={m}, N={N} (limit m*N <= {DENSE_GUARD}, "
            f"N <= {_MAX_DENSE_N})")


def spectral_norm(M, tol=1e-12, max_iter=10_000):
    """Largest singular value: dense SVD when ``min(M.shape) <= 256``, else power iteration."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    if min(M.shape) <= 256:
        return float(np.linalg.norm(M, 2))
    v = np.random.default_rng(0).standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        new = math.sqrt(nw)
        if abs(new - sigma) <= tol * new:
            return new
        sigma = new
    return sigma


# ---------------------------------------------------------------------------
# multi-step identity


def multi_step_rhs(A, schedule, gamma, x_start_err, e):
    """Closed-form end-of-epoch error of ``m`` relaxed Kaczmarz steps.

    With ``P_j = I - gamma a_j a_j^T / ||a_j||^2`` and the epoch visiting
    ``tau(1), ..., tau(m)``, returns::

        P_tau(m) ... P_tau(1) (x_1 - x)
          + gamma * sum_{i=0}^{m-1} e_tau(m-i) P_tau(m) ... P_tau(m-i+1) a_tau(m-i) / ||a_tau(m-i)||^2

    The suffix products are formed as explicit ``N x N`` matrices.
    """
    R = _rows(A)
    m, N = R.shape
    _guard(m, N)
    order = _order(schedule, m)
    d0 = np.asarray(x_start_err, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if d0.shape != (N,) or e.shape != (m,):
        raise InvalidArgument("dimension mismatch in multi_step_rhs")
    norms = np.einsum("ij,ij->i", R, R)

    S = np.eye(N)  # P_tau(m) ... P_tau(m-i+1), grown on the right
    noise = np.zeros(N)
    for i in range(m):
        r = order[m - 1 - i]
        a = R[r] / norms[r]
        noise += gamma * e[r] * (S @ a)
        # S <- S (I - gamma a_r a_r^T / ||a_r||^2)
        S -= gamma * np.outer(S @ R[r], a)
    return S @ d0 + noise


@dataclass
class IdentityReport:
    trials: int
    max_relative_deviation: float
    worst_trial: int
    m_max: int
    N_max: int
    seed: int
    kinds: list
    deviations: list = field(repr=False, default=None)

    def to_dict(self):
        d = asdict(self)
        d.pop("deviations")
        return d


def _random_instance(rng, kind, m_max, N_max):
    if kind == HADAMARD:
        N = 1 << int(rng.integers(1, int(math.log2(N_max)) + 1))
        m = int(rng.integers(1, min(m_max, N) + 1))
    else:
        N = int(rng.integers(1, N_max + 1))
        m = int(rng.integers(1, m_max + 1))
    return make_operator(kind, m, N, rng)


def identity_check(trials=100, m_max=64, N_max=64, seed=0,
                   kinds=(BERNOULLI, GAUSSIAN, HADAMARD)):
    """Compare :func:`multi_step_rhs` with an actual Kaczmarz epoch on random instances.

    Each trial draws an operator (kinds in rotation), a reshuffled schedule,
    ``gamma ~ U(0, 2)``, Gaussian noise, a sparse ground truth and an
    arbitrary dense starting point.
    """
    if m_max * N_max > DENSE_GUARD:
        raise SizeGuardError("identity check dimensions exceed the dense guard")
    kinds = list(kinds)
    if HADAMARD in kinds and N_max < 2:
        kinds.remove(HADAMARD)
    rng = np.random.default_rng(seed)
    devs = []
    for t in range(trials):
        A = _random_instance(rng, kinds[t % len(kinds)], m_max, N_max)
        sched = next_epoch_schedule(RESHUFFLE, A.m, 0, int(rng.integers(2 ** 32)))
        gamma = float(rng.uniform(0.0, 2.0))
        x = random_sparse_signal(A.N, int(rng.integers(1, A.N + 1)), rng)
        e = rng.standard_normal(A.m) * float(rng.uniform(0.0, 1.0))
        b = A.apply(x) + e
        x1 = rng.standard_normal(A.N)
        actual = kz_epoch(x1, A, b, sched, gamma) - x
        rhs = multi_step_rhs(A, sched, gamma, x1 - x, e)
        denom = max(np.linalg.norm(actual), np.finfo(float).tiny)
        devs.append(float(np.linalg.norm(rhs - actual) / denom))
    worst = int(np.argmax(devs)) if devs else -1
    return IdentityReport(
        trials=trials,
        max_relative_deviation=max(devs) if devs else 0.0,
        worst_trial=worst,
        m_max=m_max,
        N_max=N_max,
        seed=seed,
        kinds=kinds,
        deviations=devs,
    )


# ---------------------------------------------------------------------------
# cross terms


@dataclass
class CrossTermReport:
    operator_norm: float
    bound: float
    gamma_admissible: bool
    gamma_max: float
    m: int
    N: int
    gamma: float
    K: float
    schedule_hash: str
    seed: object = None

    @property
    def within_bound(self):
        return self.operator_norm < self.bound

    def to_dict(self):
        return asdict(self)


def _check_row_norms(R, rtol=1e-9):
    N = R.shape[1]
    norms = np.einsum("ij,ij->i", R, R)
    if np.any(np.abs(norms - N) > rtol * N):
        raise InvalidArgument("cross terms need every row to have squared norm N")


def _cross_terms_on(R, order, gamma, W):
    """Apply the cross-term matrix ``B`` of the ordered epoch product to the columns of ``W``.

    Uses ``B_{k+1} = B_k - c a a^T (B_k - c L_k)`` with ``c = gamma / N`` and
    ``L_k = sum_{j <= k} a_j a_j^T``, which follows from
    ``S_{k+1} = (I - c a a^T) S_k`` and ``S_k = I - c L_k + B_k``; no identity
    is subtracted, so small cross terms keep their relative accuracy.
    """
    c = gamma / R.shape[1]
    BW = np.zeros_like(W)
    LW = np.zeros_like(W)
    for r in order:
        a = R[r]
        BW -= c * np.outer(a, a @ (BW - c * LW))
        LW += np.outer(a, a @ W)
    return BW


def cross_term_matrix(A, schedule, gamma):
    """Dense ``N x N`` cross-term matrix ``P_tau(m)...P_tau(1) - I + (gamma/N) sum_j a_j a_j^T``."""
    R = _rows(A)
    m, N = R.shape
    _guard(m, N)
    _check_row_norms(R)
    return _cross_terms_on(R, _order(schedule, m), gamma, np.eye(N))


def cross_term_report(A, schedule, gamma, K=1.0, seed=None):
    """Spectral norm of the epoch's cross terms against ``2 gamma^2 m^2 K^2 ln^2(m) / sqrt(N)``.

    ``B`` maps into the row space and vanishes on its complement, so its norm
    equals that of ``Q^T B Q`` for an orthonormal basis ``Q`` of the row space.
    """
    R = _rows(A)
    m, N = R.shape
    _guard(m, N)
    _check_row_norms(R)
    order = _order(schedule, m)
    if m < 2:
        op_norm = 0.0  # no pair of rows, no cross term
    else:
        Q, _ = np.linalg.qr(R.T)
        op_norm = spectral_norm(Q.T @ _cross_terms_on(R, order, gamma, Q))
    bound = 2 * gamma ** 2 * m ** 2 * K ** 2 * math.log(m) ** 2 / math.sqrt(N)
    gamma_max = admissible_gamma(m, N, K)
    return CrossTermReport(
        operator_norm=op_norm,
        bound=bound,
        gamma_admissible=gamma <= gamma_max,
        gamma_max=gamma_max,
        m=m,
        N=N,
        gamma=float(gamma),
        K=float(K),
        schedule_hash=schedule_hash(order),
        seed=seed,
    )


def suffix_cross_term_norms(A, schedule, gamma):
    """Norms of the cross terms of every trailing product ``P_tau(m) ... P_tau(m-i+1)``.

    Entry ``i`` (``0 <= i <= m``) covers the last ``i`` steps; entry ``m`` is the
    full-epoch value. Limited to ``m <= 64``.
    """
    R = _rows(A)
    m, N = R.shape
    if m > 64:
        raise SizeGuardError("per-suffix cross terms are limited to m <= 64")
    _guard(m, N)
    _check_row_norms(R)
    order = _order(schedule, m)
    out = [0.0]
    for i in range(1, m + 1):
        # trailing steps applied in their original order
        tail = order[m - i:]
        out.append(spectral_norm(_cross_terms_on(R, tail, gamma, np.eye(N))) if i > 1 else 0.0)
    return np.asarray(out)


def admissible_gamma(m, N, K=1.0):
    """Largest step with ``gamma <= sqrt(N) / (2 m K^2 ln^2 m)``."""
    lnm2 = math.log(m) ** 2
    return math.sqrt(N) / (2 * m * K ** 2 * lnm2) if lnm2 > 0 else math.inf


def cross_term_suite(kind, m, N, gamma="auto", K=1.0, schedules=50, seed=0, rule=RESHUFFLE):
    """One random operator, ``schedules`` epoch orders, one report per order.

    ``gamma="auto"`` takes ``N/m`` on Hadamard rows and the admissible
    maximum otherwise.
    """
    ss = np.random.SeedSequence(seed)
    mat_ss, sched_ss = ss.spawn(2)
    A = make_operator(kind, m, N, np.random.default_rng(mat_ss))
    if gamma == "auto":
        gamma = N / m if kind == HADAMARD else admissible_gamma(m, N, K)
    return [cross_term_report(A, next_epoch_schedule(rule, m, k, sched_ss), float(gamma), K, seed)
            for k in range(schedules)]


# ---------------------------------------------------------------------------
# restricted isometry, noise floor, rate formulas


@dataclass
class RipReport:
    s: int
    delta: float
    argmax_support: list
    m: int
    N: int
    n_supports: int

    def to_dict(self):
        return asdict(self)


def rip_constant_bruteforce(A_scaled, s, batch=4096):
    """Exact ``delta_s`` by enumerating all ``C(N, s)`` supports in lexicographic order.

    ``A_scaled`` should already carry the normalisation of interest, typically
    ``A / sqrt(m)``. For each support the Gram block's extreme eigenvalues give
    ``max(lambda_max - 1, 1 - lambda_min)``; the first maximising support is kept.
    """
    R = _rows(A_scaled)
    m, N = R.shape
    if int(s) != s or not 1 <= s <= N:
        raise InvalidArgument(f"need 1 <= s <= N, got s={s}")
    s = int(s)
    total = math.comb(N, s)
    if total > RIP_GUARD:
        raise SizeGuardError(f"C({N}, {s}) = {total} supports exceeds the limit {RIP_GUARD}")
    G = R.T @ R
    best, best_supp = -math.inf, None
    combos = itertools.combinations(range(N), s)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        idx = np.asarray(chunk, dtype=np.int64)
        blocks = G[idx[:, :, None], idx[:, None, :]]
        ev = np.linalg.eigvalsh(blocks)
        dev = np.maximum(ev[:, -1] - 1.0, 1.0 - ev[:, 0])
        j = int(np.argmax(dev))
        if dev[j] > best:
            best, best_supp = float(dev[j]), idx[j].tolist()
    return RipReport(s=s, delta=max(best, 0.0), argmax_support=best_supp, m=m, N=N,
                     n_supports=total)


def bias_term(A, e, s):
    """``sup_{|S| <= 2s} ||P_S(A^T e / m)||_2``: the norm of the ``2s`` largest entries."""
    e = np.asarray(e, dtype=np.float64)
    if isinstance(A, SensingOperator):
        g = A.apply_adjoint(e) / A.m
    else:
        A = np.asarray(A, dtype=np.float64)
        g = A.T @ e / A.shape[0]
    k = min(2 * int(s), g.shape[0])
    return float(np.linalg.norm(hard_threshold(g, k)))


def theorem_rate_bounds(m, N, s, C_rip=1.0, p=None):
    """Per-epoch contraction factors predicted for KZIHT and KZPT (noiseless).

    ``kziht = 2 sqrt(C s ln^4 N / m)`` and, with ``t = m / p``,
    ``kzpt = t^{t/2} kziht^t``. Formula evaluation only.
    """
    if min(m, N, s, C_rip) <= 0:
        raise InvalidArgument("rate bounds need positive arguments")
    p = m if p is None else p
    if p <= 0:
        raise InvalidArgument("period must be positive")
    kziht = 2.0 * math.sqrt(C_rip * s * math.log(N) ** 4 / m)
    t = m / p
    try:
        kzpt = t ** (t / 2) * kziht ** t
    except OverflowError:
        # t^(t/2) alone can overflow while the product does not
        log_kzpt = 0.5 * t * math.log(t) + t * math.log(kziht)
        kzpt = math.exp(log_kzpt) if log_kzpt < 709 else math.inf
    return {"kziht_rate": kziht, "kzpt_rate": kzpt}


def best_period(m, N, s, C_rip=1.0, min_period=1):
    """Divisor ``p >= min_period`` of ``m`` minimising the KZPT rate formula."""
    divisors = [p for p in range(max(1, int(min_period)), m + 1) if m % p == 0]
    if not divisors:
        raise InvalidArgument(f"no divisor of m={m} is >= {min_period}")
    rates = {p: theorem_rate_bounds(m, N, s, C_rip, p)["kzpt_rate"] for p in divisors}
    return min(rates, key=lambda p: (rates[p], -p)), rates
