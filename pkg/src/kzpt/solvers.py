"""Kaczmarz (KZ), IHT, Kaczmarz-IHT (KZIHT) and Kaczmarz with periodic thresholding (KZPT).

All runs start from ``x0 = 0`` unless told otherwise and record one entry per
completed epoch in an :class:`IterateTrace`. An epoch is one pass of ``m``
Kaczmarz steps (or, for IHT, one full gradient step).

KZPT follows the windowed reading: the epoch is cut into ``floor(m / p)``
windows of ``p`` consecutive scheduled rows; at the end of each window the
displacement from the window's starting point is scaled by ``lam`` and hard
thresholded, and the result becomes the start of the next window. Rows past
``p * floor(m / p)`` in the schedule are skipped.
"""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import hard_threshold, relative_error
from .errors import InfeasibleParameters, InvalidArgument
from .schedules import RESHUFFLE, RowSchedule, ScheduleStream, is_permutation_rule
from .sensing import HADAMARD, fwht

__all__ = [
    "CONVERGED",
    "BUDGET_EXHAUSTED",
    "DIVERGED",
    "SolverParams",
    "IterateTrace",
    "kz_step",
    "kz_epoch",
    "kz_run",
    "iht_run",
    "kziht_run",
    "kzpt_run",
    "SOLVERS",
    "run_solver",
    "StepPreset",
    "subgaussian_delta",
    "subgaussian_min_m",
    "subgaussian_step_preset",
]

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
DIVERGED = "diverged"


@dataclass
class SolverParams:
    """Knobs shared by all solvers.

    ``gamma`` is the Kaczmarz relaxation, ``lam`` the step applied to the
    per-window displacement in KZPT, ``period`` the thresholding period
    (``None`` means once per epoch). ``target_error > 0`` stops a run as soon
    as the relative error drops to it.
    """

    s: int
    gamma: float = 1.0
    lam: float = 1.0
    period: int = None
    epochs: int = 200
    divergence_threshold: float = 1e6
    target_error: float = 0.0

    def validate(self, m=None, N=None):
        if int(self.s) != self.s or self.s < 1 or (N is not None and self.s > N):
            raise InvalidArgument(f"sparsity s={self.s} must satisfy 1 <= s <= N")
        for name in ("gamma", "lam"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val >= 0):
                raise InvalidArgument(f"{name} must be finite and non-negative, got {val}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise InvalidArgument(f"epochs must be a positive integer, got {self.epochs}")
        if self.period is not None:
            if int(self.period) != self.period or self.period < 1:
                raise InvalidArgument(f"period must be a positive integer, got {self.period}")
            if m is not None and self.period > m:
                raise InvalidArgument(f"period p={self.period} exceeds row count m={m}")
        if not self.divergence_threshold > 0:
            raise InvalidArgument("divergence_threshold must be positive")
        if not self.target_error >= 0:
            raise InvalidArgument("target_error must be >= 0")


@dataclass
class IterateTrace:
    relative_error: np.ndarray
    elapsed_seconds: np.ndarray
    iterate_norm: np.ndarray
    final_iterate: np.ndarray
    status: str
    iterates: list = field(default=None, repr=False)

    @property
    def epochs(self):
        return len(self.relative_error)

    @property
    def final_error(self):
        return float(self.relative_error[-1]) if len(self.relative_error) else math.nan

    def epochs_to(self, tol):
        """1-based epoch at which the error first reached ``tol``, or ``None``."""
        hit = np.flatnonzero(self.relative_error <= tol)
        return int(hit[0]) + 1 if hit.size else None


# ---------------------------------------------------------------------------
# Kaczmarz primitives


def kz_step(x, a, b_i, gamma):
    """One relaxed projection: ``x + gamma * (b_i - a.x) / ||a||^2 * a``."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    nrm = float(a @ a)
    if nrm == 0:
        raise InvalidArgument("Kaczmarz step with a zero row")
    return x + (gamma * (b_i - a @ x) / nrm) * a


def _row_block(A):
    try:
        return A.rows
    except MemoryError:
        return None


def _sweep(x, A, rows, b, order, scale):
    """In-place Kaczmarz steps over ``order``; ``scale[i] = gamma / ||a_i||^2``."""
    if rows is not None:
        for i in order:
            a = rows[i]
            x += (scale[i] * (b[i] - a @ x)) * a
    else:
        for i in order:
            a = A.row(i)
            x += (scale[i] * (b[i] - a @ x)) * a
    return x


def _order_of(schedule, m):
    order = schedule.order if isinstance(schedule, RowSchedule) else schedule
    order = np.asarray(order)
    if order.ndim != 1 or order.shape[0] != m:
        raise InvalidArgument(f"schedule must have length m={m}, got shape {order.shape}")
    if order.size and (order.min() < 0 or order.max() >= m):
        raise InvalidArgument("schedule entries out of range")
    return order.tolist()


def _scale(A, gamma):
    norms = A.row_norms_sq
    if np.any(norms == 0):
        raise InvalidArgument("operator has a zero row")
    return gamma / norms


def kz_epoch(x, A, b, schedule, gamma):
    """Run ``m`` Kaczmarz steps in schedule order; returns a new vector."""
    x = np.array(x, dtype=np.float64, copy=True)
    b = np.asarray(b, dtype=np.float64)
    if x.shape != (A.N,) or b.shape != (A.m,):
        raise InvalidArgument("dimension mismatch between x, A and b")
    order = _order_of(schedule, A.m)
    return _sweep(x, A, _row_block(A), b, order, _scale(A, gamma))


# ---------------------------------------------------------------------------
# epoch driver


def _prepare(A, b, params, x0):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.m,):
        raise InvalidArgument(f"b must have shape ({A.m},), got {b.shape}")
    params.validate(A.m, A.N)
    if x0 is None:
        x = np.zeros(A.N)
    else:
        x = np.array(x0, dtype=np.float64, copy=True)
        if x.shape != (A.N,):
            raise InvalidArgument(f"x0 must have shape ({A.N},), got {x.shape}")
    return b, x


def _drive(A, b, params, x, x_star, epoch_fn, record_iterates):
    """Run ``epoch_fn(x, k) -> x`` for up to ``params.epochs`` epochs and trace it."""
    if x_star is not None:
        x_star = np.asarray(x_star, dtype=np.float64)

        def err(v):
            return relative_error(v, x_star)
    else:
        bnorm = np.linalg.norm(b) or 1.0

        def err(v):
            return float(np.linalg.norm(b - A.apply(v)) / bnorm)

    errs, times, norms = [], [], []
    iterates = [] if record_iterates else None
    status = BUDGET_EXHAUSTED
    t0 = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(params.epochs):
            x = epoch_fn(x, k)
            finite = bool(np.all(np.isfinite(x)))
            e = err(x) if finite else math.inf
            times.append(time.perf_counter() - t0)
            errs.append(e)
            norms.append(float(np.linalg.norm(x)) if finite else math.inf)
            if record_iterates:
                iterates.append(x.copy())
            if not finite or not e <= params.divergence_threshold:
                status = DIVERGED
                break
            if params.target_error > 0 and e <= params.target_error:
                status = CONVERGED
                break
    return IterateTrace(
        relative_error=np.asarray(errs),
        elapsed_seconds=np.asarray(times),
        iterate_norm=np.asarray(norms),
        final_iterate=x,
        status=status,
        iterates=iterates,
    )


# ---------------------------------------------------------------------------
# solvers


def kz_run(A, b, params, rule=RESHUFFLE, seed=None, x0=None, x_star=None,
           record_iterates=False):
    """Plain Kaczmarz epochs, no thresholding (``params.s`` is ignored)."""
    b, x = _prepare(A, b, params, x0)
    rows, scale = _row_block(A), _scale(A, params.gamma)
    stream = ScheduleStream(rule, A.m, seed)

    def epoch(x, k):
        return _sweep(x, A, rows, b, stream.epoch(k).order.tolist(), scale)

    return _drive(A, b, params, x, x_star, epoch, record_iterates)


def iht_run(A, b, params, x0=None, x_star=None, record_iterates=False):
    """Iterative hard thresholding with step ``1/m``: ``x <- T_s(x + A^T(b - Ax)/m)``."""
    b, x = _prepare(A, b, params, x0)
    step = 1.0 / A.m

    def epoch(x, k):
        return hard_threshold(x + step * A.apply_adjoint(b - A.apply(x)), params.s)

    return _drive(A, b, params, x, x_star, epoch, record_iterates)


def _bos_window(A, x, b, rows_idx, coef):
    """``x + coef * A_w^T (b_w - A_w x)`` for the Hadamard rows ``rows_idx``."""
    r = np.zeros(A.N)
    sel = A.row_indices[rows_idx]
    r[sel] = b[rows_idx] - fwht(x)[sel]
    return x + coef * fwht(r)


def _fast_ok(A, rule, fast):
    if not fast:
        return False
    if A.kind != HADAMARD or not is_permutation_rule(rule):
        raise InvalidArgument(
            "fast path needs a subsampled Hadamard operator and a permutation rule")
    return True


def kziht_run(A, b, params, rule=RESHUFFLE, seed=None, x0=None, x_star=None,
              fast=False, record_iterates=False):
    """KZIHT: ``m`` Kaczmarz steps with relaxation ``gamma``, then ``T_s``, per epoch.

    With ``fast=True`` (subsampled Hadamard, permutation rule) the epoch is
    evaluated in closed form as ``x + gamma/N * A^T(b - Ax)``, which the
    sequential sweep equals exactly because the rows are orthogonal.
    """
    b, x = _prepare(A, b, params, x0)
    stream = ScheduleStream(rule, A.m, seed)
    s = params.s
    if _fast_ok(A, rule, fast):
        coef = params.gamma / A.N
        everything = np.arange(A.m)

        def epoch(x, k):
            return hard_threshold(_bos_window(A, x, b, everything, coef), s)
    else:
        rows, scale = _row_block(A), _scale(A, params.gamma)

        def epoch(x, k):
            x = _sweep(x, A, rows, b, stream.epoch(k).order.tolist(), scale)
            return hard_threshold(x, s)

    return _drive(A, b, params, x, x_star, epoch, record_iterates)


def kzpt_run(A, b, params, rule=RESHUFFLE, seed=None, x0=None, x_star=None,
             fast=False, record_iterates=False):
    """KZPT: threshold every ``params.period`` Kaczmarz steps.

    Each window of ``p`` scheduled rows starts at the anchor ``x_a``; after the
    ``p`` steps reach ``x_p`` the new iterate is ``T_s(x_a + lam * (x_p - x_a))``
    and becomes the next anchor. The last ``m mod p`` scheduled rows of an
    epoch are not used. ``period=m, lam=1`` is KZIHT.
    """
    b, x = _prepare(A, b, params, x0)
    p = A.m if params.period is None else int(params.period)
    if p > A.m:
        raise InvalidArgument(f"period p={p} exceeds row count m={A.m}")
    n_win = A.m // p
    lam, s = params.lam, params.s
    stream = ScheduleStream(rule, A.m, seed)

    def combine(anchor, x):
        if lam == 1:
            return hard_threshold(x, s)
        return hard_threshold(anchor + lam * (x - anchor), s)

    if _fast_ok(A, rule, fast):
        coef = params.gamma / A.N

        def epoch(x, k):
            order = stream.epoch(k).order
            for w in range(n_win):
                x = combine(x, _bos_window(A, x, b, order[w * p:(w + 1) * p], coef))
            return x
    else:
        rows, scale = _row_block(A), _scale(A, params.gamma)

        def epoch(x, k):
            order = stream.epoch(k).order.tolist()
            for w in range(n_win):
                anchor = x.copy()
                x = _sweep(x, A, rows, b, order[w * p:(w + 1) * p], scale)
                x = combine(anchor, x)
            return x

    return _drive(A, b, params, x, x_star, epoch, record_iterates)


SOLVERS = {"kz": kz_run, "iht": iht_run, "kziht": kziht_run, "kzpt": kzpt_run}


def run_solver(name, A, b, params, rule=RESHUFFLE, seed=None, x_star=None, **kw):
    """Dispatch by solver name; IHT ignores ``rule`` and ``seed``."""
    if name not in SOLVERS:
        raise InvalidArgument(f"unknown solver {name!r}; expected one of {', '.join(SOLVERS)}")
    if name == "iht":
        kw.pop("fast", None)
        return iht_run(A, b, params, x_star=x_star, **kw)
    return SOLVERS[name](A, b, params, rule=rule, seed=seed, x_star=x_star, **kw)


# ---------------------------------------------------------------------------
# step sizes for sub-Gaussian rows


@dataclass(frozen=True)
class StepPreset:
    gamma: float
    lam: float
    delta: float


def subgaussian_delta(m, N, s, K=1.0):
    """``sqrt(3 s ln(N/s) (K ln m)^2 / m)``."""
    return math.sqrt(3 * s * math.log(N / s) * (K * math.log(m)) ** 2 / m)


def _preset_lhs(m, N, s, K):
    return 48 * s * math.log(N / s) * (K * math.log(m)) ** 2


def subgaussian_min_m(N, s, K=1.0):
    """Smallest ``m >= 8`` with ``m > 48 s ln(N/s) (K ln m)^2``.

    ``m / ln(m)^2`` increases for ``m >= e^2``, so the feasible set is a ray.
    """
    lo = 8
    if lo > _preset_lhs(lo, N, s, K):
        return lo
    hi = lo
    while hi <= _preset_lhs(hi, N, s, K):
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid > _preset_lhs(mid, N, s, K):
            hi = mid
        else:
            lo = mid
    return hi


def subgaussian_step_preset(m, N, s, K=1.0):
    """Step pair ``(gamma, lam)`` for fixed-norm sub-Gaussian rows, period ``m``.

    ``gamma = delta / (2 m (K ln m)^2 sqrt(N))`` and
    ``lam = 2 N^{3/2} (K ln m)^2 / delta`` so that ``gamma * lam = N / m``.
    Requires ``m > 48 s ln(N/s) (K ln m)^2`` (equivalently ``delta < 1/4``);
    otherwise :class:`InfeasibleParameters` is raised with ``min_m`` set.
    """
    if not (1 <= s < N):
        raise InvalidArgument(f"need 1 <= s < N, got s={s}, N={N}")
    if m < 2 or K <= 0:
        raise InvalidArgument(f"need m >= 2 and K > 0, got m={m}, K={K}")
    if not m > _preset_lhs(m, N, s, K):
        min_m = subgaussian_min_m(N, s, K)
        raise InfeasibleParameters(
            f"m={m} too small for s={s}, N={N}, K={K}: need m >= {min_m}", min_m=min_m)
    delta = subgaussian_delta(m, N, s, K)
    kl2 = (K * math.log(m)) ** 2
    gamma = delta / (2 * m * kl2 * math.sqrt(N))
    lam = 2 * N ** 1.5 * kl2 / delta
    return StepPreset(gamma=gamma, lam=lam, delta=delta)
