"""Vector primitives shared by all solvers.

Signals are plain 1-D ``float64`` numpy arrays. Supports are collections of
0-based column indices.
"""
import numpy as np

from .errors import InvalidArgument

__all__ = [
    "as_signal",
    "hard_threshold",
    "top_s_support",
    "support_of",
    "project_support",
    "relative_error",
    "random_sparse_signal",
]


def as_signal(v, name="v"):
    """Return ``v`` as a finite 1-D float64 array (no copy when possible)."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidArgument(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} has non-finite entries")
    return arr


def _check_sparsity(s, n):
    if isinstance(s, (bool, np.bool_)) or int(s) != s:
        raise InvalidArgument(f"sparsity must be an integer, got {s!r}")
    s = int(s)
    if s < 1 or s > n:
        raise InvalidArgument(f"sparsity s={s} must satisfy 1 <= s <= {n}")
    return s


def top_s_support(v, s):
    """Indices of the ``s`` largest-magnitude entries of ``v``, sorted ascending.

    Among equal magnitudes the smaller index is kept.
    """
    v = np.asarray(v, dtype=np.float64)
    s = _check_sparsity(s, v.shape[0])
    if s == v.shape[0]:
        return np.arange(s)
    # stable sort on -|v| keeps the smaller index first within a tie
    order = np.argsort(-np.abs(v), kind="stable")
    return np.sort(order[:s])


def hard_threshold(v, s):
    """Best s-term approximation of ``v``: keep the ``s`` largest |v_i|, zero the rest.

    Parameters
    ----------
    v : array_like, shape (N,)
    s : int
        Sparsity level, ``1 <= s <= N``.

    Returns
    -------
    ndarray
        New array with at most ``s`` nonzeros. Ties in magnitude are
        resolved in favour of the smallest index.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidArgument(f"v must be 1-D, got shape {v.shape}")
    keep = top_s_support(v, s)
    out = np.zeros_like(v)
    out[keep] = v[keep]
    return out


def support_of(v):
    return np.flatnonzero(np.asarray(v))


def project_support(v, support):
    """Zero every entry of ``v`` outside ``support`` (orthogonal projection P_Omega)."""
    v = np.asarray(v, dtype=np.float64)
    idx = np.asarray(list(support) if not isinstance(support, np.ndarray) else support,
                     dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= v.shape[0]):
        raise InvalidArgument(
            f"support indices must lie in [0, {v.shape[0] - 1}], got {idx.min()}..{idx.max()}")
    out = np.zeros_like(v)
    out[idx] = v[idx]
    return out


def relative_error(x, x_star):
    """``||x - x_star||_2 / ||x_star||_2``."""
    x = np.asarray(x, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x.shape != x_star.shape:
        raise InvalidArgument(f"shape mismatch {x.shape} vs {x_star.shape}")
    denom = np.linalg.norm(x_star)
    if denom == 0:
        raise InvalidArgument("relative error undefined for x_star == 0")
    return float(np.linalg.norm(x - x_star) / denom)


def random_sparse_signal(N, s, rng):
    """Draw an s-sparse vector: uniform support without replacement, N(0, 1) values.

    ``rng`` is anything accepted by :func:`numpy.random.default_rng`.
    """
    if N < 1:
        raise InvalidArgument(f"N must be positive, got {N}")
    s = _check_sparsity(s, N)
    rng = np.random.default_rng(rng)
    x = np.zeros(N)
    idx = rng.choice(N, size=s, replace=False)
    x[idx] = rng.standard_normal(s)
    return x
