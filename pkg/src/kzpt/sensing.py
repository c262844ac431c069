"""Sensing operators: subsampled Hadamard, Bernoulli, fixed-norm Gaussian, dense.

Every ensemble here has rows of squared norm exactly ``N`` (up to rounding for
the Gaussian one), which is the normalisation the Kaczmarz step sizes assume.
"""
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import as_signal
from .errors import InvalidArgument

__all__ = [
    "HADAMARD",
    "BERNOULLI",
    "GAUSSIAN",
    "DENSE",
    "KINDS",
    "fwht",
    "hadamard_row",
    "SensingOperator",
    "Measurements",
    "gen_subsampled_bos",
    "gen_bernoulli",
    "gen_gaussian_fixed_norm",
    "dense_operator",
    "make_operator",
    "make_measurements",
]

HADAMARD = "hadamard"
BERNOULLI = "bernoulli"
GAUSSIAN = "gaussian"
DENSE = "dense"
KINDS = (HADAMARD, BERNOULLI, GAUSSIAN, DENSE)

# row blocks of subsampled Hadamard operators are cached up to this many entries
_ROW_CACHE_LIMIT = 1 << 25


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def fwht(v):
    """Unnormalised Walsh-Hadamard transform along the last axis.

    Returns ``H @ v`` for the Sylvester-ordered ``N x N`` matrix with entries
    +-1 (``H[r, c] = (-1)**popcount(r & c)``). Works on stacks of vectors.
    """
    a = np.array(v, dtype=np.float64, copy=True)
    n = a.shape[-1]
    if not _is_pow2(n):
        raise InvalidArgument(f"fwht length must be a power of two, got {n}")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        a = a.reshape(lead + (n // (2 * h), 2, h))
        top = a[..., 0, :].copy()
        bot = a[..., 1, :]
        a[..., 0, :] += bot
        a[..., 1, :] = top - bot
        h *= 2
    return a.reshape(lead + (n,))


def hadamard_row(r, N):
    """Row ``r`` of the Sylvester Hadamard matrix of order ``N``."""
    cols = np.arange(N, dtype=np.uint64)
    parity = np.bitwise_count(cols & np.uint64(r)) & 1
    return 1.0 - 2.0 * parity.astype(np.float64)


@dataclass(frozen=True, eq=False)
class SensingOperator:
    """An ``m x N`` measurement operator.

    For ``kind == "hadamard"`` only ``row_indices`` is stored; products go
    through :func:`fwht`. Other kinds hold a dense row-major ``matrix``.
    Arrays are made read-only on construction.
    """

    kind: str
    m: int
    N: int
    matrix: np.ndarray = None
    row_indices: np.ndarray = None
    seed: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown operator kind {self.kind!r}")
        if self.m < 1 or self.N < 1:
            raise InvalidArgument(f"dimensions must be positive, got m={self.m}, N={self.N}")
        if self.kind == HADAMARD:
            idx = np.asarray(self.row_indices, dtype=np.int64)
            if not _is_pow2(self.N):
                raise InvalidArgument(f"Hadamard operator needs N a power of two, got {self.N}")
            if idx.shape != (self.m,):
                raise InvalidArgument(f"expected {self.m} row indices, got shape {idx.shape}")
            if np.unique(idx).size != self.m or idx.min() < 0 or idx.max() >= self.N:
                raise InvalidArgument("row indices must be distinct and lie in [0, N)")
            idx.setflags(write=False)
            object.__setattr__(self, "row_indices", idx)
        else:
            mat = np.array(self.matrix, dtype=np.float64)
            if mat.shape != (self.m, self.N):
                raise InvalidArgument(f"matrix shape {mat.shape} != ({self.m}, {self.N})")
            mat.setflags(write=False)
            object.__setattr__(self, "matrix", mat)

    @property
    def shape(self):
        return (self.m, self.N)

    @property
    def is_structured(self):
        return self.kind == HADAMARD

    @cached_property
    def rows(self):
        """Dense ``m x N`` row block (computed once for Hadamard operators)."""
        if self.kind != HADAMARD:
            return self.matrix
        if self.m * self.N > _ROW_CACHE_LIMIT:
            raise MemoryError(
                f"refusing to materialise a {self.m}x{self.N} row block; use row(i)")
        e = np.zeros((self.m, self.N))
        e[np.arange(self.m), self.row_indices] = 1.0
        # H is symmetric, so H e_r is row r
        out = fwht(e)
        out.setflags(write=False)
        return out

    @cached_property
    def row_norms_sq(self):
        if self.kind == HADAMARD:
            out = np.full(self.m, float(self.N))
        else:
            out = np.einsum("ij,ij->i", self.matrix, self.matrix)
        out.setflags(write=False)
        return out

    def row(self, i):
        if not 0 <= i < self.m:
            raise InvalidArgument(f"row index {i} out of range [0, {self.m})")
        if self.kind == HADAMARD:
            if "rows" in self.__dict__:
                return self.rows[i]
            return hadamard_row(int(self.row_indices[i]), self.N)
        return self.matrix[i]

    def apply(self, x):
        """``A @ x``."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.N,):
            raise InvalidArgument(f"apply expects shape ({self.N},), got {x.shape}")
        if self.kind == HADAMARD:
            return fwht(x)[self.row_indices]
        return self.matrix @ x

    def apply_adjoint(self, y):
        """``A.T @ y``."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.m,):
            raise InvalidArgument(f"apply_adjoint expects shape ({self.m},), got {y.shape}")
        if self.kind == HADAMARD:
            z = np.zeros(self.N)
            z[self.row_indices] = y
            return fwht(z)
        return self.matrix.T @ y

    def to_dense(self):
        return np.array(self.rows)

    def to_dict(self):
        d = {"kind": self.kind, "m": self.m, "N": self.N, "seed": self.seed}
        if self.kind == HADAMARD:
            d["row_indices"] = self.row_indices.tolist()
        else:
            d["entries"] = self.matrix.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == HADAMARD:
            return cls(kind, int(d["m"]), int(d["N"]), row_indices=d["row_indices"],
                       seed=d.get("seed"))
        return cls(kind, int(d["m"]), int(d["N"]), matrix=d["entries"], seed=d.get("seed"))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _seed_tag(rng):
    return rng if isinstance(rng, (int, np.integer)) and not isinstance(rng, bool) else None


def _check_dims(m, N):
    if m < 1 or N < 1:
        raise InvalidArgument(f"dimensions must be positive, got m={m}, N={N}")


def gen_subsampled_bos(N, m, rng):
    """Pick ``m`` distinct Hadamard rows uniformly at random (without replacement)."""
    _check_dims(m, N)
    if not _is_pow2(N):
        raise InvalidArgument(f"N must be a power of two, got {N}")
    if m > N:
        raise InvalidArgument(f"cannot select m={m} distinct rows out of N={N}")
    tag = _seed_tag(rng)
    gen = np.random.default_rng(rng)
    idx = gen.choice(N, size=m, replace=False)
    return SensingOperator(HADAMARD, m, N, row_indices=idx, seed=None if tag is None else int(tag))


def gen_bernoulli(m, N, rng):
    """i.i.d. Rademacher entries."""
    _check_dims(m, N)
    tag = _seed_tag(rng)
    gen = np.random.default_rng(rng)
    mat = 2.0 * gen.integers(0, 2, size=(m, N)) - 1.0
    return SensingOperator(BERNOULLI, m, N, matrix=mat, seed=None if tag is None else int(tag))


def gen_gaussian_fixed_norm(m, N, rng):
    """Gaussian rows rescaled to norm ``sqrt(N)``, i.e. uniform on the sphere of that radius."""
    _check_dims(m, N)
    tag = _seed_tag(rng)
    gen = np.random.default_rng(rng)
    g = gen.standard_normal((m, N))
    g *= np.sqrt(N) / np.linalg.norm(g, axis=1, keepdims=True)
    return SensingOperator(GAUSSIAN, m, N, matrix=g, seed=None if tag is None else int(tag))


def dense_operator(matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise InvalidArgument(f"matrix must be 2-D, got shape {matrix.shape}")
    return SensingOperator(DENSE, matrix.shape[0], matrix.shape[1], matrix=matrix)


def make_operator(kind, m, N, rng):
    if kind == HADAMARD:
        return gen_subsampled_bos(N, m, rng)
    if kind == BERNOULLI:
        return gen_bernoulli(m, N, rng)
    if kind == GAUSSIAN:
        return gen_gaussian_fixed_norm(m, N, rng)
    raise InvalidArgument(f"cannot generate operator of kind {kind!r}")


@dataclass(frozen=True)
class Measurements:
    b: np.ndarray
    noise: np.ndarray
    clean: np.ndarray

    @classmethod
    def from_noise(cls, A, x_star, noise):
        clean = A.apply(as_signal(x_star, "x_star"))
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != clean.shape:
            raise InvalidArgument(f"noise shape {noise.shape} != ({A.m},)")
        return cls(b=clean + noise, noise=noise, clean=clean)


def make_measurements(A, x_star, sigma=0.0, rng=None):
    """``b = A x_star + e`` with ``e ~ N(0, sigma^2 I)``; ``sigma == 0`` means no noise."""
    if sigma is None:
        sigma = 0.0
    if not np.isfinite(sigma) or sigma < 0:
        raise InvalidArgument(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        noise = np.zeros(A.m)
    else:
        noise = sigma * np.random.default_rng(rng).standard_normal(A.m)
    return Measurements.from_noise(A, x_star, noise)
