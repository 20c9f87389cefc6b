"""Seeded sketch generation.

Normal variates come from a Box-Muller transform applied to uniforms drawn
from numpy's Philox counter-based generator. Both pieces are fully specified
algorithms, so a given seed yields the same sketch on every platform, which
is not promised for numpy's ziggurat ``standard_normal``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .linalg import LinearOperator, SparseMatrixCSR


class SketchVariant(enum.Enum):
    RANDOM_NORMAL = "random-normal"
    RESIDUAL_HISTORY = "residual-history"
    IDENTITY_COLUMNS = "identity-columns"
    MATRIX_COLUMNS = "matrix-columns"


class Sampling(enum.Enum):
    UNIFORM = "uniform"
    ROW_NORM_SQUARED = "row-norm-squared"
    COL_NORM_SQUARED = "col-norm-squared"


class SketchRNG:
    """Deterministic uniform/normal/index stream keyed by a 64-bit seed."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) % 2**64
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, size) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        half = (count + 1) // 2
        u1 = 1.0 - self._gen.random(half)  # (0, 1], keeps log finite
        u2 = self._gen.random(half)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * half)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:count].reshape(shape)

    def index(self, cdf: np.ndarray) -> int:
        """Sample from the distribution with (unnormalised) cumulative weights ``cdf``."""
        u = self._gen.random() * cdf[-1]
        i = int(np.searchsorted(cdf, u, side="right"))
        return min(i, len(cdf) - 1)


def gaussian_sketch(m: int, r: int, seed: int) -> np.ndarray:
    """``m x r`` matrix of independent standard normals, reproducible per seed."""
    if m < 1 or r < 1:
        raise ValueError("sketch dimensions must be positive")
    return SketchRNG(seed).normal((m, r))


@dataclass(frozen=True)
class SketchSpec:
    variant: SketchVariant
    r: int = 1
    sampling: Sampling = Sampling.UNIFORM
    seed: int = 0

    def __post_init__(self):
        if self.variant is SketchVariant.RANDOM_NORMAL and self.r < 1:
            raise ValueError("RandomNormal sketch needs r >= 1")
        allowed = {
            SketchVariant.IDENTITY_COLUMNS: (Sampling.UNIFORM, Sampling.ROW_NORM_SQUARED),
            SketchVariant.MATRIX_COLUMNS: (Sampling.UNIFORM, Sampling.COL_NORM_SQUARED),
        }.get(self.variant)
        if allowed is not None and self.sampling not in allowed:
            raise ValueError(f"{self.sampling.value} sampling is not valid for {self.variant.value}")

    @classmethod
    def random_normal(cls, r: int, seed: int = 0) -> "SketchSpec":
        return cls(SketchVariant.RANDOM_NORMAL, r=r, seed=seed)

    @classmethod
    def residual_history(cls) -> "SketchSpec":
        return cls(SketchVariant.RESIDUAL_HISTORY)

    @classmethod
    def identity_columns(cls, sampling=Sampling.ROW_NORM_SQUARED, seed: int = 0) -> "SketchSpec":
        return cls(SketchVariant.IDENTITY_COLUMNS, sampling=Sampling(sampling), seed=seed)

    @classmethod
    def matrix_columns(cls, sampling=Sampling.UNIFORM, seed: int = 0) -> "SketchSpec":
        return cls(SketchVariant.MATRIX_COLUMNS, sampling=Sampling(sampling), seed=seed)


@dataclass
class SketchState:
    """Growing sketch ``S_k = [s_1 | ... | s_k]``.

    Identity-column sketches keep only the sampled row indices; every other
    variant stores its columns densely.
    """

    m: int
    rng: SketchRNG
    columns: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    _cdf: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return max(len(self.columns), len(self.indices))

    def matrix(self) -> np.ndarray:
        if self.columns:
            return np.column_stack(self.columns)
        S = np.zeros((self.m, len(self.indices)))
        S[self.indices, np.arange(len(self.indices))] = 1.0
        return S


def new_sketch_state(spec: SketchSpec, m: int) -> SketchState:
    return SketchState(m=m, rng=SketchRNG(spec.seed))


def _explicit_matrix(A):
    if isinstance(A, LinearOperator):
        A = A.matrix
    return A


def row_norms_squared(A) -> np.ndarray:
    mat = _explicit_matrix(A)
    if mat is None:
        raise ValueError("row sampling needs an explicit matrix")
    if isinstance(mat, SparseMatrixCSR):
        return mat.row_norms_squared()
    return np.sum(np.square(np.asarray(mat, dtype=np.float64)), axis=1)


def col_norms_squared(A) -> np.ndarray:
    mat = _explicit_matrix(A)
    if mat is None:
        raise ValueError("column-norm sampling needs an explicit matrix")
    if isinstance(mat, SparseMatrixCSR):
        return mat.col_norms_squared()
    return np.sum(np.square(np.asarray(mat, dtype=np.float64)), axis=0)


def sampling_cdf(sampling: Sampling, size: int, A=None) -> np.ndarray:
    """Cumulative (unnormalised) sampling weights over ``size`` rows or columns."""
    if sampling is Sampling.UNIFORM:
        weights = np.ones(size)
    elif sampling is Sampling.ROW_NORM_SQUARED:
        weights = row_norms_squared(A)
    else:
        weights = col_norms_squared(A)
    total = np.cumsum(weights)
    if total[-1] <= 0.0:
        raise ValueError("zero matrix")
    return total


def next_sketch_column(spec: SketchSpec, state: SketchState, residual=None, A=None):
    """Append one column to ``state`` and return ``(column, state)``.

    ``column`` is a sampled row index for identity-column sketches and a
    dense ``m``-vector otherwise. ``state`` is updated in place.
    """
    variant = spec.variant
    if variant is SketchVariant.RANDOM_NORMAL:
        col = state.rng.normal(state.m)
        state.columns.append(col)
        return col, state
    if variant is SketchVariant.RESIDUAL_HISTORY:
        if residual is None:
            raise ValueError("residual-history sketch needs the current residual")
        col = np.array(residual, dtype=np.float64, copy=True)
        state.columns.append(col)
        return col, state
    if A is None and (variant is SketchVariant.MATRIX_COLUMNS or spec.sampling is not Sampling.UNIFORM):
        raise ValueError(f"{variant.value} sketch needs the matrix")
    if variant is SketchVariant.IDENTITY_COLUMNS:
        if state._cdf is None:
            state._cdf = sampling_cdf(spec.sampling, state.m, A)
        i = state.rng.index(state._cdf)
        state.indices.append(i)
        return i, state
    # matrix columns: s_k = a_j, column j of A
    op = A if isinstance(A, LinearOperator) else None
    ncols = A.shape[1]
    if state._cdf is None:
        state._cdf = sampling_cdf(spec.sampling, ncols, A)
    j = state.rng.index(state._cdf)
    mat = _explicit_matrix(A)
    if isinstance(mat, SparseMatrixCSR):
        col = mat._kernel[:, [j]].toarray().ravel()
    elif mat is not None:
        col = np.asarray(mat, dtype=np.float64)[:, j].copy()
    else:
        e = np.zeros(ncols)
        e[j] = 1.0
        col = op.matvec(e)
    state.indices.append(j)
    state.columns.append(col)
    return col, state
