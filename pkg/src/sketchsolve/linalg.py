"""Sparse and dense kernels plus the counting operator abstraction.

Every solver in the package touches the system matrix only through a
:class:`LinearOperator`, which records how many forward and transpose
products were taken. Those counters are what the operation-count guarantees
of the short-recurrence methods are checked against.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

EPS = np.finfo(np.float64).eps


class DimensionError(ValueError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a pivot falls below ``eps * ||M||_inf``."""


@dataclass(frozen=True, eq=False)
class SparseMatrixCSR:
    """Immutable compressed-sparse-row matrix.

    Rows are stored with strictly increasing column indices and no duplicate
    entries. The index/value arrays are flagged read-only so the matrix can
    be shared between solver runs.
    """

    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _kernel: scipy.sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if row_ptr.shape != (self.nrows + 1,):
            raise ValueError("row_ptr must have length nrows + 1")
        if row_ptr[0] != 0 or row_ptr[-1] != len(values) or len(col_idx) != len(values):
            raise ValueError("row_ptr[0] must be 0 and row_ptr[-1] must equal nnz")
        if np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= self.ncols):
            raise ValueError("column index out of range")
        row_ids = np.repeat(np.arange(self.nrows), np.diff(row_ptr))
        same_row = row_ids[1:] == row_ids[:-1]
        if np.any(np.diff(col_idx)[same_row] <= 0):
            raise ValueError("column indices must be strictly increasing within a row")
        for arr in (row_ptr, col_idx, values):
            arr.flags.writeable = False
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)
        kernel = scipy.sparse.csr_matrix(
            (values, col_idx, row_ptr), shape=(self.nrows, self.ncols), copy=False
        )
        object.__setattr__(self, "_kernel", kernel)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and values of row ``i`` (views, no copy)."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def row_norms_squared(self) -> np.ndarray:
        row_ids = np.repeat(np.arange(self.nrows), np.diff(self.row_ptr))
        return np.bincount(row_ids, weights=np.square(self.values), minlength=self.nrows)

    def col_norms_squared(self) -> np.ndarray:
        return np.bincount(self.col_idx, weights=np.square(self.values), minlength=self.ncols)

    def diagonal(self) -> np.ndarray:
        return self._kernel.diagonal()

    def toarray(self) -> np.ndarray:
        return self._kernel.toarray()

    def to_scipy(self) -> scipy.sparse.csr_matrix:
        return self._kernel.copy()

    def is_symmetric(self) -> bool:
        """Exact symmetry check on pattern and values."""
        if self.nrows != self.ncols:
            return False
        diff = self._kernel - self._kernel.T
        return diff.count_nonzero() == 0

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrixCSR":
        csr = scipy.sparse.csr_matrix(mat, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrixCSR":
        arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        return cls.from_scipy(scipy.sparse.csr_matrix(arr))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrixCSR":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))


def csr_from_triplets(
    nrows: int, ncols: int, entries: Iterable[Sequence[float]]
) -> SparseMatrixCSR:
    """Assemble a CSR matrix from ``(row, col, value)`` triplets.

    Duplicate coordinates are summed. An out-of-range index raises
    ``ValueError`` naming the first offending entry.
    """
    entries = list(entries)
    if entries:
        trip = np.asarray(entries, dtype=np.float64).reshape(len(entries), 3)
        rows = trip[:, 0].astype(np.int64)
        cols = trip[:, 1].astype(np.int64)
        vals = trip[:, 2]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    bad_row = np.flatnonzero((rows < 0) | (rows >= nrows))
    if len(bad_row):
        i = bad_row[0]
        raise ValueError(f"row index out of range: entry {i} {tuple(entries[i])}")
    bad_col = np.flatnonzero((cols < 0) | (cols >= ncols))
    if len(bad_col):
        i = bad_col[0]
        raise ValueError(f"column index out of range: entry {i} {tuple(entries[i])}")
    return _csr_from_arrays(nrows, ncols, rows, cols, vals)


def _csr_from_arrays(nrows, ncols, rows, cols, vals) -> SparseMatrixCSR:
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        new = np.ones(len(rows), dtype=bool)
        new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        group = np.cumsum(new) - 1
        vals = np.bincount(group, weights=vals)
        rows, cols = rows[new], cols[new]
    row_ptr = np.zeros(nrows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nrows), out=row_ptr[1:])
    return SparseMatrixCSR(nrows, ncols, row_ptr, cols, vals)


def matvec(A: SparseMatrixCSR, x) -> np.ndarray:
    """``A @ x`` for a CSR matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.ncols,):
        raise DimensionError(f"matvec expects a vector of length {A.ncols}, got shape {x.shape}")
    return A._kernel @ x


def matvec_transpose(A: SparseMatrixCSR, r) -> np.ndarray:
    """``A.T @ r`` computed as a scatter over the row-major storage."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (A.nrows,):
        raise DimensionError(f"transpose matvec expects a vector of length {A.nrows}, got shape {r.shape}")
    # csr.T is a CSC view over the same arrays; no transposed copy is built
    return A._kernel.T @ r


def dense_solve(M, rhs) -> np.ndarray:
    """Solve ``M @ sol = rhs`` by LU with partial (row) pivoting.

    Raises
    ------
    SingularMatrixError
        If some pivot has magnitude below ``eps * ||M||_inf``. Callers that
        build sketched Gram matrices use this as a signal to resample.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"dense_solve needs a square matrix, got shape {M.shape}")
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != M.shape[0]:
        raise DimensionError("right-hand side does not match matrix size")
    if M.shape[0] == 0:
        return rhs.copy()
    scale = np.linalg.norm(M, np.inf)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M)
    if scale == 0.0 or np.min(np.abs(np.diag(lu))) < EPS * scale:
        raise SingularMatrixError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), rhs)


class LinearOperator:
    """Matrix-free operator with forward/transpose product counters.

    Counters are plain integers: an operator is owned by one solver run at a
    time and is not safe for concurrent use.

    Parameters
    ----------
    shape : (int, int)
    matvec : callable
        ``x -> A @ x``.
    rmatvec : callable, optional
        ``r -> A.T @ r``. Defaults to ``matvec`` when ``symmetric`` is set.
    symmetric : bool
        Declares ``A == A.T``. Trusted as given for callables.
    matrix : optional
        Explicit matrix backing the operator, kept for row access and
        symmetry verification.
    """

    def __init__(
        self,
        shape: tuple[int, int],
        matvec: Callable[[np.ndarray], np.ndarray],
        rmatvec: Callable[[np.ndarray], np.ndarray] | None = None,
        *,
        symmetric: bool = False,
        matrix=None,
    ):
        self.shape = (int(shape[0]), int(shape[1]))
        if rmatvec is None:
            if not symmetric:
                raise ValueError("rmatvec is required for a nonsymmetric operator")
            rmatvec = matvec
        self._matvec = matvec
        self._rmatvec = rmatvec
        self.symmetric = symmetric
        self.matrix = matrix
        self.matvec_count = 0
        self.transpose_matvec_count = 0

    @property
    def nrows(self) -> int:
        return self.shape[0]

    @property
    def ncols(self) -> int:
        return self.shape[1]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.shape[1],):
            raise DimensionError(f"operator expects length {self.shape[1]}, got {x.shape}")
        self.matvec_count += 1
        return np.asarray(self._matvec(x), dtype=np.float64)

    def rmatvec(self, r: np.ndarray) -> np.ndarray:
        if r.shape != (self.shape[0],):
            raise DimensionError(f"transpose operator expects length {self.shape[0]}, got {r.shape}")
        self.transpose_matvec_count += 1
        return np.asarray(self._rmatvec(r), dtype=np.float64)

    __call__ = matvec

    def reset_counts(self):
        self.matvec_count = 0
        self.transpose_matvec_count = 0

    def __repr__(self):
        return (
            f"LinearOperator(shape={self.shape}, symmetric={self.symmetric}, "
            f"matvecs={self.matvec_count}, rmatvecs={self.transpose_matvec_count})"
        )


def aslinearoperator(A) -> LinearOperator:
    """Wrap a CSR matrix, dense array or scipy sparse matrix in a counting operator.

    An existing :class:`LinearOperator` is returned unchanged so that the
    caller keeps access to its counters.
    """
    if isinstance(A, LinearOperator):
        return A
    if scipy.sparse.issparse(A):
        A = SparseMatrixCSR.from_scipy(A)
    if isinstance(A, SparseMatrixCSR):
        mat = A
        return LinearOperator(
            A.shape,
            lambda x: matvec(mat, x),
            lambda r: matvec_transpose(mat, r),
            symmetric=mat.is_symmetric(),
            matrix=mat,
        )
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError("expected a 2-D matrix")
    sym = arr.shape[0] == arr.shape[1] and np.array_equal(arr, arr.T)
    return LinearOperator(arr.shape, arr.__matmul__, arr.T.__matmul__, symmetric=sym, matrix=arr)


def explicit_is_symmetric(op: LinearOperator) -> bool | None:
    """Exact symmetry of the backing matrix, or ``None`` for operator-only input."""
    mat = op.matrix
    if mat is None:
        return None
    if isinstance(mat, SparseMatrixCSR):
        return mat.is_symmetric()
    mat = np.asarray(mat)
    return mat.shape[0] == mat.shape[1] and np.array_equal(mat, mat.T)


def normal_equations_operator(A) -> LinearOperator:
    """Symmetric ``n x n`` operator ``r -> A.T @ (A @ r)``.

    Each application costs one forward and one transpose product on ``A`` and
    those are recorded on ``A``'s own counters.
    """
    op = aslinearoperator(A)

    def apply(r):
        return op.rmatvec(op.matvec(r))

    return LinearOperator((op.ncols, op.ncols), apply, symmetric=True)
