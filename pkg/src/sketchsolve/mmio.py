"""Matrix Market reading/writing and the CSV benchmark report."""
from __future__ import annotations

import csv
import io
from typing import IO, Iterable

import numpy as np

from .linalg import SparseMatrixCSR, _csr_from_arrays

CSV_HEADER = ("problem", "n", "solver", "status", "iterations", "matvecs", "seconds", "rel_residual")

_FORMATS = ("coordinate", "array")
_FIELDS = ("real", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


class MatrixMarketError(ValueError):
    """Parse failure; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class BannerError(MatrixMarketError):
    pass


class SizeLineError(MatrixMarketError):
    pass


class EntryCountError(MatrixMarketError):
    pass


class IndexRangeError(MatrixMarketError):
    pass


class EntryFormatError(MatrixMarketError):
    pass


def _text_lines(source: IO) -> list[str]:
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    return data.splitlines()


def _parse_banner(line: str) -> tuple[str, str, str]:
    parts = line.split()
    if not parts or parts[0].lower() != "%%matrixmarket":
        raise BannerError("missing %%MatrixMarket banner", 1)
    if len(parts) != 5:
        raise BannerError("banner must read '%%MatrixMarket matrix <format> <field> <symmetry>'", 1)
    obj, fmt, fld, sym = (p.lower() for p in parts[1:])
    if obj != "matrix":
        raise BannerError(f"unsupported object: {obj}", 1)
    if fmt not in _FORMATS:
        raise BannerError(f"unsupported format: {fmt}", 1)
    if fld not in _FIELDS:
        raise BannerError(f"unsupported field: {fld}", 1)
    if sym not in _SYMMETRIES:
        raise BannerError(f"unsupported symmetry: {sym}", 1)
    if fmt == "array" and fld == "pattern":
        raise BannerError("pattern field is not valid for array format", 1)
    return fmt, fld, sym


def _data_lines(lines: list[str], start: int):
    for idx in range(start, len(lines)):
        stripped = lines[idx].strip()
        if stripped and not stripped.startswith("%"):
            yield idx + 1, stripped


def _read_triplets(source: IO):
    """Parse a stream into ``(nrows, ncols, rows, cols, vals, symmetry)`` with full expansion."""
    lines = _text_lines(source)
    if not lines:
        raise BannerError("empty input", 1)
    fmt, fld, sym = _parse_banner(lines[0])
    data = _data_lines(lines, 1)
    try:
        size_lineno, size_line = next(data)
    except StopIteration:
        raise SizeLineError("missing size line", len(lines)) from None
    try:
        dims = [int(t) for t in size_line.split()]
    except ValueError:
        raise SizeLineError(f"malformed size line: {size_line!r}", size_lineno) from None
    want = 3 if fmt == "coordinate" else 2
    if len(dims) != want or min(dims) < 0:
        raise SizeLineError(f"malformed size line: {size_line!r}", size_lineno)
    nrows, ncols = dims[0], dims[1]
    if sym != "general" and nrows != ncols:
        raise SizeLineError(f"{sym} matrix must be square", size_lineno)

    if fmt == "coordinate":
        rows, cols, vals = _coordinate_entries(data, dims[2], nrows, ncols, fld, size_lineno)
    else:
        rows, cols, vals = _array_entries(data, nrows, ncols, sym, size_lineno)

    if sym != "general":
        off = rows != cols
        sign = -1.0 if sym == "skew-symmetric" else 1.0
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, sign * vals[off]]),
        )
    return nrows, ncols, rows, cols, vals, sym


def _coordinate_entries(data, nnz, nrows, ncols, fld, size_lineno):
    ntok = 2 if fld == "pattern" else 3
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.ones(nnz)
    count = 0
    last = size_lineno
    for lineno, line in data:
        last = lineno
        if count == nnz:
            raise EntryCountError(f"more entries than the {nnz} declared", lineno)
        parts = line.split()
        if len(parts) != ntok:
            raise EntryFormatError(f"expected {ntok} fields, got {len(parts)}", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            if ntok == 3:
                vals[count] = float(parts[2])
        except ValueError:
            raise EntryFormatError(f"malformed entry: {line!r}", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise IndexRangeError(f"index ({i}, {j}) out of range for {nrows}x{ncols}", lineno)
        rows[count], cols[count] = i - 1, j - 1
        count += 1
    if count != nnz:
        raise EntryCountError(f"expected {nnz} entries, found {count}", last)
    return rows, cols, vals


def _array_entries(data, nrows, ncols, sym, size_lineno):
    # column-major; symmetric storage lists the lower triangle only
    if sym == "general":
        coords = [(i, j) for j in range(ncols) for i in range(nrows)]
    elif sym == "symmetric":
        coords = [(i, j) for j in range(ncols) for i in range(j, nrows)]
    else:
        coords = [(i, j) for j in range(ncols) for i in range(j + 1, nrows)]
    vals = np.empty(len(coords))
    count = 0
    last = size_lineno
    for lineno, line in data:
        last = lineno
        if count == len(coords):
            raise EntryCountError(f"more entries than the {len(coords)} expected", lineno)
        parts = line.split()
        if len(parts) != 1:
            raise EntryFormatError(f"expected 1 field, got {len(parts)}", lineno)
        try:
            vals[count] = float(parts[0])
        except ValueError:
            raise EntryFormatError(f"malformed entry: {line!r}", lineno) from None
        count += 1
    if count != len(coords):
        raise EntryCountError(f"expected {len(coords)} entries, found {count}", last)
    idx = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    return idx[:, 0], idx[:, 1], vals


def read_matrix_market(source: IO) -> SparseMatrixCSR:
    """Read a Matrix Market stream into CSR.

    Symmetric and skew-symmetric storage is expanded to the full matrix,
    pattern entries become 1.0 and indices are shifted to 0-based.

    Raises
    ------
    MatrixMarketError
        One of :class:`BannerError`, :class:`SizeLineError`,
        :class:`EntryCountError`, :class:`IndexRangeError` or
        :class:`EntryFormatError`, each carrying the offending line number.
    """
    nrows, ncols, rows, cols, vals, _ = _read_triplets(source)
    return _csr_from_arrays(nrows, ncols, rows, cols, vals)


def read_matrix_market_dense(source: IO) -> np.ndarray:
    """Read any supported Matrix Market stream into a dense 2-D array."""
    return read_matrix_market(source).toarray()


def read_matrix_market_file(path) -> SparseMatrixCSR:
    with open(path, "rb") as fh:
        return read_matrix_market(fh)


def write_matrix_market(A: SparseMatrixCSR, sink: IO, comment: str | None = None) -> None:
    """Write ``A`` as ``coordinate real general`` with round-trip exact values."""
    out = io.StringIO()
    out.write("%%MatrixMarket matrix coordinate real general\n")
    if comment:
        for line in comment.splitlines():
            out.write(f"% {line}\n")
    out.write(f"{A.nrows} {A.ncols} {A.nnz}\n")
    rows = np.repeat(np.arange(A.nrows), np.diff(A.row_ptr))
    for i, j, v in zip(rows.tolist(), A.col_idx.tolist(), A.values.tolist()):
        out.write(f"{i + 1} {j + 1} {v!r}\n")
    _write_text(sink, out.getvalue())


def _write_text(sink: IO, text: str) -> None:
    if isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("utf-8"))


def _fmt_float(value: float) -> str:
    return format(float(value), ".10g")


def write_csv_report(reports: Iterable[tuple], sink: IO) -> None:
    """Serialise ``(problem, solver, SolveReport)`` triples as CSV.

    Rows are ordered by problem, then solver name. ``matvecs`` is the total
    number of operator applications (forward plus transpose).
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for problem, solver, rep in sorted(reports, key=lambda t: (t[0], t[1])):
        writer.writerow(
            [
                problem,
                rep.n,
                solver,
                rep.status.value,
                rep.iterations,
                rep.matvecs + rep.transpose_matvecs,
                _fmt_float(rep.seconds),
                _fmt_float(rep.rel_residual),
            ]
        )
    _write_text(sink, buf.getvalue())


def read_csv_report(source: IO) -> list[dict]:
    """Parse a report written by :func:`write_csv_report` back into dicts."""
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.DictReader(io.StringIO(data))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header: {reader.fieldnames}")
    rows = []
    for row in reader:
        row["n"] = int(row["n"])
        row["iterations"] = int(row["iterations"])
        row["matvecs"] = int(row["matvecs"])
        row["seconds"] = float(row["seconds"])
        row["rel_residual"] = float(row["rel_residual"])
        rows.append(row)
    return rows
