"""Integer matrices, sign assignments and the plain-text matrix format.

Every other module works on :class:`IntegerMatrix`. Entries are held either as
``int64`` (the fast path, guarded by :data:`EXACT_LIMIT`) or as Python ints in
an ``object`` array when arbitrary precision is requested.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

__all__ = [
    "EXACT_LIMIT",
    "IntegerMatrix",
    "MatrixParseError",
    "SignAssignment",
    "column_signs",
    "from_text",
    "manhattan_norm",
    "read_matrix",
    "value",
    "write_matrix",
]

# Bound on n * m * max|M_ij|. Any partial-sum norm is at most this, and a norm
# plus a finite prune constant stays below 2**62, so int64 never overflows.
EXACT_LIMIT = 2**61


class MatrixParseError(ValueError):
    """Malformed matrix text. ``line`` and ``column`` are 1-based."""

    def __init__(self, message: str, line: int, column: int | None = None):
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


def _magnitude_product(entries: np.ndarray) -> int:
    if entries.size == 0:
        return 0
    peak = max(abs(int(x)) for x in entries.ravel())
    return entries.shape[0] * entries.shape[1] * peak


@dataclass(frozen=True, eq=False)
class IntegerMatrix:
    """An immutable ``n x m`` matrix of exact integers.

    Use :meth:`from_rows` or :func:`read_matrix` rather than the constructor.
    Rows are 1-indexed in :meth:`row` to follow the usual ``M_1, ..., M_n``
    notation; ``entries`` itself is an ordinary 0-indexed array.
    """

    entries: np.ndarray

    def __post_init__(self):
        e = self.entries
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise ValueError(f"matrix must be 2-D with n, m >= 1, got shape {e.shape}")
        if e.dtype not in (np.int64, object):
            raise TypeError(f"entries must be int64 or object, got {e.dtype}")
        if e.flags.writeable:
            e.setflags(write=False)

    @classmethod
    def from_rows(cls, rows, *, bigint: bool = False) -> "IntegerMatrix":
        """Build a matrix from nested integer sequences or an integer array.

        With ``bigint=False`` the matrix must satisfy
        ``n * m * max|M_ij| <= EXACT_LIMIT``; otherwise an ``OverflowError`` is
        raised. ``bigint=True`` stores Python ints and lifts the limit.
        """
        arr = np.asarray(rows, dtype=object) if not isinstance(rows, np.ndarray) else rows
        if arr.ndim != 2:
            raise ValueError("rows must form a 2-D array")
        flat = []
        for x in arr.ravel():
            if isinstance(x, (bool, np.bool_)):
                raise TypeError("boolean entries are not integers")
            if isinstance(x, (int, np.integer)):
                flat.append(int(x))
            elif isinstance(x, (float, np.floating)) and float(x).is_integer():
                flat.append(int(x))
            else:
                raise TypeError(f"non-integer entry {x!r}")
        obj = np.empty(arr.shape, dtype=object)
        obj.ravel()[:] = flat if arr.size else []
        obj = obj.reshape(arr.shape)
        size = _magnitude_product(obj)
        if bigint:
            return cls(obj)
        if size > EXACT_LIMIT:
            raise OverflowError(
                f"n*m*max|M_ij| = {size} exceeds 2**61; load with bigint=True"
            )
        return cls(obj.astype(np.int64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def is_bigint(self) -> bool:
        return self.entries.dtype == object

    def row(self, i: int) -> np.ndarray:
        """Row ``M_i`` with ``1 <= i <= n``."""
        if not 1 <= i <= self.rows:
            raise IndexError(f"row index {i} outside 1..{self.rows}")
        return self.entries[i - 1]

    def permute_rows(self, order: Sequence[int]) -> "IntegerMatrix":
        """New matrix whose i-th row is ``self.entries[order[i]]`` (0-based)."""
        return IntegerMatrix(np.ascontiguousarray(self.entries[list(order)]))

    def tolist(self) -> list[list[int]]:
        return [[int(x) for x in r] for r in self.entries]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, IntegerMatrix):
            return NotImplemented
        return self.shape == other.shape and self.tolist() == other.tolist()

    def __hash__(self):
        return hash((self.shape, tuple(map(tuple, self.tolist()))))

    def __repr__(self):
        return f"IntegerMatrix({self.tolist()!r})"

    def to_text(self) -> str:
        """Serialize in the canonical ``"n m"`` + rows format."""
        out = [f"{self.rows} {self.cols}"]
        out.extend(" ".join(str(int(x)) for x in r) for r in self.entries)
        return "\n".join(out) + "\n"


def _check_signs(seq, name: str) -> tuple[int, ...]:
    out = tuple(int(x) for x in seq)
    if any(x not in (1, -1) for x in out):
        raise ValueError(f"{name} must contain only +1 and -1")
    return out


@dataclass(frozen=True)
class SignAssignment:
    """Sign vectors ``a`` (rows) and optionally ``b`` (columns)."""

    a: tuple[int, ...]
    b: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", _check_signs(self.a, "a"))
        if self.b is not None:
            object.__setattr__(self, "b", _check_signs(self.b, "b"))

    @classmethod
    def complete(cls, M: IntegerMatrix, a: Iterable[int]) -> "SignAssignment":
        """Attach the best column signs for ``a``: ``b_j`` = sign of column sum, ties +1."""
        a = _check_signs(a, "a")
        if len(a) != M.rows:
            raise ValueError(f"a has length {len(a)}, matrix has {M.rows} rows")
        return cls(a, column_signs(_combine(M, a)))


def _combine(M: IntegerMatrix, a: Sequence[int]) -> list[int]:
    """Exact ``sum_i a_i M_i`` as Python ints."""
    acc = [0] * M.cols
    for ai, r in zip(a, M.entries):
        for j, x in enumerate(r):
            acc[j] += ai * int(x)
    return acc


def column_signs(v: Iterable[int]) -> tuple[int, ...]:
    return tuple(1 if x >= 0 else -1 for x in v)


def manhattan_norm(v) -> int:
    """Exact ``sum_j |v_j|`` of an integer vector."""
    return sum(abs(int(x)) for x in v)


def value(M: IntegerMatrix, s: SignAssignment) -> int:
    """Bilinear form ``sum_ij M_ij a_i b_j`` evaluated exactly."""
    if s.b is None:
        raise ValueError("value() needs column signs b; use SignAssignment.complete")
    if len(s.a) != M.rows or len(s.b) != M.cols:
        raise ValueError(
            f"sign lengths ({len(s.a)}, {len(s.b)}) do not match matrix {M.shape}"
        )
    return sum(bj * x for bj, x in zip(s.b, _combine(M, s.a)))


def read_matrix(source, *, bigint: bool = False) -> IntegerMatrix:
    """Parse a matrix from a path, bytes or a readable stream.

    The first line is ``"n m"``; then ``n`` lines of ``m`` integers. Any run of
    spaces or tabs separates tokens and blank trailing lines are ignored.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MatrixParseError("non-ASCII content", 1) from exc

    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MatrixParseError("empty input, expected header 'n m'", 1)

    header = lines[0].split()
    if len(header) != 2:
        raise MatrixParseError(f"header must be 'n m', got {lines[0]!r}", 1)
    try:
        n, m = (int(t) for t in header)
    except ValueError:
        raise MatrixParseError(f"header must be two integers, got {lines[0]!r}", 1)
    if n < 1 or m < 1:
        raise MatrixParseError(f"dimensions must be positive, got {n} x {m}", 1)
    rows = []
    for i, raw in enumerate(lines[1:], start=1):
        if i > n:
            raise MatrixParseError(f"expected {n} rows, found more", i + 1)
        tokens = raw.split()
        if len(tokens) != m:
            raise MatrixParseError(
                f"row {i} has {len(tokens)} entries, expected {m}", i + 1
            )
        row = []
        for j, tok in enumerate(tokens, start=1):
            try:
                row.append(int(tok, 10))
            except ValueError:
                raise MatrixParseError(
                    f"row {i}: invalid integer {tok!r}", i + 1, j
                ) from None
        rows.append(row)
    if len(rows) != n:
        raise MatrixParseError(f"expected {n} rows, found {len(rows)}", len(lines) + 1)
    try:
        return IntegerMatrix.from_rows(rows, bigint=bigint)
    except OverflowError as exc:
        raise MatrixParseError(str(exc), 1) from None


def write_matrix(M: IntegerMatrix, dest: str | os.PathLike | IO[str] | None = None) -> str:
    """Write ``M`` in the canonical format; returns the text as well."""
    text = M.to_text()
    if dest is None:
        return text
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)
    return text


def from_text(text: str, **kw) -> IntegerMatrix:
    """Parse matrix text held in a string."""
    return read_matrix(io.BytesIO(text.encode()), **kw)
