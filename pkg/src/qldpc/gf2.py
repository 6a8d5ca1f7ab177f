"""Bit-packed linear algebra over GF(2).

Matrices are stored row-major, one row per run of 64-bit words, with bit ``j``
of a row living in word ``j // 64`` at position ``j % 64``.  Padding bits past
the last column are always zero.  Everything here returns new values; the
packed payloads are marked read-only so matrices can be shared freely.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import numpy.typing as npt

from qldpc.errors import CapacityError, DimensionError, DomainError, ParseError

WORD_BITS = 64
_MAX_DIM = 2**31 - 1
_MAX_BITS = 2**34


def _n_words(cols: int) -> int:
    return (cols + WORD_BITS - 1) // WORD_BITS


def _pack(array: npt.ArrayLike) -> tuple[np.ndarray, int, int]:
    dense = np.asarray(array)
    if dense.ndim != 2:
        raise DimensionError(f"expected a 2D array, got shape {dense.shape}")
    rows, cols = dense.shape
    bits = (dense.astype(np.int64, copy=False) & 1).astype(np.uint8)
    n_words = _n_words(cols)
    if n_words == 0 or rows == 0:
        return np.zeros((rows, n_words), dtype=np.uint64), rows, cols
    padded = np.zeros((rows, n_words * WORD_BITS), dtype=np.uint8)
    padded[:, :cols] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    words = np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)
    return words.reshape(rows, n_words), rows, cols


def _unpack(words: np.ndarray, cols: int) -> np.ndarray:
    rows = words.shape[0]
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols), dtype=np.uint8)
    as_bytes = np.ascontiguousarray(words.astype("<u8")).view(np.uint8).reshape(rows, -1)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :cols]


def _frozen(words: np.ndarray) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype=np.uint64)
    words.flags.writeable = False
    return words


class BitMatrix:
    """Dense binary matrix with a bit-packed payload."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: np.ndarray | None = None) -> None:
        if rows < 0 or cols < 0:
            raise DimensionError(f"negative shape ({rows}, {cols})")
        if rows > _MAX_DIM or cols > _MAX_DIM or rows * _n_words(cols) * WORD_BITS > _MAX_BITS:
            raise CapacityError(f"shape ({rows}, {cols}) is too large")
        n_words = _n_words(cols)
        if data is None:
            data = np.zeros((rows, n_words), dtype=np.uint64)
        elif data.shape != (rows, n_words):
            raise DimensionError(f"payload shape {data.shape} does not match ({rows}, {n_words})")
        else:
            data = data.astype(np.uint64, copy=True)
            tail = cols % WORD_BITS
            if tail and rows:
                data[:, -1] &= np.uint64((1 << tail) - 1)
        self.rows = rows
        self.cols = cols
        self.data = _frozen(data)

    # construction -----------------------------------------------------------

    @classmethod
    def from_array(cls, array: npt.ArrayLike) -> BitMatrix:
        dense = np.asarray(array)
        if dense.ndim == 1 and dense.size == 0:
            dense = dense.reshape(0, 0)
        words, rows, cols = _pack(dense)
        return cls(rows, cols, words)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> BitMatrix:
        return cls(rows, cols)

    @classmethod
    def identity(cls, n: int) -> BitMatrix:
        return cls.from_array(np.eye(n, dtype=np.uint8))

    @classmethod
    def from_rows(cls, rows: Iterable[str], cols: int | None = None) -> BitMatrix:
        """Build from strings such as ``"1010"`` (whitespace inside a row is ignored)."""
        parsed = []
        for text in rows:
            bits = text.replace(" ", "").replace("\t", "")
            if any(ch not in "01" for ch in bits):
                raise ParseError(f"row {text!r} is not a 0/1 string")
            parsed.append([int(ch) for ch in bits])
        if not parsed:
            return cls.zeros(0, cols or 0)
        width = len(parsed[0])
        if any(len(row) != width for row in parsed) or (cols is not None and cols != width):
            raise ParseError("rows have inconsistent lengths")
        return cls.from_array(np.array(parsed, dtype=np.uint8))

    @classmethod
    def from_text(cls, text: str) -> BitMatrix:
        """Parse the ``rows cols`` header format used by fixtures and the CLI."""
        lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if not lines:
            raise ParseError("empty matrix text")
        header = lines[0].split()
        if len(header) != 2 or not all(tok.isdigit() for tok in header):
            raise ParseError(f"bad header {lines[0]!r}; expected 'rows cols'")
        rows, cols = int(header[0]), int(header[1])
        body = lines[1:]
        if cols == 0 and not body:
            return cls.zeros(rows, 0)
        if len(body) != rows:
            raise ParseError(f"header promises {rows} rows, found {len(body)}")
        if rows == 0:
            return cls.zeros(0, cols)
        return cls.from_rows(body, cols=cols)

    def to_text(self) -> str:
        dense = self.to_array()
        lines = [f"{self.rows} {self.cols}"]
        lines += ["".join(str(int(b)) for b in row) for row in dense]
        return "\n".join(lines) + "\n"

    def to_rows(self) -> list[str]:
        return ["".join(str(int(b)) for b in row) for row in self.to_array()]

    # views ------------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def to_array(self) -> np.ndarray:
        """Unpacked ``uint8`` copy of the matrix."""
        return _unpack(self.data, self.cols)

    def row(self, i: int) -> BitVector:
        return BitVector(self.cols, self.data[i])

    def __getitem__(self, index: tuple[int, int]) -> int:
        i, j = index
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(index)
        word, bit = divmod(j, WORD_BITS)
        return int((int(self.data[i, word]) >> bit) & 1)

    @property
    def T(self) -> BitMatrix:
        return BitMatrix.from_array(self.to_array().T)

    def row_supports(self) -> list[np.ndarray]:
        """Sparse read-only view: column indices of the ones in each row."""
        dense = self.to_array()
        return [np.flatnonzero(row) for row in dense]

    def col_supports(self) -> list[np.ndarray]:
        dense = self.to_array()
        return [np.flatnonzero(col) for col in dense.T]

    def nnz(self) -> int:
        return int(self.to_array().sum())

    def any(self) -> bool:
        return bool(self.data.any())

    def select_rows(self, index: Sequence[int] | np.ndarray) -> BitMatrix:
        index = np.asarray(index, dtype=np.int64)
        return BitMatrix(len(index), self.cols, self.data[index])

    def select_cols(self, index: Sequence[int] | np.ndarray) -> BitMatrix:
        return BitMatrix.from_array(self.to_array()[:, np.asarray(index, dtype=np.int64)])

    # arithmetic -------------------------------------------------------------

    def __add__(self, other: BitMatrix) -> BitMatrix:
        if self.shape != other.shape:
            raise DimensionError(f"cannot add {self.shape} and {other.shape}")
        return BitMatrix(self.rows, self.cols, self.data ^ other.data)

    __xor__ = __add__

    def __matmul__(self, other: BitMatrix) -> BitMatrix:
        return matmul(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.data.tobytes()))

    def __repr__(self) -> str:
        if self.rows * self.cols <= 400:
            body = "; ".join(self.to_rows())
            return f"BitMatrix({self.rows}x{self.cols}: {body})"
        return f"BitMatrix({self.rows}x{self.cols}, nnz={self.nnz()})"


class BitVector:
    """Bit-packed binary vector."""

    __slots__ = ("len", "data")

    def __init__(self, length: int, data: np.ndarray | None = None) -> None:
        if length < 0:
            raise DimensionError("negative length")
        n_words = _n_words(length)
        if data is None:
            data = np.zeros(n_words, dtype=np.uint64)
        else:
            data = np.asarray(data, dtype=np.uint64).copy().reshape(-1)
            if data.shape != (n_words,):
                raise DimensionError(f"payload length {data.shape} does not match {n_words}")
            tail = length % WORD_BITS
            if tail and n_words:
                data[-1] &= np.uint64((1 << tail) - 1)
        self.len = length
        self.data = _frozen(data)

    @classmethod
    def from_array(cls, array: npt.ArrayLike) -> BitVector:
        dense = np.asarray(array).reshape(1, -1)
        words, _, cols = _pack(dense)
        return cls(cols, words[0])

    @classmethod
    def from_bits(cls, text: str) -> BitVector:
        bits = text.replace(" ", "").replace(",", "")
        if any(ch not in "01" for ch in bits):
            raise ParseError(f"{text!r} is not a 0/1 string")
        return cls.from_array(np.array([int(ch) for ch in bits], dtype=np.uint8))

    @classmethod
    def zeros(cls, length: int) -> BitVector:
        return cls(length)

    @classmethod
    def unit(cls, length: int, index: int) -> BitVector:
        dense = np.zeros(length, dtype=np.uint8)
        dense[index] = 1
        return cls.from_array(dense)

    def to_array(self) -> np.ndarray:
        return _unpack(self.data.reshape(1, -1), self.len)[0]

    def to_bits(self) -> str:
        return "".join(str(int(b)) for b in self.to_array())

    def as_matrix(self) -> BitMatrix:
        return BitMatrix(1, self.len, self.data.reshape(1, -1))

    def weight(self) -> int:
        return int(sum(int(w).bit_count() for w in self.data))

    def any(self) -> bool:
        return bool(self.data.any())

    def dot(self, other: BitVector) -> int:
        if self.len != other.len:
            raise DimensionError(f"lengths {self.len} and {other.len} differ")
        return sum(int(w).bit_count() for w in (self.data & other.data)) & 1

    def __len__(self) -> int:
        return self.len

    def __getitem__(self, index: int) -> int:
        if not 0 <= index < self.len:
            raise IndexError(index)
        word, bit = divmod(index, WORD_BITS)
        return int((int(self.data[word]) >> bit) & 1)

    def __xor__(self, other: BitVector) -> BitVector:
        if self.len != other.len:
            raise DimensionError(f"lengths {self.len} and {other.len} differ")
        return BitVector(self.len, self.data ^ other.data)

    __add__ = __xor__

    def __and__(self, other: BitVector) -> BitVector:
        if self.len != other.len:
            raise DimensionError(f"lengths {self.len} and {other.len} differ")
        return BitVector(self.len, self.data & other.data)

    def __or__(self, other: BitVector) -> BitVector:
        if self.len != other.len:
            raise DimensionError(f"lengths {self.len} and {other.len} differ")
        return BitVector(self.len, self.data | other.data)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self.len == other.len and np.array_equal(self.data, other.data)

    def __hash__(self) -> int:
        return hash((self.len, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"BitVector({self.to_bits() if self.len <= 256 else f'len={self.len}'})"


def as_bitvector(v: BitVector | npt.ArrayLike) -> BitVector:
    return v if isinstance(v, BitVector) else BitVector.from_array(v)


def hstack(blocks: Sequence[BitMatrix]) -> BitMatrix:
    rows = {b.rows for b in blocks}
    if len(rows) != 1:
        raise DimensionError(f"row counts differ: {sorted(rows)}")
    return BitMatrix.from_array(np.hstack([b.to_array() for b in blocks]))


def vstack(blocks: Sequence[BitMatrix]) -> BitMatrix:
    cols = {b.cols for b in blocks}
    if len(cols) != 1:
        raise DimensionError(f"column counts differ: {sorted(cols)}")
    return BitMatrix(sum(b.rows for b in blocks), cols.pop(), np.vstack([b.data for b in blocks]))


def matmul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """Product over GF(2); row ``i`` of the result is the XOR of the rows of ``b`` picked by ``a[i]``."""
    if a.cols != b.rows:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    out = np.zeros((a.rows, b.data.shape[1]), dtype=np.uint64)
    if b.data.shape[1] == 0:
        return BitMatrix(a.rows, b.cols, out)
    for i, support in enumerate(a.row_supports()):
        if support.size:
            out[i] = np.bitwise_xor.reduce(b.data[support], axis=0)
    return BitMatrix(a.rows, b.cols, out)


def kron(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    rows, cols = a.rows * b.rows, a.cols * b.cols
    if rows > _MAX_DIM or cols > _MAX_DIM or rows * cols > _MAX_BITS:
        raise CapacityError(f"kron result ({rows}, {cols}) is too large")
    return BitMatrix.from_array(np.kron(a.to_array(), b.to_array()))


def _rref(words: np.ndarray, n_pivot_cols: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of packed rows; pivots only in the first ``n_pivot_cols`` columns.

    Pivots are chosen left to right, taking the topmost unused row for each column.
    All rows are returned (pivot rows first, in pivot order).
    """
    w = np.array(words, dtype=np.uint64, copy=True)
    n_rows = w.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(n_pivot_cols):
        if r == n_rows:
            break
        word, bit = divmod(c, WORD_BITS)
        mask = np.uint64(1 << bit)
        hits = np.flatnonzero(w[r:, word] & mask)
        if hits.size == 0:
            continue
        p = r + int(hits[0])
        if p != r:
            w[[r, p]] = w[[p, r]]
        others = np.flatnonzero(w[:, word] & mask)
        others = others[others != r]
        if others.size:
            w[others] ^= w[r]
        pivots.append(c)
        r += 1
    return w, pivots


def row_echelon(m: BitMatrix) -> tuple[BitMatrix, list[int]]:
    """Reduced row echelon form (nonzero rows only) and pivot columns."""
    w, pivots = _rref(m.data, m.cols)
    return BitMatrix(len(pivots), m.cols, w[: len(pivots)]), pivots


def rank(m: BitMatrix) -> int:
    return len(_rref(m.data, m.cols)[1])


def nullspace_basis(m: BitMatrix) -> BitMatrix:
    """Basis of ``{v : m v^T = 0}``, one free column per basis row."""
    reduced, pivots = row_echelon(m)
    free = [c for c in range(m.cols) if c not in set(pivots)]
    basis = np.zeros((len(free), m.cols), dtype=np.uint8)
    basis[np.arange(len(free)), free] = 1
    if pivots and free:
        dense = reduced.to_array()
        basis[:, pivots] = dense[:, free].T
    return BitMatrix.from_array(basis.reshape(len(free), m.cols))


def in_rowspace(v: BitVector | npt.ArrayLike, m: BitMatrix) -> bool:
    v = as_bitvector(v)
    if v.len != m.cols:
        raise DimensionError(f"vector length {v.len} does not match {m.cols} columns")
    if not v.any():
        return True
    reduced, pivots = row_echelon(m)
    acc = v.data.copy()
    for i, c in enumerate(pivots):
        word, bit = divmod(c, WORD_BITS)
        if (int(acc[word]) >> bit) & 1:
            acc ^= reduced.data[i]
    return not acc.any()


def solve(m: BitMatrix, s: BitVector | npt.ArrayLike) -> BitVector | None:
    """A solution of ``m x^T = s^T``, or ``None`` when the system is inconsistent.

    Free variables are set to zero, so the answer is canonical for the pivot rule.
    """
    s = as_bitvector(s)
    if s.len != m.rows:
        raise DimensionError(f"syndrome length {s.len} does not match {m.rows} rows")
    augmented = np.hstack([m.to_array(), s.to_array()[:, None]])
    words, _, _ = _pack(augmented)
    w, pivots = _rref(words, m.cols)
    dense = _unpack(w, m.cols + 1)
    if dense[len(pivots):, m.cols].any():
        return None
    x = np.zeros(m.cols, dtype=np.uint8)
    for i, c in enumerate(pivots):
        x[c] = dense[i, m.cols]
    return BitVector.from_array(x)


def circulant(shift: int, size: int) -> BitMatrix:
    """``size x size`` identity with every row cyclically shifted right by ``shift``."""
    if size < 1 or not 0 <= shift < size:
        raise DomainError(f"shift {shift} out of range for size {size}")
    dense = np.zeros((size, size), dtype=np.uint8)
    rows = np.arange(size)
    dense[rows, (rows + shift) % size] = 1
    return BitMatrix.from_array(dense)


def read_matrix(path: str | Path) -> BitMatrix:
    return BitMatrix.from_text(Path(path).read_text())


def write_matrix(m: BitMatrix, path: str | Path) -> None:
    Path(path).write_text(m.to_text())
