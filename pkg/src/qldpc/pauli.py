"""Pauli operators in symplectic form and general stabilizer check matrices.

Phases are dropped everywhere: a Pauli operator is just its pair of X and Z
bit vectors, and the product of two operators is the XOR of those pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qldpc import gf2
from qldpc.errors import DimensionError, ParseError
from qldpc.gf2 import BitMatrix, BitVector

_TO_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_FROM_BITS = {bits: ch for ch, bits in _TO_BITS.items()}


@dataclass(frozen=True)
class PauliOp:
    """An n-qubit Pauli operator ``(x | z)``; a Y on qubit i sets both ``x[i]`` and ``z[i]``."""

    x: BitVector
    z: BitVector

    def __post_init__(self) -> None:
        if self.x.len != self.z.len:
            raise DimensionError(f"x part has {self.x.len} bits, z part {self.z.len}")

    @property
    def n(self) -> int:
        return self.x.len

    @classmethod
    def identity(cls, n: int) -> PauliOp:
        return cls(BitVector.zeros(n), BitVector.zeros(n))

    @classmethod
    def from_arrays(cls, x, z) -> PauliOp:
        return cls(gf2.as_bitvector(x), gf2.as_bitvector(z))

    def compose(self, other: PauliOp) -> PauliOp:
        """Product up to phase."""
        return PauliOp(self.x ^ other.x, self.z ^ other.z)

    def __str__(self) -> str:
        xs, zs = self.x.to_array(), self.z.to_array()
        return "".join(_FROM_BITS[(int(a), int(b))] for a, b in zip(xs, zs))


def parse_pauli(text: str) -> PauliOp:
    """Parse a string such as ``"XXIZIY"``."""
    text = text.strip()
    if not text:
        raise ParseError("empty Pauli string")
    try:
        pairs = [_TO_BITS[ch] for ch in text.upper()]
    except KeyError as exc:
        raise ParseError(f"invalid Pauli character {exc.args[0]!r} in {text!r}") from None
    bits = np.array(pairs, dtype=np.uint8)
    return PauliOp.from_arrays(bits[:, 0], bits[:, 1])


def symplectic_product(p: PauliOp, q: PauliOp) -> int:
    """0 if the operators commute, 1 if they anticommute."""
    if p.n != q.n:
        raise DimensionError(f"operators act on {p.n} and {q.n} qubits")
    return p.x.dot(q.z) ^ p.z.dot(q.x)


def weight(p: PauliOp) -> int:
    return (p.x | p.z).weight()


@dataclass(frozen=True)
class CheckMatrix:
    """Stabilizer generators as rows of ``(hx | hz)``."""

    hx: BitMatrix
    hz: BitMatrix

    def __post_init__(self) -> None:
        if self.hx.shape != self.hz.shape:
            raise DimensionError(f"hx is {self.hx.shape} but hz is {self.hz.shape}")

    @property
    def n(self) -> int:
        return self.hx.cols

    @property
    def m(self) -> int:
        return self.hx.rows

    @classmethod
    def from_paulis(cls, generators: list[str] | list[PauliOp]) -> CheckMatrix:
        ops = [parse_pauli(g) if isinstance(g, str) else g for g in generators]
        hx = BitMatrix.from_array(np.array([op.x.to_array() for op in ops]))
        hz = BitMatrix.from_array(np.array([op.z.to_array() for op in ops]))
        return cls(hx, hz)

    @classmethod
    def from_text(cls, text: str) -> CheckMatrix:
        """Parse the side-by-side layout: a ``rows 2n`` header, then rows ``hx-bits | hz-bits``."""
        lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
        header = lines[0].split()
        if len(header) != 2:
            raise ParseError(f"bad header {lines[0]!r}")
        rows, cols = int(header[0]), int(header[1])
        if cols % 2:
            raise ParseError("check matrix must have an even number of columns")
        body = [line.replace("|", "") for line in lines[1:]]
        full = BitMatrix.from_text("\n".join([f"{rows} {cols}", *body]))
        dense = full.to_array()
        n = cols // 2
        return cls(BitMatrix.from_array(dense[:, :n]), BitMatrix.from_array(dense[:, n:]))

    def to_text(self) -> str:
        lines = [f"{self.m} {2 * self.n}"]
        for a, b in zip(self.hx.to_rows(), self.hz.to_rows()):
            lines.append(f"{a} | {b}")
        return "\n".join(lines) + "\n"

    def generator(self, i: int) -> PauliOp:
        return PauliOp(self.hx.row(i), self.hz.row(i))

    def is_commuting(self) -> bool:
        prod = gf2.matmul(self.hx, self.hz.T) + gf2.matmul(self.hz, self.hx.T)
        return not prod.any()


def syndrome(e: PauliOp, h: CheckMatrix) -> BitVector:
    """``s = e_x hz^T + e_z hx^T``: bit i flags anticommutation with generator i."""
    if e.n != h.n:
        raise DimensionError(f"error acts on {e.n} qubits, code has {h.n}")
    sx = gf2.matmul(h.hz, e.x.as_matrix().T)
    sz = gf2.matmul(h.hx, e.z.as_matrix().T)
    return BitVector.from_array((sx + sz).to_array()[:, 0])


FIVE_QUBIT_GENERATORS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")


def five_qubit_code() -> CheckMatrix:
    """The cyclic [[5,1,3]] code."""
    return CheckMatrix.from_paulis(list(FIVE_QUBIT_GENERATORS))
