"""Code constructors: hypergraph product, quasi-cyclic lifted product, two-block,
bivariate bicycle, and two-block group-algebra codes, plus toric/surface helpers.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from qldpc import gf2
from qldpc.code import CssCode, validate_css
from qldpc.errors import CommutationError, DomainError, LiftError, ParseError
from qldpc.gf2 import BitMatrix

# hypergraph product ----------------------------------------------------------


def hypergraph_product(ha: BitMatrix, hb: BitMatrix) -> CssCode:
    """``H_X = [ha (x) I | I (x) hb^T]``, ``H_Z = [I (x) hb | ha^T (x) I]``."""
    ra, na = ha.shape
    rb, nb = hb.shape
    hx = gf2.hstack(
        [gf2.kron(ha, BitMatrix.identity(nb)), gf2.kron(BitMatrix.identity(ra), hb.T)]
    )
    hz = gf2.hstack(
        [gf2.kron(BitMatrix.identity(na), hb), gf2.kron(ha.T, BitMatrix.identity(rb))]
    )
    return validate_css(hx, hz, {"family": "hypergraph-product", "shape_a": [ra, na], "shape_b": [rb, nb]})


def repetition_check(L: int, closed: bool = True) -> BitMatrix:
    """Repetition-code checks: the cyclic ``I + S`` (closed) or the open chain."""
    if L < 2:
        raise DomainError(f"repetition length must be >= 2, got {L}")
    rows = L if closed else L - 1
    dense = np.zeros((rows, L), dtype=np.uint8)
    for i in range(rows):
        dense[i, i] = 1
        dense[i, (i + 1) % L] = 1
    return BitMatrix.from_array(dense)


def toric_code(L: int) -> CssCode:
    code = hypergraph_product(repetition_check(L, True), repetition_check(L, True))
    return CssCode(code.hx, code.hz, {"family": "toric", "L": L})


def surface_code(L: int) -> CssCode:
    code = hypergraph_product(repetition_check(L, False), repetition_check(L, False))
    return CssCode(code.hx, code.hz, {"family": "surface", "L": L})


# lifted product ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BaseMatrix:
    """Matrix over ``Z_q`` with ``-1`` marking an all-zero block."""

    entries: np.ndarray
    q: int

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.int64)
        if entries.ndim != 2:
            raise DomainError("base matrix must be two-dimensional")
        if self.q < 1:
            raise DomainError(f"lift size must be positive, got {self.q}")
        bad = (entries < -1) | (entries >= self.q)
        if bad.any():
            raise DomainError(f"base entries must lie in {{-1, 0, ..., {self.q - 1}}}")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape  # type: ignore[return-value]

    @classmethod
    def identity(cls, n: int, q: int) -> BaseMatrix:
        entries = np.full((n, n), -1, dtype=np.int64)
        np.fill_diagonal(entries, 0)
        return cls(entries, q)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BaseMatrix):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.entries, other.entries)


def conjugate_transpose(b: BaseMatrix) -> BaseMatrix:
    """Transpose and negate every shift mod q; ``-1`` entries stay put."""
    t = b.entries.T
    return BaseMatrix(np.where(t < 0, -1, (b.q - t) % b.q), b.q)


def lift(b: BaseMatrix) -> BitMatrix:
    """Replace each entry by its ``q x q`` circulant (zero block for ``-1``)."""
    r, c = b.shape
    q = b.q
    dense = np.zeros((r * q, c * q), dtype=np.uint8)
    for (i, j), shift in np.ndenumerate(b.entries):
        if shift >= 0:
            dense[i * q : (i + 1) * q, j * q : (j + 1) * q] = gf2.circulant(int(shift), q).to_array()
    return BitMatrix.from_array(dense)


def _base_kron(a: BaseMatrix, b: BaseMatrix) -> BaseMatrix:
    # entry product is addition of shifts; -1 absorbs
    ea, eb = a.entries, b.entries
    prod = (ea[:, None, :, None] + eb[None, :, None, :]) % a.q
    absent = (ea[:, None, :, None] < 0) | (eb[None, :, None, :] < 0)
    out = np.where(absent, -1, prod)
    ra, ca = ea.shape
    rb, cb = eb.shape
    return BaseMatrix(out.reshape(ra * rb, ca * cb), a.q)


def _base_hstack(blocks: Sequence[BaseMatrix]) -> BaseMatrix:
    return BaseMatrix(np.hstack([blk.entries for blk in blocks]), blocks[0].q)


def lifted_product(ba: BaseMatrix, bb: BaseMatrix) -> CssCode:
    """Quasi-cyclic lifted product: the hypergraph product at base level, then lifted."""
    if ba.q != bb.q:
        raise LiftError(f"lift sizes differ: {ba.q} vs {bb.q}")
    q = ba.q
    ra, na = ba.shape
    rb, nb = bb.shape
    bx = _base_hstack(
        [_base_kron(ba, BaseMatrix.identity(nb, q)), _base_kron(BaseMatrix.identity(ra, q), conjugate_transpose(bb))]
    )
    bz = _base_hstack(
        [_base_kron(BaseMatrix.identity(na, q), bb), _base_kron(conjugate_transpose(ba), BaseMatrix.identity(rb, q))]
    )
    meta = {"family": "lifted-product", "q": q, "base_a": ba.entries.tolist(), "base_b": bb.entries.tolist()}
    return validate_css(lift(bx), lift(bz), meta)


# two-block family ------------------------------------------------------------------


def two_block(a: BitMatrix, b: BitMatrix, meta: dict | None = None) -> CssCode:
    """``H_X = [A | B]``, ``H_Z = [B^T | A^T]`` for commuting square ``A``, ``B``."""
    if a.rows != a.cols or b.shape != a.shape:
        raise DomainError(f"two-block inputs must be square and equal in size, got {a.shape}, {b.shape}")
    if gf2.matmul(a, b) != gf2.matmul(b, a):
        raise CommutationError("A B != B A")
    hx = gf2.hstack([a, b])
    hz = gf2.hstack([b.T, a.T])
    info = {"family": "two-block", "block": a.rows}
    info.update(meta or {})
    return validate_css(hx, hz, info)


Monomial = tuple[int, int]

_MONOMIAL = re.compile(r"^(?:x(\d*))?(?:y(\d*))?$")


def parse_monomials(text: str) -> list[Monomial]:
    """Parse ``"x3,y1,y2"`` (or ``"x1y2"`` style mixed terms) into ``(x-power, y-power)`` pairs."""
    out = []
    for term in text.replace(" ", "").split(","):
        if term in ("", "1"):
            out.append((0, 0))
            continue
        match = _MONOMIAL.match(term.replace("^", ""))
        if not match or not term:
            raise ParseError(f"cannot parse monomial {term!r}")
        xs, ys = match.groups()
        i = 0 if xs is None else int(xs or 1)
        j = 0 if ys is None else int(ys or 1)
        out.append((i, j))
    return out


def _monomial_sum(ell: int, m: int, monomials: Sequence[Monomial]) -> BitMatrix:
    total = np.zeros((ell * m, ell * m), dtype=np.uint8)
    for i, j in monomials:
        term = np.kron(gf2.circulant(i % ell, ell).to_array(), gf2.circulant(j % m, m).to_array())
        total ^= term
    return BitMatrix.from_array(total)


def bivariate_bicycle(
    ell: int,
    m: int,
    a_monomials: Sequence[Monomial],
    b_monomials: Sequence[Monomial],
    relaxed: bool = False,
) -> CssCode:
    """Two-block code with ``A``, ``B`` sums of monomials in ``x = S_ell (x) I``, ``y = I (x) S_m``."""
    for name, monos in (("A", a_monomials), ("B", b_monomials)):
        reduced = [(i % ell, j % m) for i, j in monos]
        if len(set(reduced)) != len(reduced):
            raise DomainError(f"{name} has repeated monomials, which cancel over GF(2)")
        if not relaxed and len(monos) != 3:
            raise DomainError(f"{name} needs exactly three monomials (pass relaxed=True otherwise)")
        if not monos:
            raise DomainError(f"{name} is empty")
    a = _monomial_sum(ell, m, a_monomials)
    b = _monomial_sum(ell, m, b_monomials)
    meta = {
        "family": "bivariate-bicycle",
        "ell": ell,
        "m": m,
        "a": [list(t) for t in a_monomials],
        "b": [list(t) for t in b_monomials],
    }
    return two_block(a, b, meta)


GROSS_A: tuple[Monomial, ...] = ((3, 0), (0, 1), (0, 2))
GROSS_B: tuple[Monomial, ...] = ((0, 3), (1, 0), (2, 0))


def gross_code() -> CssCode:
    """The [[144, 12, 12]] bivariate bicycle code (A = x^3 + y + y^2, B = y^3 + x + x^2)."""
    return bivariate_bicycle(12, 6, GROSS_A, GROSS_B)


# groups and Cayley graphs ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupSpec:
    """Finite group given by its multiplication table, ``mul[g, h] = g h``."""

    mul: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        table = np.array(self.mul, dtype=np.int64)
        n = table.shape[0]
        if table.shape != (n, n) or n == 0:
            raise DomainError("multiplication table must be square and nonempty")
        if (table < 0).any() or (table >= n).any():
            raise DomainError("table is not closed")
        ident = [e for e in range(n) if (table[e] == np.arange(n)).all() and (table[:, e] == np.arange(n)).all()]
        if len(ident) != 1:
            raise DomainError("table has no two-sided identity")
        e = ident[0]
        for g in range(n):
            if not ((table[g] == e).any() and (table[:, g] == e).any()):
                raise DomainError(f"element {g} has no inverse")
        left = table[table[:, :, None], np.arange(n)[None, None, :]]  # (gh)k
        right = table[np.arange(n)[:, None, None], table[None, :, :]]  # g(hk)
        if not np.array_equal(left, right):
            raise DomainError("table is not associative")
        labels = tuple(self.labels) or tuple(str(i) for i in range(n))
        if len(labels) != n:
            raise DomainError("need one label per element")
        table.flags.writeable = False
        object.__setattr__(self, "mul", table)
        object.__setattr__(self, "labels", labels)

    @property
    def order(self) -> int:
        return self.mul.shape[0]

    @property
    def identity(self) -> int:
        return int(np.flatnonzero((self.mul == np.arange(self.order)).all(axis=1))[0])

    def index(self, element: int | str) -> int:
        if isinstance(element, (int, np.integer)):
            if not 0 <= element < self.order:
                raise DomainError(f"no element {element}")
            return int(element)
        key = element.replace("^", "").replace(" ", "")
        for i, label in enumerate(self.labels):
            if label.replace("^", "") == key:
                return i
        raise DomainError(f"unknown element {element!r}")


def cyclic_group(q: int) -> GroupSpec:
    idx = np.arange(q)
    return GroupSpec((idx[:, None] + idx[None, :]) % q, tuple(str(i) for i in range(q)))


def _power_label(base: str, i: int) -> str:
    return "" if i == 0 else base if i == 1 else f"{base}^{i}"


def dihedral_group(r: int) -> GroupSpec:
    """Symmetries of the r-gon, ordered ``e, a, a^2, ..., b, ab, a^2b, ...`` with ``b a = a^-1 b``."""
    n = 2 * r
    table = np.zeros((n, n), dtype=np.int64)
    for g in range(n):
        i, j = g % r, g // r
        for h in range(n):
            k, l = h % r, h // r
            power = (i + (k if j == 0 else -k)) % r
            table[g, h] = ((j + l) % 2) * r + power
    labels = []
    for g in range(n):
        i, j = g % r, g // r
        label = _power_label("a", i) + ("b" if j else "")
        labels.append(label or "e")
    return GroupSpec(table, tuple(labels))


def direct_product(g: GroupSpec, h: GroupSpec) -> GroupSpec:
    """``G x H`` with element ``(a, b)`` at index ``a * |H| + b``."""
    ng, nh = g.order, h.order
    a = np.arange(ng * nh)
    ga, hb = a // nh, a % nh
    table = g.mul[ga[:, None], ga[None, :]] * nh + h.mul[hb[:, None], hb[None, :]]
    labels = tuple(f"({x},{y})" for x, y in itertools.product(g.labels, h.labels))
    return GroupSpec(table, labels)


@dataclass(frozen=True, eq=False)
class CayleySpec:
    group: GroupSpec
    gens: tuple[int, ...]
    side: str = "right"

    def __post_init__(self) -> None:
        if not self.gens:
            raise DomainError("generator set is empty")
        gens = tuple(self.group.index(s) for s in self.gens)
        if len(set(gens)) != len(gens):
            raise DomainError("generators repeat")
        if self.side not in ("right", "left"):
            raise DomainError(f"side must be 'right' or 'left', got {self.side!r}")
        object.__setattr__(self, "gens", gens)


def cayley_adjacency(spec: CayleySpec) -> BitMatrix:
    """``M[g, h] = 1`` iff ``h = g s`` (right action) or ``h = s g`` (left) for some generator ``s``."""
    n = spec.group.order
    dense = np.zeros((n, n), dtype=np.uint8)
    for g in range(n):
        for s in spec.gens:
            h = spec.group.mul[g, s] if spec.side == "right" else spec.group.mul[s, g]
            dense[g, h] ^= 1
    return BitMatrix.from_array(dense)


def two_block_group_algebra(
    group: GroupSpec, sa: Sequence[int | str], sb: Sequence[int | str]
) -> CssCode:
    """Two-block code from the right Cayley graph of ``sa`` and the left Cayley graph of ``sb``."""
    a = cayley_adjacency(CayleySpec(group, tuple(sa), "right"))
    b = cayley_adjacency(CayleySpec(group, tuple(sb), "left"))
    # right and left translations always commute
    assert gf2.matmul(a, b) == gf2.matmul(b, a)
    meta = {
        "family": "2bga",
        "group_order": group.order,
        "sa": [group.labels[group.index(s)] for s in sa],
        "sb": [group.labels[group.index(s)] for s in sb],
    }
    return two_block(a, b, meta)


def random_base_matrix(rows: int, cols: int, q: int, rng: np.random.Generator, p_absent: float = 0.3) -> BaseMatrix:
    entries = rng.integers(0, q, size=(rows, cols))
    entries[rng.random((rows, cols)) < p_absent] = -1
    return BaseMatrix(entries, q)


def random_binary(rows: int, cols: int, rng: np.random.Generator, density: float = 0.4) -> BitMatrix:
    return BitMatrix.from_array((rng.random((rows, cols)) < density).astype(np.uint8))


def as_matrix(array: npt.ArrayLike | BitMatrix) -> BitMatrix:
    return array if isinstance(array, BitMatrix) else BitMatrix.from_array(array)
