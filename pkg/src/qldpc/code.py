"""Stabilizer and CSS code models.

``CssCode`` is the workhorse: it validates ``hx hz^T = 0``, derives ``k`` from
ranks, builds paired logical bases, computes distances, and classifies the
residual left after decoding.
"""

from __future__ import annotations

import enum
import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from qldpc import gf2
from qldpc.errors import BudgetExceeded, CssViolation, DimensionError, EmptyLogicalSpace
from qldpc.gf2 import BitMatrix, BitVector
from qldpc.pauli import CheckMatrix, PauliOp, symplectic_product

Side = Literal["X", "Z"]

DEFAULT_ENUMERATION_BUDGET = 2**28


class Residual(enum.Enum):
    """How a decoder's residual ``e + ehat`` acts on the code."""

    SYNDROME_MISMATCH = "syndrome-mismatch"
    STABILIZER = "stabilizer"
    LOGICAL = "logical"


@dataclass(frozen=True)
class StabilizerCode:
    """General stabilizer code given by a commuting check matrix."""

    checks: CheckMatrix

    def __post_init__(self) -> None:
        if not self.checks.is_commuting():
            raise ValueError("stabilizer generators do not commute")

    @property
    def n(self) -> int:
        return self.checks.n

    @functools.cached_property
    def _stacked(self) -> BitMatrix:
        return gf2.hstack([self.checks.hx, self.checks.hz])

    @property
    def k(self) -> int:
        return self.n - gf2.rank(self._stacked)

    def in_stabilizer_group(self, op: PauliOp) -> bool:
        vec = BitVector.from_array(np.concatenate([op.x.to_array(), op.z.to_array()]))
        return gf2.in_rowspace(vec, self._stacked)

    def is_logical(self, op: PauliOp) -> bool:
        """True for operators that commute with every generator but are not stabilizers."""
        commutes = all(
            symplectic_product(op, self.checks.generator(i)) == 0 for i in range(self.checks.m)
        )
        return commutes and not self.in_stabilizer_group(op)

    def validate_logicals(self, zbar: list[PauliOp], xbar: list[PauliOp]) -> None:
        """Raise unless the given representatives form a paired logical basis."""
        if len(zbar) != self.k or len(xbar) != self.k:
            raise ValueError(f"expected {self.k} logical pairs")
        for op in [*zbar, *xbar]:
            if not self.is_logical(op):
                raise ValueError(f"{op} is not a logical operator")
        for i, z in enumerate(zbar):
            for j, other in enumerate(zbar):
                if symplectic_product(z, other):
                    raise ValueError(f"logical Z {i} and {j} anticommute")
            for j, x in enumerate(xbar):
                if symplectic_product(z, x) != int(i == j):
                    raise ValueError(f"logical Z {i} and X {j} have the wrong commutation")
        for i, x in enumerate(xbar):
            for j, other in enumerate(xbar):
                if symplectic_product(x, other):
                    raise ValueError(f"logical X {i} and {j} anticommute")


@dataclass(frozen=True)
class LogicalBasis:
    """Paired logical representatives with ``xbar zbar^T = I_k``."""

    zbar: BitMatrix
    xbar: BitMatrix

    @property
    def k(self) -> int:
        return self.zbar.rows

    def pairing(self) -> BitMatrix:
        return gf2.matmul(self.xbar, self.zbar.T)


@dataclass(frozen=True)
class CodeParams:
    n: int
    k: int
    d_x: int | None = None
    d_z: int | None = None
    d_upper: int | None = None
    method: str = "none"

    @property
    def d(self) -> int | None:
        if self.d_x is None or self.d_z is None:
            return None
        return min(self.d_x, self.d_z)

    def as_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "d_x": self.d_x,
            "d_z": self.d_z,
            "d": self.d,
            "d_upper": self.d_upper,
            "method": self.method,
        }


@dataclass(frozen=True, eq=False)
class CssCode:
    """CSS code ``(hx, hz)``; construction checks orthogonality.

    ``meta`` records where the code came from (constructor name and its
    arguments) so that structure-aware tools such as the two-block layered
    schedule can find their way back.
    """

    hx: BitMatrix
    hz: BitMatrix
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.hx.cols != self.hz.cols:
            raise DimensionError(f"hx has {self.hx.cols} columns, hz has {self.hz.cols}")
        product = gf2.matmul(self.hx, self.hz.T)
        if product.any():
            i, j = np.argwhere(product.to_array())[0]
            raise CssViolation(int(i), int(j))

    @property
    def n(self) -> int:
        return self.hx.cols

    @functools.cached_property
    def rank_x(self) -> int:
        return gf2.rank(self.hx)

    @functools.cached_property
    def rank_z(self) -> int:
        return gf2.rank(self.hz)

    @property
    def k(self) -> int:
        return self.n - self.rank_x - self.rank_z

    def check_matrix(self) -> CheckMatrix:
        """Full symplectic check matrix with X checks stacked above Z checks."""
        zx = BitMatrix.zeros(self.hx.rows, self.n)
        zz = BitMatrix.zeros(self.hz.rows, self.n)
        return CheckMatrix(gf2.vstack([self.hx, zz]), gf2.vstack([zx, self.hz]))

    def parity_for(self, side: Side) -> BitMatrix:
        """Checks that detect errors of the given type (Z checks see X errors)."""
        return self.hz if side == "X" else self.hx

    def stabilizers_for(self, side: Side) -> BitMatrix:
        """Checks whose rows are trivial errors of the given type."""
        return self.hx if side == "X" else self.hz

    @functools.cached_property
    def logicals(self) -> LogicalBasis:
        return logical_basis(self)

    def __repr__(self) -> str:
        family = self.meta.get("family", "css")
        return f"CssCode({family}, n={self.n}, k={self.k})"


def validate_css(hx: BitMatrix, hz: BitMatrix, meta: dict[str, Any] | None = None) -> CssCode:
    return CssCode(hx, hz, dict(meta or {}))


def _extend_to_quotient(subspace: BitMatrix, space: BitMatrix) -> BitMatrix:
    """Rows of ``space`` that extend a basis of ``rowspace(subspace)``, taken greedily in order."""
    reduced, pivots = gf2.row_echelon(subspace)
    basis = reduced.to_array().astype(np.uint8)
    pivot_list = list(pivots)
    picked = []
    for row in space.to_array():
        vec = row.copy()
        for i, c in enumerate(pivot_list):
            if vec[c]:
                vec ^= basis[i]
        nz = np.flatnonzero(vec)
        if nz.size == 0:
            continue
        c = int(nz[0])
        # keep the running basis fully reduced so the membership test stays a single sweep
        hits = np.flatnonzero(basis[:, c]) if basis.size else np.array([], dtype=int)
        if hits.size:
            basis[hits] ^= vec
        basis = np.vstack([basis, vec]) if basis.size else vec[None, :]
        pivot_list.append(c)
        picked.append(row)
    if not picked:
        return BitMatrix.zeros(0, space.cols)
    return BitMatrix.from_array(np.array(picked))


def logical_basis(code: CssCode) -> LogicalBasis:
    """Paired bases of Z-type and X-type logical operators.

    Candidates come from extending ``rowspace(hz)`` to ``ker(hx)`` (and the mirror
    image); a symplectic Gram-Schmidt pass then pairs each Z candidate with the
    first X candidate it anticommutes with.
    """
    if code.k == 0:
        raise EmptyLogicalSpace("code has k = 0")
    z_cand = _extend_to_quotient(code.hz, gf2.nullspace_basis(code.hx)).to_array()
    x_cand = _extend_to_quotient(code.hx, gf2.nullspace_basis(code.hz)).to_array()
    zs = [row.copy() for row in z_cand]
    xs = [row.copy() for row in x_cand]
    zbar, xbar = [], []
    while zs:
        z = zs.pop(0)
        partner = next(i for i, x in enumerate(xs) if int(x @ z) & 1)
        x = xs.pop(partner)
        zs = [zz ^ z if int(zz @ x) & 1 else zz for zz in zs]
        xs = [xx ^ x if int(xx @ z) & 1 else xx for xx in xs]
        zbar.append(z)
        xbar.append(x)
    return LogicalBasis(BitMatrix.from_array(np.array(zbar)), BitMatrix.from_array(np.array(xbar)))


# distances --------------------------------------------------------------------


def _popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def _min_logical_weight_kernel(kernel: np.ndarray, test: np.ndarray) -> int | None:
    """Minimum weight over span(kernel) of vectors with odd overlap with some row of ``test``."""
    dim, n = kernel.shape
    low = min(dim, 14)
    high = dim - low
    n_words = gf2._n_words(n)
    kw, _, _ = gf2._pack(kernel)
    tw, _, _ = gf2._pack(test)
    # all combinations of the first `low` basis rows
    table = np.zeros((1 << low, n_words), dtype=np.uint64)
    for i in range(low):
        size = 1 << i
        table[size : 2 * size] = table[:size] ^ kw[i]
    best: int | None = None
    for h in range(1 << high):
        offset = np.zeros(n_words, dtype=np.uint64)
        bits = h
        j = low
        while bits:
            if bits & 1:
                offset ^= kw[j]
            bits >>= 1
            j += 1
        vecs = table ^ offset
        nontrivial = np.zeros(len(vecs), dtype=bool)
        for t in tw:
            nontrivial |= (_popcount(vecs & t) & 1).astype(bool)
        if nontrivial.any():
            w = int(_popcount(vecs[nontrivial]).min())
            best = w if best is None else min(best, w)
    return best


def _min_logical_weight_bounded(
    parity: np.ndarray, test: np.ndarray, w_max: int
) -> int | None:
    """Smallest weight <= w_max of x with parity x = 0 and odd overlap with a test row."""
    n = parity.shape[1]
    signature = np.vstack([parity, test]).T  # one row per qubit
    sig, _, _ = gf2._pack(signature)
    n_checks = parity.shape[0]
    check_mask, _, _ = gf2._pack(
        np.concatenate([np.ones(n_checks), np.zeros(test.shape[0])])[None, :].astype(np.uint8)
    )
    check_mask = check_mask[0]
    chunk = 1 << 16
    for w in range(1, w_max + 1):
        combos = itertools.combinations(range(n), w)
        while True:
            block = np.fromiter(
                itertools.chain.from_iterable(itertools.islice(combos, chunk)), dtype=np.int64
            )
            if block.size == 0:
                break
            idx = block.reshape(-1, w)
            acc = np.bitwise_xor.reduce(sig[idx], axis=1)
            zero_syndrome = ~(acc & check_mask).any(axis=1)
            logical = (acc & ~check_mask).any(axis=1)
            if (zero_syndrome & logical).any():
                return w
    return None


def _side_distance(
    parity: BitMatrix, test: np.ndarray, w_max: int, budget: int
) -> tuple[int, str]:
    n = parity.cols
    kernel = gf2.nullspace_basis(parity)
    kernel_count = 1 << kernel.rows
    bounded_count = sum(math.comb(n, w) for w in range(1, w_max + 1))
    if min(kernel_count, bounded_count) > budget:
        raise BudgetExceeded(
            f"kernel enumeration needs 2^{kernel.rows} and weight<= {w_max} search "
            f"needs {bounded_count} candidates; budget is {budget}"
        )
    if bounded_count < kernel_count:
        found = _min_logical_weight_bounded(parity.to_array(), test, w_max)
        if found is not None:
            return found, "weight-bounded"
        if kernel_count > budget:
            raise BudgetExceeded(f"no logical of weight <= {w_max}; kernel too large to finish")
    found = _min_logical_weight_kernel(kernel.to_array(), test)
    assert found is not None
    return found, "kernel"


def distance_exhaustive(
    code: CssCode, w_max: int | None = None, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> CodeParams:
    """Exact ``d_x`` (over ker hx minus rowspace hz) and ``d_z`` (the mirror image).

    Uses whichever is smaller: enumerating the kernel, or all vectors of weight
    at most ``w_max``.  Raises :class:`BudgetExceeded` rather than returning a
    partial answer.
    """
    if code.k == 0:
        return CodeParams(code.n, 0, method="exhaustive")
    w_max = code.n if w_max is None else w_max
    basis = code.logicals
    # a vector in ker(hx) is a nontrivial logical iff it anticommutes with some X logical
    d_x, _ = _side_distance(code.hx, basis.xbar.to_array(), w_max, budget)
    d_z, _ = _side_distance(code.hz, basis.zbar.to_array(), w_max, budget)
    return CodeParams(code.n, code.k, d_x=d_x, d_z=d_z, method="exhaustive")


def _probe_side(
    parity: BitMatrix, test: np.ndarray, trials: int, rng: np.random.Generator
) -> int | None:
    kernel = gf2.nullspace_basis(parity).to_array()
    best: int | None = None
    n = kernel.shape[1]
    for _ in range(trials):
        perm = rng.permutation(n)
        words, _, _ = gf2._pack(kernel[:, perm])
        reduced, pivots = gf2._rref(words, n)
        reduced = reduced[: len(pivots)]
        tw, _, _ = gf2._pack(test[:, perm])
        nontrivial = np.zeros(len(reduced), dtype=bool)
        for t in tw:
            nontrivial |= (_popcount(reduced & t) & 1).astype(bool)
        if nontrivial.any():
            w = int(_popcount(reduced[nontrivial]).min())
            best = w if best is None else min(best, w)
    return best


def distance_probe(code: CssCode, trials: int, seed: int | None = 0) -> CodeParams:
    """Randomized information-set upper bound on the distance.

    Each trial permutes the columns of a kernel basis, row reduces, and keeps
    the lightest reduced row that is a nontrivial logical.  The bound can only
    improve as ``trials`` grows and is reproducible for a fixed ``seed``.
    """
    if code.k == 0:
        raise EmptyLogicalSpace("code has k = 0")
    if trials <= 0:
        return CodeParams(code.n, code.k, method="probe")
    rng = np.random.default_rng(seed)
    basis = code.logicals
    up_x = _probe_side(code.hx, basis.xbar.to_array(), trials, rng)
    up_z = _probe_side(code.hz, basis.zbar.to_array(), trials, rng)
    bounds = [b for b in (up_x, up_z) if b is not None]
    return CodeParams(code.n, code.k, d_upper=min(bounds) if bounds else None, method="probe")


def code_params(code: CssCode) -> CodeParams:
    """Exact parameters when cheap, otherwise a probe bound (labelled as such)."""
    if code.k == 0:
        return CodeParams(code.n, 0, method="exhaustive")
    small = code.n <= 14 or max(code.n - code.rank_x, code.n - code.rank_z) <= 28
    if small:
        try:
            return distance_exhaustive(code)
        except BudgetExceeded:
            pass
    return distance_probe(code, trials=1000, seed=0)


# residual classification ------------------------------------------------------------


def classify_residual(
    e: BitVector | np.ndarray, ehat: BitVector | np.ndarray, code: CssCode, side: Side
) -> Residual:
    """Decide whether ``e + ehat`` is harmless, a logical error, or leaves a syndrome."""
    e, ehat = gf2.as_bitvector(e), gf2.as_bitvector(ehat)
    if e.len != code.n or ehat.len != code.n:
        raise DimensionError(f"vectors of length {e.len}, {ehat.len} for a code with n={code.n}")
    r = e ^ ehat
    if gf2.matmul(code.parity_for(side), r.as_matrix().T).any():
        return Residual.SYNDROME_MISMATCH
    if gf2.in_rowspace(r, code.stabilizers_for(side)):
        return Residual.STABILIZER
    return Residual.LOGICAL


class ResidualClassifier:
    """Vectorized :func:`classify_residual` for batches of residuals of one side."""

    def __init__(self, code: CssCode, side: Side) -> None:
        self.side = side
        self.parity = code.parity_for(side).to_array().astype(np.uint8)
        if code.k:
            # X residuals are caught by Z logicals and vice versa
            basis = code.logicals
            self.test = (basis.zbar if side == "X" else basis.xbar).to_array().astype(np.uint8)
        else:
            self.test = np.zeros((0, code.n), dtype=np.uint8)

    def classify(self, residuals: np.ndarray) -> np.ndarray:
        """Codes per row: 0 stabilizer, 1 logical, 2 syndrome mismatch."""
        r = np.asarray(residuals, dtype=np.uint8)
        mismatch = ((r @ self.parity.T) & 1).any(axis=1)
        logical = ((r @ self.test.T) & 1).any(axis=1)
        out = np.where(mismatch, 2, np.where(logical, 1, 0))
        return out.astype(np.int8)


RESIDUAL_CODES = {0: Residual.STABILIZER, 1: Residual.LOGICAL, 2: Residual.SYNDROME_MISMATCH}


# bundles ---------------------------------------------------------------------------


def _matrix_lines(m: BitMatrix) -> list[str]:
    return m.to_text().strip().splitlines()


def _matrix_from_lines(lines: list[str]) -> BitMatrix:
    return BitMatrix.from_text("\n".join(lines))


def code_to_bundle(code: CssCode, include_logicals: bool = True) -> dict[str, Any]:
    bundle: dict[str, Any] = {
        "n": code.n,
        "k": code.k,
        "hx": _matrix_lines(code.hx),
        "hz": _matrix_lines(code.hz),
        "meta": code.meta,
    }
    if include_logicals and code.k:
        bundle["zbar"] = _matrix_lines(code.logicals.zbar)
        bundle["xbar"] = _matrix_lines(code.logicals.xbar)
    return bundle


def code_from_bundle(bundle: dict[str, Any]) -> CssCode:
    code = validate_css(
        _matrix_from_lines(bundle["hx"]), _matrix_from_lines(bundle["hz"]), bundle.get("meta")
    )
    if "n" in bundle and bundle["n"] != code.n:
        raise ValueError(f"bundle says n={bundle['n']} but matrices have {code.n} columns")
    if "k" in bundle and bundle["k"] != code.k:
        raise ValueError(f"bundle says k={bundle['k']} but ranks give {code.k}")
    return code


def save_code(code: CssCode, path: str | Path) -> None:
    Path(path).write_text(json.dumps(code_to_bundle(code), indent=1))


def load_code(path: str | Path) -> CssCode:
    return code_from_bundle(json.loads(Path(path).read_text()))
