import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_rank
from qldpc import code as qc
from qldpc import construct, gf2
from qldpc.code import CssCode, Residual, ResidualClassifier, StabilizerCode
from qldpc.errors import BudgetExceeded, CssViolation, DimensionError, EmptyLogicalSpace
from qldpc.gf2 import BitMatrix
from qldpc.pauli import five_qubit_code, parse_pauli


def brute_force_distance(parity, stabilizers):
    """Min weight of x with parity x = 0 and x outside rowspace(stabilizers)."""
    p = parity.to_array().astype(int)
    n = p.shape[1]
    best = None
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits)
        if not x.any() or ((p @ x) % 2).any():
            continue
        if gf2.in_rowspace(x, stabilizers):
            continue
        w = int(x.sum())
        best = w if best is None else min(best, w)
    return best


def small_codes():
    yield construct.hypergraph_product(BitMatrix.from_array([[1, 1]]), BitMatrix.from_array([[1, 1]]))
    yield construct.toric_code(2)
    yield construct.surface_code(2)
    yield construct.surface_code(3)
    yield construct.hypergraph_product(
        BitMatrix.from_array([[1, 1, 0], [0, 1, 1]]), BitMatrix.from_array([[1, 1]])
    )


@pytest.mark.parametrize("code", list(small_codes()), ids=lambda c: f"n{c.n}")
def test_exhaustive_distance_matches_brute_force(code):
    params = qc.distance_exhaustive(code)
    assert params.d_x == brute_force_distance(code.hx, code.hz)
    assert params.d_z == brute_force_distance(code.hz, code.hx)


@pytest.mark.parametrize("code", list(small_codes()), ids=lambda c: f"n{c.n}")
def test_k_and_logical_basis(code):
    assert code.k == code.n - dense_rank(code.hx.to_array()) - dense_rank(code.hz.to_array())
    basis = code.logicals
    assert basis.k == code.k
    assert basis.pairing() == BitMatrix.identity(code.k)
    # X logicals commute with Z checks, Z logicals with X checks
    assert not gf2.matmul(code.hz, basis.xbar.T).any()
    assert not gf2.matmul(code.hx, basis.zbar.T).any()
    for row in range(code.k):
        assert not gf2.in_rowspace(basis.xbar.row(row), code.hx)
        assert not gf2.in_rowspace(basis.zbar.row(row), code.hz)


def test_hp_five_qubit_parameters():
    code = construct.hypergraph_product(BitMatrix.from_array([[1, 1]]), BitMatrix.from_array([[1, 1]]))
    params = qc.code_params(code)
    assert (params.n, params.k, params.d) == (5, 1, 2)
    assert params.method == "exhaustive"


def test_css_violation_reports_first_pair():
    hx = BitMatrix.from_array([[1, 1, 0], [0, 1, 1]])
    hz = BitMatrix.from_array([[1, 1, 0], [1, 0, 0]])
    with pytest.raises(CssViolation) as info:
        qc.validate_css(hx, hz)
    assert (info.value.x_row, info.value.z_row) == (0, 1)


def test_css_dimension_error():
    with pytest.raises(DimensionError):
        CssCode(BitMatrix.zeros(1, 3), BitMatrix.zeros(1, 4))


def test_toric_distance_by_weight_bounded_search():
    code = construct.toric_code(4)
    params = qc.distance_exhaustive(code, w_max=4)
    assert params.d == 4


def test_budget_exceeded():
    with pytest.raises(BudgetExceeded):
        qc.distance_exhaustive(construct.gross_code(), w_max=12, budget=1000)


def test_probe_is_an_upper_bound_and_reproducible():
    code = construct.toric_code(3)
    a = qc.distance_probe(code, 50, seed=4)
    b = qc.distance_probe(code, 50, seed=4)
    assert a == b
    assert a.d_upper >= 3
    assert qc.distance_probe(code, 0).d_upper is None


def test_probe_monotone_in_trials():
    code = construct.surface_code(4)
    bounds = [qc.distance_probe(code, t, seed=1).d_upper for t in (1, 5, 25)]
    assert bounds == sorted(bounds, reverse=True)
    assert bounds[-1] >= 4


def test_probe_empty_logical_space(dummy_code):
    assert dummy_code.k == 0
    with pytest.raises(EmptyLogicalSpace):
        qc.distance_probe(dummy_code, 10)


def test_classify_residual_cases():
    code = construct.toric_code(3)
    zero = np.zeros(code.n, dtype=np.uint8)
    stab = code.hz.row(0).to_array()
    assert qc.classify_residual(zero, stab, code, "Z") is Residual.STABILIZER
    logical = code.logicals.zbar.row(0).to_array()
    assert qc.classify_residual(zero, logical, code, "Z") is Residual.LOGICAL
    single = np.eye(code.n, dtype=np.uint8)[0]
    assert qc.classify_residual(zero, single, code, "X") is Residual.SYNDROME_MISMATCH


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_batch_classifier_matches_reference(seed):
    rng = np.random.default_rng(seed)
    code = construct.toric_code(3)
    for side in ("X", "Z"):
        stabs = code.stabilizers_for(side).to_array()
        coeff = rng.integers(0, 2, size=(6, stabs.shape[0]))
        residuals = (coeff @ stabs) % 2
        residuals[1] ^= code.logicals.xbar.row(0).to_array() if side == "X" else code.logicals.zbar.row(0).to_array()
        residuals[2, 0] ^= 1
        residuals[3] = rng.integers(0, 2, size=code.n)
        got = ResidualClassifier(code, side).classify(residuals.astype(np.uint8))
        zero = np.zeros(code.n, dtype=np.uint8)
        for r, g in zip(residuals, got):
            assert qc.RESIDUAL_CODES[int(g)] is qc.classify_residual(zero, r, code, side)


def test_bundle_round_trip(tmp_path):
    code = construct.toric_code(3)
    path = tmp_path / "code.json"
    qc.save_code(code, path)
    data = json.loads(path.read_text())
    assert data["n"] == 18 and data["k"] == 2
    assert data["hx"][0] == "9 18"
    loaded = qc.load_code(path)
    assert loaded.hx == code.hx and loaded.hz == code.hz
    assert loaded.meta == code.meta
    assert loaded.logicals.xbar == code.logicals.xbar


def test_stabilizer_code_five_qubit():
    sc = StabilizerCode(five_qubit_code())
    assert sc.k == 1
    assert sc.in_stabilizer_group(parse_pauli("XZZXI"))
    assert sc.is_logical(parse_pauli("XXXXX"))
    assert sc.is_logical(parse_pauli("ZZZZZ"))
    assert not sc.is_logical(parse_pauli("XIIII"))
    sc.validate_logicals([parse_pauli("ZZZZZ")], [parse_pauli("XXXXX")])
