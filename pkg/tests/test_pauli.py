import itertools

import numpy as np
import pytest

from qldpc import pauli
from qldpc.errors import DimensionError, ParseError
from qldpc.pauli import CheckMatrix, PauliOp, parse_pauli, symplectic_product, syndrome

_MATS = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]]),
}


def _matrix(s):
    out = np.array([[1]])
    for ch in s:
        out = np.kron(out, _MATS[ch])
    return out


def test_parse_and_print():
    op = parse_pauli("XXIZIY")
    assert op.x.to_bits() == "110001"
    assert op.z.to_bits() == "000101"
    assert str(op) == "XXIZIY"
    assert pauli.weight(op) == 4


@pytest.mark.parametrize("bad", ["", "XQZ", "  "])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_pauli(bad)


def test_symplectic_product_matches_matrix_commutation():
    for a, b in itertools.product(["".join(p) for p in itertools.product("IXYZ", repeat=2)], repeat=2):
        ma, mb = _matrix(a), _matrix(b)
        commute = np.allclose(ma @ mb, mb @ ma)
        assert symplectic_product(parse_pauli(a), parse_pauli(b)) == (0 if commute else 1)


def test_symplectic_dimension_error():
    with pytest.raises(DimensionError):
        symplectic_product(parse_pauli("XX"), parse_pauli("X"))


def test_compose_drops_phase():
    assert str(parse_pauli("XZ").compose(parse_pauli("ZZ"))) == "YI"
    assert str(PauliOp.identity(3)) == "III"


def test_five_qubit_generators_commute():
    h = pauli.five_qubit_code()
    assert h.is_commuting()
    assert (h.n, h.m) == (5, 4)


def test_five_qubit_syndrome_matches_brute_force():
    h = pauli.five_qubit_code()
    for q in range(5):
        for ch in "XYZ":
            s = ["I"] * 5
            s[q] = ch
            e = parse_pauli("".join(s))
            expected = [symplectic_product(e, parse_pauli(g)) for g in pauli.FIVE_QUBIT_GENERATORS]
            assert syndrome(e, h).to_array().tolist() == expected
    # Z on the first qubit anticommutes with both generators that start with X
    assert syndrome(parse_pauli("ZIIII"), h).to_bits() == "1010"


def test_five_qubit_single_errors_have_distinct_syndromes():
    h = pauli.five_qubit_code()
    seen = set()
    for q in range(5):
        for ch in "XYZ":
            s = ["I"] * 5
            s[q] = ch
            seen.add(syndrome(parse_pauli("".join(s)), h).to_bits())
    assert len(seen) == 15 and "0000" not in seen


def test_check_matrix_text_round_trip():
    h = pauli.five_qubit_code()
    text = h.to_text()
    assert text.splitlines()[0] == "4 10"
    assert text.splitlines()[1] == "10010 | 01100"
    assert CheckMatrix.from_text(text) == h


def test_check_matrix_text_errors():
    with pytest.raises(ParseError):
        CheckMatrix.from_text("1 3\n1 | 00\n")


def test_generator_access():
    h = pauli.five_qubit_code()
    assert str(h.generator(0)) == "XZZXI"


def test_syndrome_dimension_error():
    with pytest.raises(DimensionError):
        syndrome(parse_pauli("XX"), pauli.five_qubit_code())
