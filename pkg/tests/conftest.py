import numpy as np
import pytest

from qldpc.code import CssCode
from qldpc.gf2 import BitMatrix

# the four-qubit example with two X checks and two Z checks (k = 0)
DUMMY_HX = [[1, 0, 1, 0], [0, 1, 0, 1]]
DUMMY_HZ = [[0, 1, 0, 1], [1, 0, 1, 0]]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def dummy_code():
    return CssCode(BitMatrix.from_array(DUMMY_HX), BitMatrix.from_array(DUMMY_HZ))


def dense_rank(a):
    """Plain Gaussian elimination over GF(2), independent of the packed kernels."""
    a = np.array(a, dtype=np.uint8) % 2
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, rows) if a[i, c]), None)
        if pivot is None:
            continue
        a[[r, pivot]] = a[[pivot, r]]
        for i in range(rows):
            if i != r and a[i, c]:
                a[i] ^= a[r]
        r += 1
        if r == rows:
            break
    return r
