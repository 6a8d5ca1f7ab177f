import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qldpc import construct, decode, noise
from qldpc.code import Residual, classify_residual
from qldpc.decode import BPDecoder, DecoderConfig, Layering
from qldpc.errors import DimensionError, DomainError, InconsistentSyndrome, PolicyError
from qldpc.gf2 import BitMatrix


def random_tree_code(rng, n_vars, n_checks):
    """Check matrix whose Tanner graph is a tree with the given node counts."""
    nodes = [("v", 0)]
    remaining = {"v": n_vars - 1, "c": n_checks}
    edges = []
    counters = {"v": 1, "c": 0}
    while remaining["v"] or remaining["c"]:
        kind = rng.choice([k for k in ("v", "c") if remaining[k]])
        other = "c" if kind == "v" else "v"
        anchors = [node for node in nodes if node[0] == other]
        if not anchors:
            continue
        anchor = anchors[rng.integers(len(anchors))]
        new = (kind, counters[kind])
        counters[kind] += 1
        remaining[kind] -= 1
        nodes.append(new)
        edges.append((anchor, new) if kind == "c" else (new, anchor))
    h = np.zeros((n_checks, n_vars), dtype=np.uint8)
    for (_, v), (_, c) in edges:
        h[c, v] = 1
    return h


def ml_table(h, llr):
    """Most likely error (minimum total LLR cost) for every syndrome, by enumeration."""
    m, n = h.shape
    xs = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    synd = (xs @ h.T) % 2
    keys = synd @ (1 << np.arange(m))
    cost = xs @ llr
    best = {}
    for key, c, x in zip(keys, cost, xs):
        if key not in best or c < best[key][0]:
            best[key] = (c, x)
    return best


def feasible_syndromes(h):
    """Every syndrome reachable by some error, as rows."""
    m, n = h.shape
    xs = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    return np.unique((xs @ h.T) % 2, axis=0)


@pytest.mark.parametrize("seed", range(12))
def test_min_sum_matches_ml_on_trees(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 15))
    m = int(rng.integers(1, max(2, n // 2) + 1))
    h = random_tree_code(rng, n, m)
    p = rng.uniform(0.02, 0.3, size=n)
    llr = np.log((1 - p) / p)
    table = ml_table(h, llr)
    synds = feasible_syndromes(h)
    cfg = DecoderConfig("normalized-min-sum", 1.0, "flooding", 4 * (n + m), p, early_stop=False)
    res = BPDecoder(h, cfg).decode(synds)
    for s, est in zip(synds, res.estimates):
        key = int(s @ (1 << np.arange(m)))
        assert np.array_equal(est, table[key][1])
    assert res.converged.all()


@pytest.mark.parametrize("seed", range(6))
def test_schedules_agree_on_trees(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(5, 14))
    m = int(rng.integers(2, n // 2 + 2))
    h = random_tree_code(rng, n, m)
    p = rng.uniform(0.02, 0.3, size=n)
    synds = feasible_syndromes(h)
    outs = []
    for sched in ("flooding", "serial", decode.row_coloring(h),
                  Layering("variable", (tuple(range(n // 2)), tuple(range(n // 2, n))))):
        res = BPDecoder(h, DecoderConfig("nms", 1.0, sched, 4 * (n + m), p, early_stop=False)).decode(synds)
        assert res.converged.all()
        outs.append(res.estimates)
    for other in outs[1:]:
        assert np.array_equal(outs[0], other)


def test_min_sum_hard_decisions_scale_invariant():
    rng = np.random.default_rng(1)
    code = construct.toric_code(4)
    h = code.hz.to_array()
    llr = rng.uniform(0.5, 3.0, size=code.n)
    e = (rng.random((200, code.n)) < 0.1).astype(np.uint8)
    s = (e @ h.T) % 2
    for iters in (1, 2, 3, 5):
        outs = []
        for scale in (1.0, 0.5, 2.0):
            p = 1 / (1 + np.exp(scale * llr))
            res = BPDecoder(h, DecoderConfig("nms", 1.0, "flooding", iters, p, clip=1e6)).decode(s)
            outs.append((res.estimates, res.iterations))
        for est, it in outs[1:]:
            assert np.array_equal(est, outs[0][0])
            assert np.array_equal(it, outs[0][1])


def test_zero_syndrome_returns_at_iteration_zero():
    h = construct.toric_code(3).hz
    res = decode.decode_syndrome(h, np.zeros(h.rows, dtype=np.uint8), DecoderConfig())
    assert res.converged and res.iterations == 0 and not res.estimate.any()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["nms", "sp"]), st.sampled_from(["flooding", "serial"]))
def test_converged_estimates_match_syndrome(seed, alg, sched):
    rng = np.random.default_rng(seed)
    code = construct.toric_code(3)
    h = code.hx.to_array()
    e = (rng.random((50, code.n)) < 0.08).astype(np.uint8)
    s = (e @ h.T) % 2
    res = BPDecoder(h, DecoderConfig(alg, 0.85, sched, 30, 0.05, osd=True)).decode(s)
    ok = ((res.estimates @ h.T) % 2 == s).all(axis=1)
    assert ok.all()  # converged rows by BP, the rest by OSD
    assert (res.converged | res.used_osd).all()


def test_hp_five_qubit_weight_one_errors():
    # the [[5,1,2]] code: weight-one errors sharing a syndrome can differ by a
    # logical, so only those alone in their syndrome class are always fixable
    code = construct.hypergraph_product(BitMatrix.from_array([[1, 1]]), BitMatrix.from_array([[1, 1]]))
    eye = np.eye(code.n, dtype=np.uint8)
    for side in ("X", "Z"):
        h = code.parity_for(side)
        synds = (eye @ h.to_array().T) % 2
        cfg = DecoderConfig(prior_p=0.05, osd=True)
        res = BPDecoder(h, cfg).decode(synds)
        fixed = [classify_residual(e, est, code, side) is Residual.STABILIZER for e, est in zip(eye, res.estimates)]
        for q in range(code.n):
            twins = [j for j in range(code.n) if j != q and np.array_equal(synds[j], synds[q])]
            if not twins:
                assert fixed[q]
            for j in twins:
                assert classify_residual(eye[q], eye[j], code, side) is Residual.LOGICAL
                assert not (fixed[q] and fixed[j])
        assert sum(fixed) >= 3


def test_osd0_basics():
    h = construct.toric_code(3).hz
    assert not decode.osd0(h, np.zeros(h.rows, dtype=np.uint8), np.zeros(h.cols)).any()
    # a single column is chosen from the tied columns with the lowest index
    hh = BitMatrix.from_array([[1, 1, 1]])
    assert decode.osd0(hh, [1], np.zeros(3)).to_bits() == "100"
    assert decode.osd0(hh, [1], np.array([1.0, 1.0, -1.0])).to_bits() == "001"
    with pytest.raises(InconsistentSyndrome):
        decode.osd0(BitMatrix.from_array([[1, 1], [1, 1]]), [1, 0], np.zeros(2))
    with pytest.raises(DimensionError):
        decode.osd0(hh, [1, 0], np.zeros(3))


def test_osd0_recovers_weight_one_errors_with_informative_scores():
    code = construct.toric_code(3)
    for side in ("X", "Z"):
        h = code.parity_for(side)
        for q in range(code.n):
            e = np.eye(code.n, dtype=np.uint8)[q]
            soft = np.where(e == 1, -5.0, 5.0)
            est = decode.osd0(h, (h.to_array() @ e) % 2, soft)
            assert np.array_equal(est.to_array(), e)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_osd0_always_satisfies_syndrome(seed):
    rng = np.random.default_rng(seed)
    h = construct.gross_code().hz.to_array()
    e = (rng.random(h.shape[1]) < 0.1).astype(np.uint8)
    s = (h @ e) % 2
    est = decode.osd0(h, s, rng.normal(size=h.shape[1])).to_array()
    assert np.array_equal((h @ est) % 2, s)


def test_layered_partition_policies():
    gross = construct.gross_code()
    layering = decode.layered_partition(gross, "two-block-AB")
    assert len(layering.layers) == 2 and layering.kind == "variable"
    assert layering.layers[0] == tuple(range(72))
    with pytest.raises(PolicyError):
        decode.layered_partition(construct.toric_code(3), "two-block-AB")
    with pytest.raises(PolicyError):
        decode.layered_partition(gross, "zigzag")
    diag = decode.row_coloring(np.eye(5, dtype=np.uint8))
    assert diag.layers == (tuple(range(5)),)
    full = decode.row_coloring(np.ones((4, 6), dtype=np.uint8))
    assert full.layers == ((0,), (1,), (2,), (3,))
    coloring = decode.layered_partition(construct.toric_code(3), "row-coloring", "X")
    h = construct.toric_code(3).hz.to_array()
    for layer in coloring.layers:
        assert (h[list(layer)].sum(axis=0) <= 1).all()


def test_config_validation():
    with pytest.raises(DomainError):
        DecoderConfig(normalization=0)
    with pytest.raises(DomainError):
        DecoderConfig(max_iters=0)
    with pytest.raises(ValueError):
        DecoderConfig(algorithm="magic")
    with pytest.raises(ValueError):
        DecoderConfig(schedule="random")
    with pytest.raises(DomainError):
        BPDecoder(np.eye(2, dtype=np.uint8), DecoderConfig(prior_p=0.7))
    with pytest.raises(DimensionError):
        decode.decode_syndrome(BitMatrix.identity(3), [1, 0], DecoderConfig())
    with pytest.raises(DimensionError):
        BPDecoder(np.eye(3, dtype=np.uint8), DecoderConfig(schedule=Layering("check", ((0, 1),))))


def test_sum_product_decodes_single_errors():
    code = construct.toric_code(4)
    h = code.hz.to_array()
    e = np.eye(code.n, dtype=np.uint8)
    res = BPDecoder(h, DecoderConfig("sum-product", 1.0, "flooding", 50, 0.02)).decode((e @ h.T) % 2)
    residual = res.estimates ^ e
    assert all(classify_residual(r, np.zeros(code.n, dtype=np.uint8), code, "X") is Residual.STABILIZER
               for r in residual)


def _reduced_model(code):
    circuit = noise.build_sm_circuit(code)
    maps = noise.derive_fault_maps(circuit)
    priors = np.zeros(maps.n_faults)
    priors[[circuit.location(q, 0) for q in range(code.n)]] = 0.06
    return noise.build_detector_model(maps, 1, priors)


def test_decode_circuit_level_zero_and_single_class():
    code = construct.toric_code(3)
    circuit = noise.build_sm_circuit(code)
    maps = noise.derive_fault_maps(circuit)
    model = noise.build_detector_model(maps, 2, noise.circuit_priors(circuit, 0.01))
    f, d = decode.decode_circuit_level(model, np.zeros(model.n_detectors, dtype=np.uint8), DecoderConfig())
    assert not f.any() and not d.any()
    h = model.h_det.to_array()
    rng = np.random.default_rng(0)
    for col in rng.choice(h.shape[1], size=25, replace=False):
        f, _ = decode.decode_circuit_level(model, h[:, col], DecoderConfig(osd=True))
        assert np.array_equal((h @ f) % 2, h[:, col])


def test_reduced_detector_model_reproduces_plain_decoding():
    code = construct.toric_code(3)
    model = _reduced_model(code)
    rng = np.random.default_rng(2)
    ex, ez = noise.sample_depolarizing(code.n, 0.08, rng, shots=300)
    cfg = DecoderConfig(prior_p=0.04, osd=True)
    plain_x = BPDecoder(code.hz, cfg).decode((ex @ code.hz.to_array().T) % 2)
    plain_z = BPDecoder(code.hx, cfg).decode((ez @ code.hx.to_array().T) % 2)
    det = np.hstack([
        (ex @ model.x.h_det.to_array()[:, :].T[: code.n]) % 2,
        (ez @ model.z.h_det.to_array().T[: code.n]) % 2,
    ])
    _, data = decode.decode_circuit_level(model, det, cfg)
    assert np.array_equal(data[:, : code.n], plain_x.estimates)
    assert np.array_equal(data[:, code.n :], plain_z.estimates)
