import json
import math

import numpy as np
import pytest

from qldpc import cli, construct, sim
from qldpc.code import CssCode, code_to_bundle
from qldpc.errors import DomainError
from qldpc.gf2 import BitMatrix
from qldpc.sim import DecoderSpec, ExperimentSpec, NoiseSpec


def toric_spec(L=3, **kw):
    base = dict(code={"family": "toric", "L": L}, p_values=(0.05,), trials=200, chunk_size=50, seed=7)
    base.update(kw)
    return ExperimentSpec(**base)


def test_wilson_closed_forms():
    lo, hi = sim.wilson_interval(0, 100)
    assert lo == 0.0
    assert hi == pytest.approx(1.959963984540054**2 / (100 + 1.959963984540054**2))
    lo, hi = sim.wilson_interval(100, 100)
    assert hi == 1.0
    assert lo == pytest.approx(100 / (100 + 1.959963984540054**2))
    lo, hi = sim.wilson_interval(30, 100)
    assert lo < 0.3 < hi
    with pytest.raises(DomainError):
        sim.wilson_interval(5, 3)


@pytest.mark.parametrize(
    "noise",
    [
        NoiseSpec(),
        NoiseSpec("phenomenological", rounds=2),
        NoiseSpec("circuit-level", rounds=1),
    ],
    ids=["capacity", "phenomenological", "circuit"],
)
def test_zero_noise_never_fails(noise):
    spec = toric_spec(p_values=(0.0,), noise=noise, trials=40, chunk_size=20)
    (row,) = sim.run_experiment(spec, workers=1)
    assert row.failures == 0 and row.ler == 0.0
    assert row.conv_rate == 1.0
    assert row.ler_lo == 0.0


def test_k_zero_code_rejected():
    xx = BitMatrix.from_array([[1, 1]])
    code = CssCode(xx, xx)  # XX and ZZ on two qubits encode nothing
    assert code.k == 0
    with pytest.raises(DomainError):
        sim.run_experiment(ExperimentSpec(code=code, p_values=(0.01,), trials=10), workers=1)


def test_singleton_grid_matches_run_experiment():
    spec = toric_spec()
    csv_text = sim.sweep(spec, [0.05], workers=1)
    direct = sim.rows_to_csv(sim.run_experiment(spec, workers=1))
    assert csv_text == direct
    assert csv_text.splitlines()[0] == ",".join(sim.CSV_HEADER)


def test_parse_grid():
    assert sim.parse_grid("0.01,0.02") == [0.01, 0.02]
    assert sim.parse_grid("0.1:0.3:3") == pytest.approx([0.1, 0.2, 0.3])
    log = sim.parse_grid("0.001:0.1:3log")
    assert log == pytest.approx([0.001, 0.01, 0.1])
    with pytest.raises(DomainError):
        sim.parse_grid("0:0.1:3log")
    with pytest.raises(DomainError):
        sim.parse_grid("1:2")


def test_same_chunks_regardless_of_workers():
    spec = toric_spec(p_values=(0.04, 0.08), trials=150, chunk_size=40)
    one = sim.sweep(spec, spec.p_values, workers=1)
    two = sim.sweep(spec, spec.p_values, workers=2)
    assert one == two


def test_workers_env(monkeypatch):
    monkeypatch.setenv(sim.WORKERS_ENV, "3")
    assert sim.worker_count() == 3
    monkeypatch.setenv(sim.WORKERS_ENV, "many")
    with pytest.raises(DomainError):
        sim.worker_count()


def test_target_failures_stops_at_chunk_boundary():
    spec = toric_spec(p_values=(0.15,), trials=5000, chunk_size=50, stop="target-failures", target_failures=20)
    (row,) = sim.run_experiment(spec, workers=1)
    assert row.failures >= 20
    assert row.trials % 50 == 0 and row.trials < 5000
    # one chunk fewer would not have reached the target
    fewer = sum(sim.run_chunk(spec, 0, c).failed.sum() for c in range(row.trials // 50 - 1))
    assert fewer < 20


def test_chunks_are_reproducible():
    spec = toric_spec()
    a = sim.run_chunk(spec, 0, 3)
    b = sim.run_chunk(spec, 0, 3)
    assert np.array_equal(a.outcome_x, b.outcome_x) and np.array_equal(a.iterations, b.iterations)
    c = sim.run_chunk(spec, 0, 4)
    assert not np.array_equal(a.iterations, c.iterations) or not np.array_equal(a.outcome_x, c.outcome_x)


def test_larger_toric_code_does_better_below_threshold():
    # plain BP stalls on the degenerate toric code; OSD-0 restores the threshold
    rows = {}
    for L in (3, 5):
        spec = toric_spec(L=L, p_values=(0.03,), trials=2000, chunk_size=500, decoder=DecoderSpec(osd=True))
        (rows[L],) = sim.run_experiment(spec, workers=1)
    assert rows[5].ler_hi < rows[3].ler_lo


def test_records_and_failure_flags():
    batch = sim.run_chunk(toric_spec(p_values=(0.1,)), 0, 0)
    recs = batch.records()
    assert len(recs) == len(batch)
    assert [r.failed for r in recs] == list(batch.failed)


def test_spec_dict_round_trip():
    data = {
        "code": {"family": "toric", "L": 3},
        "noise": {"tier": "phenomenological", "p": [0.01, 0.02], "q_syn": 0.005, "rounds": 3},
        "decoder": {"algorithm": "sum-product", "schedule": "serial", "max_iters": 20},
        "trials": 100,
        "seed": 3,
        "stop": {"rule": "target-failures", "failures": 5},
    }
    spec = ExperimentSpec.from_dict(data)
    assert spec.p_values == (0.01, 0.02)
    assert spec.noise.rounds == 3 and spec.decoder.schedule == "serial"
    assert spec.stop == "target-failures" and spec.target_failures == 5
    assert ExperimentSpec.from_dict(spec.to_dict()) == spec


def test_bad_specs():
    with pytest.raises(DomainError):
        NoiseSpec("thermal")
    with pytest.raises(DomainError):
        toric_spec(p_values=(1.5,))
    with pytest.raises(DomainError):
        toric_spec(trials=0)


def test_two_block_layering_on_bb_code():
    spec = ExperimentSpec(
        code={"family": "bb", "ell": 6, "m": 6, "a": ["x3", "y1", "y2"], "b": ["y3", "x1", "x2"]},
        p_values=(0.02,),
        decoder=DecoderSpec(schedule="layered:two-block-AB"),
        trials=50,
        chunk_size=50,
    )
    (row,) = sim.run_experiment(spec, workers=1)
    assert row.trials == 50 and 0 <= row.ler <= 1


# command line ---------------------------------------------------------------------------


def test_cli_construct_and_params(tmp_path, capsys):
    out = tmp_path / "toric.json"
    assert cli.main(["construct", "toric", "--L", "3", "--out", str(out)]) == 0
    bundle = json.loads(out.read_text())
    assert bundle == code_to_bundle(construct.toric_code(3))
    assert cli.main(["params", "--code", str(out), "--exhaustive-wmax", "3"]) == 0
    params = json.loads(capsys.readouterr().out)
    assert params["n"] == 18 and params["k"] == 2


def test_cli_decode(tmp_path, capsys):
    h = construct.toric_code(3).hz
    path = tmp_path / "h.txt"
    path.write_text(h.to_text())
    e = np.zeros(h.cols, dtype=np.uint8)
    e[4] = 1
    s = "".join(str(b) for b in (h.to_array() @ e) % 2)
    assert cli.main(["decode", "--h", str(path), "--syndrome", s, "--osd0"]) == 0
    out = json.loads(capsys.readouterr().out)
    est = np.array([int(c) for c in out["estimate"]], dtype=np.uint8)
    assert "".join(str(b) for b in (h.to_array() @ est) % 2) == s


def test_cli_circuit(tmp_path, capsys):
    code_path = tmp_path / "c.json"
    cli.main(["construct", "surface", "--L", "3", "--out", str(code_path)])
    assert cli.main(["circuit", "--code", str(code_path)]) == 0
    text = capsys.readouterr().out
    assert text.count("TICK") >= 2 and "CX" in text
    out = tmp_path / "dem.json"
    assert cli.main(["circuit", "--code", str(code_path), "--emit", "detmodel", "--rounds", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["rounds"] == 2


def test_cli_sim(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"code": {"family": "toric", "L": 3}, "noise": {"p": 0.05}, "trials": 60, "chunk_size": 30}))
    out = tmp_path / "out.csv"
    assert cli.main(["sim", "--spec", str(spec), "--p-grid", "0.02,0.04", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(sim.CSV_HEADER) and len(lines) == 3
    assert math.isclose(float(lines[1].split(",")[0]), 0.02)


def test_cli_reports_errors(tmp_path, capsys):
    assert cli.main(["params", "--code", str(tmp_path / "missing.json")]) == 1
    assert capsys.readouterr().err.startswith("qldpc: error:")
