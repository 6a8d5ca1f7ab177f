"""Monte Carlo memory experiments and logical-error-rate sweeps.

Trials are grouped into fixed-size chunks.  Chunk ``c`` of grid point ``i``
draws from ``SeedSequence([seed, i, c])``, so the sample stream depends only on
the experiment description and never on how chunks are spread over worker
processes.  The worker count comes from the ``QLDPC_WORKERS`` environment
variable.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from qldpc import construct, noise
from qldpc.code import RESIDUAL_CODES, CssCode, Residual, ResidualClassifier, load_code
from qldpc.decode import BPDecoder, DecoderConfig, Layering, layered_partition, row_coloring
from qldpc.errors import DomainError, PolicyError
from qldpc.gf2 import BitMatrix

log = logging.getLogger(__name__)

Tier = Literal["code-capacity", "phenomenological", "circuit-level"]
CSV_HEADER = ("p", "trials", "failures", "ler", "ler_lo", "ler_hi", "mean_iters", "conv_rate")
WORKERS_ENV = "QLDPC_WORKERS"
# a zero-probability prior would be an infinite LLR; anything this small is clipped anyway
_PRIOR_FLOOR = 1e-12


# code sources ------------------------------------------------------------------------------


def _matrix(value: Any) -> BitMatrix:
    if isinstance(value, BitMatrix):
        return value
    if isinstance(value, str):
        return BitMatrix.from_text(Path(value).read_text())
    return BitMatrix.from_array(np.array([[int(c) for c in row] if isinstance(row, str) else row for row in value]))


def _group(text: str) -> construct.GroupSpec:
    kind, _, arg = text.partition(":")
    if kind == "dihedral":
        return construct.dihedral_group(int(arg))
    if kind == "cyclic":
        return construct.cyclic_group(int(arg))
    raise DomainError(f"unknown group {text!r}")


def _monomials(value: Any) -> list[tuple[int, int]]:
    if isinstance(value, str):
        return construct.parse_monomials(value)
    if all(isinstance(t, str) for t in value):
        return construct.parse_monomials(",".join(value))
    return [tuple(t) for t in value]


def code_from_source(source: dict[str, Any] | CssCode) -> CssCode:
    """Build a code from a JSON-style description.

    ``{"file": path}`` loads a saved bundle; otherwise ``"family"`` picks a
    constructor (``toric``, ``surface``, ``hp``, ``lp``, ``two-block``, ``bb``,
    ``gross``, ``2bga``) and the remaining keys are its parameters.
    """
    if isinstance(source, CssCode):
        return source
    if "file" in source:
        return load_code(source["file"])
    family = source.get("family")
    if family == "toric":
        return construct.toric_code(int(source["L"]))
    if family == "surface":
        return construct.surface_code(int(source["L"]))
    if family == "gross":
        return construct.gross_code()
    if family == "bb":
        a, b = (_monomials(source[key]) for key in ("a", "b"))
        return construct.bivariate_bicycle(int(source["ell"]), int(source["m"]), a, b, bool(source.get("relaxed", False)))
    if family == "hp":
        return construct.hypergraph_product(_matrix(source["ha"]), _matrix(source["hb"]))
    if family == "lp":
        q = int(source["q"])
        return construct.lifted_product(
            construct.BaseMatrix(np.array(source["base_a"]), q), construct.BaseMatrix(np.array(source["base_b"]), q)
        )
    if family == "two-block":
        return construct.two_block(_matrix(source["a"]), _matrix(source["b"]))
    if family == "2bga":
        return construct.two_block_group_algebra(_group(source["group"]), source["sa"], source["sb"])
    raise DomainError(f"unknown code family {family!r}")


# experiment description --------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    tier: Tier = "code-capacity"
    q_syn: float | None = None  # defaults to p
    rounds: int = 1
    cnot: float = 0.0  # two-qubit channel strength as a multiple of p
    schedule: str = "greedy"

    def __post_init__(self) -> None:
        if self.tier not in ("code-capacity", "phenomenological", "circuit-level"):
            raise DomainError(f"unknown noise tier {self.tier!r}")
        if self.rounds < 1:
            raise DomainError("rounds must be >= 1")


@dataclass(frozen=True)
class DecoderSpec:
    """Decoder settings; priors are derived from the noise model at each point.

    ``schedule`` is ``flooding``, ``serial``, ``layered:two-block-AB`` or
    ``layered:row-coloring``.
    """

    algorithm: str = "normalized-min-sum"
    normalization: float = 0.85
    schedule: str = "flooding"
    max_iters: int = 100
    osd: bool = False


@dataclass(frozen=True)
class ExperimentSpec:
    code: dict[str, Any] | CssCode
    p_values: tuple[float, ...]
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    decoder: DecoderSpec = field(default_factory=DecoderSpec)
    trials: int = 1000
    seed: int = 0
    stop: Literal["fixed-trials", "target-failures"] = "fixed-trials"
    target_failures: int = 100
    chunk_size: int = 1000

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.chunk_size < 1:
            raise DomainError("chunk_size must be >= 1")
        if self.stop not in ("fixed-trials", "target-failures"):
            raise DomainError(f"unknown stop rule {self.stop!r}")
        for p in self.p_values:
            if not 0 <= p <= 1:
                raise DomainError(f"p = {p} is not a probability")
        q = self.noise.q_syn
        if q is not None and not 0 <= q <= 1:
            raise DomainError(f"q_syn = {q} is not a probability")

    def with_p(self, p_values: Iterable[float]) -> ExperimentSpec:
        return ExperimentSpec(
            self.code, tuple(p_values), self.noise, self.decoder, self.trials, self.seed,
            self.stop, self.target_failures, self.chunk_size,
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentSpec:
        noise_d = dict(data.get("noise", {}))
        p = noise_d.pop("p", data.get("p", []))
        p_values = tuple(p) if isinstance(p, (list, tuple)) else (p,)
        stop = data.get("stop", "fixed-trials")
        target = 100
        if isinstance(stop, dict):
            target = int(stop.get("failures", 100))
            stop = stop.get("rule", "fixed-trials")
        return cls(
            code=data["code"],
            p_values=p_values,
            noise=NoiseSpec(**noise_d),
            decoder=DecoderSpec(**data.get("decoder", {})),
            trials=int(data.get("trials", 1000)),
            seed=int(data.get("seed", 0)),
            stop=stop,
            target_failures=target,
            chunk_size=int(data.get("chunk_size", 1000)),
        )

    def to_dict(self) -> dict[str, Any]:
        if isinstance(self.code, CssCode):
            raise TypeError("specs holding a code object have no JSON form")
        return {
            "code": self.code,
            "noise": {"p": list(self.p_values), **asdict(self.noise)},
            "decoder": asdict(self.decoder),
            "trials": self.trials,
            "seed": self.seed,
            "stop": {"rule": self.stop, "failures": self.target_failures},
            "chunk_size": self.chunk_size,
        }


def load_spec(path: str | Path) -> ExperimentSpec:
    return ExperimentSpec.from_dict(json.loads(Path(path).read_text()))


# results -----------------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    outcome_x: Residual
    outcome_z: Residual
    iterations: int
    used_osd: bool

    @property
    def failed(self) -> bool:
        return self.outcome_x is not Residual.STABILIZER or self.outcome_z is not Residual.STABILIZER


@dataclass
class TrialBatch:
    """Outcomes of consecutive trials; outcome codes follow ``RESIDUAL_CODES``."""

    outcome_x: np.ndarray
    outcome_z: np.ndarray
    iterations: np.ndarray  # (trials, 2)
    converged: np.ndarray  # (trials, 2)
    used_osd: np.ndarray  # (trials, 2)

    def __len__(self) -> int:
        return len(self.outcome_x)

    @property
    def failed(self) -> np.ndarray:
        return (self.outcome_x != 0) | (self.outcome_z != 0)

    def records(self) -> list[TrialRecord]:
        return [
            TrialRecord(
                RESIDUAL_CODES[int(self.outcome_x[i])],
                RESIDUAL_CODES[int(self.outcome_z[i])],
                int(self.iterations[i].sum()),
                bool(self.used_osd[i].any()),
            )
            for i in range(len(self))
        ]


@dataclass(frozen=True)
class SummaryRow:
    p: float
    trials: int
    failures: int
    ler: float
    ler_lo: float
    ler_hi: float
    mean_iters: float
    conv_rate: float

    def csv_fields(self) -> list[str]:
        return [
            f"{self.p:.10g}", str(self.trials), str(self.failures),
            f"{self.ler:.10g}", f"{self.ler_lo:.10g}", f"{self.ler_hi:.10g}",
            f"{self.mean_iters:.10g}", f"{self.conv_rate:.10g}",
        ]


def wilson_interval(failures: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials < 1 or not 0 <= failures <= trials:
        raise DomainError(f"invalid counts {failures}/{trials}")
    phat = failures / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if failures == 0 else max(0.0, centre - half)
    hi = 1.0 if failures == trials else min(1.0, centre + half)
    return lo, hi


# trial execution ---------------------------------------------------------------------------


class _Context:
    """Everything one grid point needs, built once per process."""

    def __init__(self, spec: ExperimentSpec, p: float) -> None:
        self.spec = spec
        self.p = p
        self.code = code_from_source(spec.code)
        if self.code.k < 1:
            raise DomainError("memory experiments need a code with k >= 1")
        self.classifiers = {side: ResidualClassifier(self.code, side) for side in ("X", "Z")}
        tier = spec.noise.tier
        self.q_syn = p if spec.noise.q_syn is None else spec.noise.q_syn
        if tier == "code-capacity":
            self.model = None
            prior = max(2 * p / 3, _PRIOR_FLOOR)
            self.decoders = {
                side: BPDecoder(self.code.parity_for(side), self._config(prior, side, None))
                for side in ("X", "Z")
            }
            return
        if tier == "phenomenological":
            self.model = noise.phenomenological_model(self.code, p, self.q_syn, spec.noise.rounds)
        else:
            circuit = noise.build_sm_circuit(self.code, spec.noise.schedule)
            maps = noise.derive_fault_maps(circuit)
            priors = noise.circuit_priors(circuit, p)
            self.model = noise.build_detector_model(maps, spec.noise.rounds, priors, cnot_p=min(1.0, spec.noise.cnot * p))
        self.decoders = {}
        for side in ("X", "Z"):
            sm = self.model.sector(side)
            priors = np.clip(sm.priors, _PRIOR_FLOOR, 0.5)
            if sm.n_classes == 0:
                # nothing can go wrong in this sector
                self.decoders[side] = None
                continue
            self.decoders[side] = BPDecoder(sm.h_det, self._config(priors, side, sm.h_det))

    def _config(self, prior, side: str, h_det: BitMatrix | None) -> DecoderConfig:
        d = self.spec.decoder
        schedule: str | Layering = d.schedule
        if d.schedule.startswith("layered:"):
            policy = d.schedule.split(":", 1)[1]
            if h_det is not None and policy == "row-coloring":
                schedule = row_coloring(h_det)
            elif h_det is not None:
                raise PolicyError(f"{policy} layering only applies to code-capacity decoding")
            else:
                schedule = layered_partition(self.code, policy, side)
        return DecoderConfig(d.algorithm, d.normalization, schedule, d.max_iters, prior, d.osd)

    def run(self, rng: np.random.Generator, shots: int) -> TrialBatch:
        tier = self.spec.noise.tier
        n = self.code.n
        iters = np.zeros((shots, 2), dtype=np.int64)
        conv = np.zeros((shots, 2), dtype=bool)
        osd = np.zeros((shots, 2), dtype=bool)
        outcomes = {}
        if tier == "code-capacity":
            ex, ez = noise.sample_depolarizing(n, self.p, rng, shots=shots)
            inputs = {
                "X": (ex, (ex @ self.code.hz.to_array().T) & 1),
                "Z": (ez, (ez @ self.code.hx.to_array().T) & 1),
            }
        elif tier == "phenomenological":
            smp = noise.sample_phenomenological(self.code, self.p, self.q_syn, self.spec.noise.rounds, rng, shots=shots)
            inputs = {
                "X": (smp.ex, noise.detectors_from_syndromes(smp.sz_tilde, (smp.ex @ self.code.hz.to_array().T) & 1)),
                "Z": (smp.ez, noise.detectors_from_syndromes(smp.sx_tilde, (smp.ez @ self.code.hx.to_array().T) & 1)),
            }
        else:
            smp = noise.sample_circuit_faults(self.model, rng, shots)
            split = self.model.x.n_detectors
            inputs = {"X": (smp.ex, smp.detectors[:, :split]), "Z": (smp.ez, smp.detectors[:, split:])}
        for col, side in enumerate(("X", "Z")):
            err, synd = inputs[side]
            dec = self.decoders[side]
            if dec is None:
                est = np.zeros_like(err)
                conv[:, col] = True
            else:
                res = dec.decode(synd)
                est = res.estimates
                if self.model is not None:
                    est = (est @ self.model.sector(side).fault_to_data.to_array().T) & 1
                iters[:, col] = res.iterations
                conv[:, col] = res.converged
                osd[:, col] = res.used_osd
            outcomes[side] = self.classifiers[side].classify(err ^ est)
        return TrialBatch(outcomes["X"], outcomes["Z"], iters, conv, osd)


_CONTEXTS: dict[tuple[str, float], _Context] = {}


def _context(spec: ExperimentSpec, p: float) -> _Context:
    if isinstance(spec.code, CssCode):
        return _Context(spec, p)
    key = (json.dumps(spec.to_dict(), sort_keys=True), p)
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        ctx = _CONTEXTS[key] = _Context(spec, p)
    return ctx


def chunk_rng(seed: int, point: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, point, chunk]))


def run_chunk(spec: ExperimentSpec, point: int, chunk: int) -> TrialBatch:
    """Trials ``chunk * chunk_size`` onward of grid point ``point``."""
    p = spec.p_values[point]
    shots = min(spec.chunk_size, spec.trials - chunk * spec.chunk_size)
    return _context(spec, p).run(chunk_rng(spec.seed, point, chunk), shots)


def _chunk_stats(spec: ExperimentSpec, point: int, chunk: int) -> tuple[int, int, int, int, int]:
    batch = run_chunk(spec, point, chunk)
    return (
        len(batch),
        int(batch.failed.sum()),
        int(batch.iterations.sum()),
        2 * len(batch),
        int(batch.converged.all(axis=1).sum()),
    )


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise DomainError(f"{WORKERS_ENV}={raw!r} is not an integer") from None


def _summarize(p: float, stats: Sequence[tuple[int, int, int, int, int]]) -> SummaryRow:
    trials = sum(s[0] for s in stats)
    failures = sum(s[1] for s in stats)
    iters = sum(s[2] for s in stats)
    decodes = sum(s[3] for s in stats)
    converged = sum(s[4] for s in stats)
    lo, hi = wilson_interval(failures, trials)
    return SummaryRow(p, trials, failures, failures / trials, lo, hi, iters / decodes, converged / trials)


def _run_point(spec: ExperimentSpec, point: int, pool: ProcessPoolExecutor | None, width: int) -> SummaryRow:
    n_chunks = -(-spec.trials // spec.chunk_size)
    stats: list[tuple[int, int, int, int, int]] = []
    failures = 0
    for start in range(0, n_chunks, width):
        wave = range(start, min(n_chunks, start + width))
        if pool is None:
            results = [_chunk_stats(spec, point, c) for c in wave]
        else:
            results = list(pool.map(_chunk_stats, [spec] * len(wave), [point] * len(wave), wave))
        for res in results:
            stats.append(res)
            failures += res[1]
            if spec.stop == "target-failures" and failures >= spec.target_failures:
                return _summarize(spec.p_values[point], stats)
    return _summarize(spec.p_values[point], stats)


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> list[SummaryRow]:
    """One summary row per ``p`` in ``spec.p_values``.

    A trial fails when either side's residual is a logical operator or still
    has a syndrome.
    """
    if not spec.p_values:
        raise DomainError("no p values to run")
    code = code_from_source(spec.code)
    if code.k < 1:
        raise DomainError("memory experiments need a code with k >= 1")
    workers = worker_count() if workers is None else workers
    rows = []
    if workers == 1:
        for i in range(len(spec.p_values)):
            rows.append(_run_point(spec, i, None, 1))
            log.info("p=%s done: %s", spec.p_values[i], rows[-1])
        return rows
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i in range(len(spec.p_values)):
            rows.append(_run_point(spec, i, pool, workers))
            log.info("p=%s done: %s", spec.p_values[i], rows[-1])
    return rows


def sweep(template: ExperimentSpec, grid: Sequence[float], workers: int | None = None) -> str:
    """Run ``template`` over ``grid`` and return the CSV text."""
    if not len(grid):
        raise DomainError("empty p grid")
    return rows_to_csv(run_experiment(template.with_p(grid), workers))


def rows_to_csv(rows: Iterable[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.csv_fields())
    return buf.getvalue()


def parse_grid(text: str) -> list[float]:
    """``"0.01:0.1:10log"`` (log-spaced), ``"0.01:0.1:10"`` (linear) or ``"0.01,0.02"``."""
    if ":" not in text:
        return [float(t) for t in text.split(",") if t.strip()]
    parts = text.split(":")
    if len(parts) != 3:
        raise DomainError(f"bad grid {text!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), parts[2]
    if count.endswith("log"):
        num = int(count[:-3])
        if lo <= 0 or hi <= 0:
            raise DomainError("log grids need positive endpoints")
        return [float(v) for v in np.geomspace(lo, hi, num)]
    return [float(v) for v in np.linspace(lo, hi, int(count))]
