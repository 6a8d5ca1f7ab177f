"""Noise models: code capacity, phenomenological, and circuit level.

Circuit-level noise works on a syndrome-measurement (SM) circuit built from
the code: one ancilla per check, CNOT layers packed by a schedule, and a
two-sided (X and Z) fault channel on every qubit at every layer boundary.
Unit faults are pushed through the remaining CNOTs to obtain linear maps from
fault vectors to final data errors and to ancilla measurement flips.  Those
maps, repeated over rounds and differenced between rounds, give the detector
model used for decoding.

Throughout, the ``"X"`` sector means X-type faults and data errors, which are
seen by the Z checks; the ``"Z"`` sector is the mirror image.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from qldpc.code import CssCode, Side
from qldpc.errors import DimensionError, DomainError
from qldpc.gf2 import BitMatrix

Frame = tuple[int, int]


def _check_probability(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} = {p} is not a probability")


def xor_combine(p1: float | np.ndarray, p2: float | np.ndarray) -> float | np.ndarray:
    """Probability that exactly one of two independent events fires."""
    return p1 * (1 - p2) + p2 * (1 - p1)


# code capacity and phenomenological --------------------------------------------------


def sample_depolarizing(
    n: int, p: float, rng: np.random.Generator, shots: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """I.i.d. depolarizing errors: X, Y, Z each with probability p/3.

    Returns ``(ex, ez)`` as ``uint8`` arrays of shape ``(n,)`` or ``(shots, n)``.
    """
    _check_probability("p", p)
    shape = (n,) if shots is None else (shots, n)
    u = rng.random(shape)
    # u < p/3 -> X, p/3 <= u < 2p/3 -> Y, 2p/3 <= u < p -> Z
    ex = u < 2 * p / 3
    ez = (u >= p / 3) & (u < p)
    return ex.astype(np.uint8), ez.astype(np.uint8)


@dataclass
class NoiseSample:
    """One (or a batch of) sampled noise realisations.

    ``sx_tilde``/``sz_tilde`` hold the measured outcomes of the X and Z checks
    per round, shaped ``(rounds, m)`` or ``(shots, rounds, m)``.
    """

    ex: np.ndarray
    ez: np.ndarray
    sx_tilde: np.ndarray | None = None
    sz_tilde: np.ndarray | None = None
    detectors: np.ndarray | None = None
    faults: np.ndarray | None = None


def sample_phenomenological(
    code: CssCode,
    p: float,
    q_syn: float,
    rounds: int,
    rng: np.random.Generator,
    final_noiseless: bool = False,
    shots: int | None = None,
) -> NoiseSample:
    """Fresh depolarizing data errors every round; each measured syndrome bit flips with ``q_syn``."""
    _check_probability("p", p)
    _check_probability("q_syn", q_syn)
    if rounds < 1:
        raise DomainError(f"rounds must be >= 1, got {rounds}")
    batch = 1 if shots is None else shots
    hx = code.hx.to_array()
    hz = code.hz.to_array()
    ex = np.zeros((batch, code.n), dtype=np.uint8)
    ez = np.zeros((batch, code.n), dtype=np.uint8)
    sx = np.zeros((batch, rounds, hx.shape[0]), dtype=np.uint8)
    sz = np.zeros((batch, rounds, hz.shape[0]), dtype=np.uint8)
    for r in range(rounds):
        dx, dz = sample_depolarizing(code.n, p, rng, shots=batch)
        ex ^= dx
        ez ^= dz
        flip_z = (rng.random((batch, hz.shape[0])) < q_syn).astype(np.uint8)
        flip_x = (rng.random((batch, hx.shape[0])) < q_syn).astype(np.uint8)
        if final_noiseless and r == rounds - 1:
            flip_z[:] = 0
            flip_x[:] = 0
        sz[:, r] = ((ex @ hz.T) & 1) ^ flip_z
        sx[:, r] = ((ez @ hx.T) & 1) ^ flip_x
    if shots is None:
        return NoiseSample(ex[0], ez[0], sx[0], sz[0])
    return NoiseSample(ex, ez, sx, sz)


# CNOT propagation and the SM circuit ------------------------------------------------


def propagate_through_cnot(control: Frame, target: Frame) -> tuple[Frame, Frame]:
    """Push a two-qubit Pauli ``(x, z)`` pair through a CNOT.

    X moves from control to target, Z from target to control.
    """
    (cx, cz), (tx, tz) = control, target
    return (cx, cz ^ tz), (cx ^ tx, tz)


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int


@dataclass(frozen=True)
class Init:
    qubit: int
    basis: str


@dataclass(frozen=True)
class Measure:
    qubit: int
    basis: str


@dataclass(frozen=True, eq=False)
class SmCircuit:
    """One round of syndrome measurement.

    Qubits are numbered data first, then one X ancilla per X check, then one
    Z ancilla per Z check.  ``timesteps`` holds the CNOT layers; ancillas are
    prepared before the first layer and measured after the last.  Fault
    location ``q * (depth + 1) + t`` sits on qubit ``q`` just before layer ``t``
    (``t = depth`` is after the last layer).
    """

    n_data: int
    n_anc_x: int
    n_anc_z: int
    timesteps: tuple[tuple[CNOT, ...], ...]
    inits: tuple[Init, ...]
    measurements: tuple[Measure, ...]

    def __post_init__(self) -> None:
        for t, layer in enumerate(self.timesteps):
            used: set[int] = set()
            for gate in layer:
                qubits = {gate.control, gate.target}
                if len(qubits) != 2 or used & qubits:
                    raise ValueError(f"layer {t} reuses a qubit")
                used |= qubits

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_anc_x + self.n_anc_z

    @property
    def depth(self) -> int:
        return len(self.timesteps)

    @property
    def n_slots(self) -> int:
        return self.depth + 1

    @property
    def fault_locations(self) -> list[tuple[int, int]]:
        """``(timestep, qubit)`` pairs in fault-index order."""
        return [(t, q) for q in range(self.n_qubits) for t in range(self.n_slots)]

    def location(self, qubit: int, slot: int) -> int:
        return qubit * self.n_slots + slot

    def x_ancilla(self, i: int) -> int:
        return self.n_data + i

    def z_ancilla(self, i: int) -> int:
        return self.n_data + self.n_anc_x + i

    def is_data(self, qubit: int) -> bool:
        return qubit < self.n_data

    def to_text(self) -> str:
        """Line-oriented dump (``INIT_X a``, ``TICK``, ``CX c t``, ``M_Z a``)."""
        lines = [f"INIT_{g.basis} {g.qubit}" for g in self.inits]
        for layer in self.timesteps:
            lines.append("TICK")
            lines += [f"CX {g.control} {g.target}" for g in layer]
        lines.append("TICK")
        lines += [f"M_{g.basis} {g.qubit}" for g in self.measurements]
        return "\n".join(lines) + "\n"


SchedulePolicy = Callable[[CssCode], list[list[tuple[int, int]]]]


def _pack_checks(checks: list[tuple[int, np.ndarray]]) -> list[list[tuple[int, int]]]:
    busy: list[set[int]] = []
    placed: list[list[tuple[int, int]]] = []
    for anc, support in checks:
        t = 0
        for q in support:
            q = int(q)
            while t < len(busy) and (q in busy[t] or anc in busy[t]):
                t += 1
            if t == len(busy):
                busy.append(set())
                placed.append([])
            busy[t] |= {q, anc}
            placed[t].append((anc, q))
            t += 1
    return placed


def _check_lists(code: CssCode) -> tuple[list[tuple[int, np.ndarray]], list[tuple[int, np.ndarray]]]:
    n, mx = code.n, code.hx.rows
    xs = [(n + i, row) for i, row in enumerate(code.hx.row_supports())]
    zs = [(n + mx + i, row) for i, row in enumerate(code.hz.row_supports())]
    return xs, zs


def greedy_schedule(code: CssCode) -> list[list[tuple[int, int]]]:
    """Pack (ancilla, data) pairs into layers, X checks first, then Z checks.

    Each ancilla visits its support in ascending order; every CNOT goes into
    the earliest layer after the ancilla's previous CNOT in which the data
    qubit is still free.  X and Z CNOTs may interleave on a data qubit; see
    :func:`interleaving_conflicts`.
    """
    xs, zs = _check_lists(code)
    return _pack_checks(xs + zs)


def x_then_z_schedule(code: CssCode) -> list[list[tuple[int, int]]]:
    """Greedy packing of the X checks, then of the Z checks in later layers.

    Never interleaves, so every fault-free round measures the checks exactly.
    """
    xs, zs = _check_lists(code)
    return _pack_checks(xs) + _pack_checks(zs)


SCHEDULES: dict[str, SchedulePolicy] = {"greedy": greedy_schedule, "x-then-z": x_then_z_schedule}


def build_sm_circuit(code: CssCode, schedule: str | SchedulePolicy = "greedy") -> SmCircuit:
    """X ancillas start in |+>, control CNOTs onto their support, and are read out in X;
    Z ancilla start in |0>, are targeted from their support, and are read out in Z."""
    policy = SCHEDULES[schedule] if isinstance(schedule, str) else schedule
    n, mx, mz = code.n, code.hx.rows, code.hz.rows
    layers = []
    for layer in policy(code):
        gates = []
        for anc, q in layer:
            gates.append(CNOT(anc, q) if anc < n + mx else CNOT(q, anc))
        layers.append(tuple(gates))
    inits = tuple(Init(n + i, "X") for i in range(mx)) + tuple(Init(n + mx + i, "Z") for i in range(mz))
    meas = tuple(Measure(n + i, "X") for i in range(mx)) + tuple(Measure(n + mx + i, "Z") for i in range(mz))
    circuit = SmCircuit(n, mx, mz, tuple(layers), inits, meas)
    _check_circuit_matches(code, circuit)
    return circuit


def _check_circuit_matches(code: CssCode, circuit: SmCircuit) -> None:
    n, mx = code.n, code.hx.rows
    hx = np.zeros_like(code.hx.to_array())
    hz = np.zeros_like(code.hz.to_array())
    for layer in circuit.timesteps:
        for g in layer:
            if n <= g.control < n + mx:
                hx[g.control - n, g.target] ^= 1
            elif g.target >= n + mx:
                hz[g.target - n - mx, g.control] ^= 1
            else:
                raise ValueError(f"unexpected gate {g}")
    if not (np.array_equal(hx, code.hx.to_array()) and np.array_equal(hz, code.hz.to_array())):
        raise ValueError("schedule does not cover each check exactly once")


def interleaving_conflicts(circuit: SmCircuit) -> list[tuple[int, int]]:
    """X/Z ancilla pairs whose CNOTs cross on an odd number of shared data qubits.

    A fault-free round only reproduces the check values when, for every pair
    of overlapping X and Z checks, the X check touches an even number of the
    shared qubits before the Z check does.  The fault maps do not depend on
    this, but a physical circuit does.
    """
    first: dict[tuple[int, int], int] = {}
    for t, layer in enumerate(circuit.timesteps):
        for g in layer:
            anc, q = (g.control, g.target) if g.control >= circuit.n_data else (g.target, g.control)
            first[(anc, q)] = t
    x_touch: dict[int, dict[int, int]] = {}
    z_touch: dict[int, dict[int, int]] = {}
    for (anc, q), t in first.items():
        bucket = x_touch if anc < circuit.n_data + circuit.n_anc_x else z_touch
        bucket.setdefault(anc, {})[q] = t
    bad = []
    for xa, xs in sorted(x_touch.items()):
        for za, zs in sorted(z_touch.items()):
            shared = xs.keys() & zs.keys()
            if sum(xs[q] < zs[q] for q in shared) % 2:
                bad.append((xa, za))
    return bad


# fault maps -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FaultMaps:
    """Linear maps from unit faults to end-of-round effects.

    ``fdx``/``fsz`` map X-component faults to data X errors and Z-check flips;
    ``fdz``/``fsx`` map Z-component faults to data Z errors and X-check flips.
    Columns follow ``circuit.fault_locations``.
    """

    circuit: SmCircuit
    fdx: BitMatrix
    fdz: BitMatrix
    fsx: BitMatrix
    fsz: BitMatrix

    @property
    def n_faults(self) -> int:
        return self.fdx.cols

    def data_map(self, sector: Side) -> BitMatrix:
        return self.fdx if sector == "X" else self.fdz

    def syndrome_map(self, sector: Side) -> BitMatrix:
        return self.fsz if sector == "X" else self.fsx

    def apply(self, fx: np.ndarray, fz: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(ex, ez, sx, sz)`` produced by fault vectors (rows of ``fx``/``fz`` for batches)."""
        fx = np.atleast_2d(np.asarray(fx, dtype=np.uint8))
        fz = np.atleast_2d(np.asarray(fz, dtype=np.uint8))
        ex = (fx @ self.fdx.to_array().T) & 1
        sz = (fx @ self.fsz.to_array().T) & 1
        ez = (fz @ self.fdz.to_array().T) & 1
        sx = (fz @ self.fsx.to_array().T) & 1
        return ex, ez, sx, sz


def derive_fault_maps(circuit: SmCircuit) -> FaultMaps:
    """Propagate every unit fault to the end of the round, all at once.

    Each qubit carries a bitset over fault indices for its X and Z frames;
    a CNOT copies the control's X set onto the target and the target's Z set
    onto the control.
    """
    nq, slots = circuit.n_qubits, circuit.n_slots
    n_faults = nq * slots
    xf = np.zeros((nq, n_faults), dtype=np.uint8)
    zf = np.zeros((nq, n_faults), dtype=np.uint8)
    for t in range(slots):
        qubits = np.arange(nq)
        xf[qubits, qubits * slots + t] ^= 1
        zf[qubits, qubits * slots + t] ^= 1
        if t < circuit.depth:
            for g in circuit.timesteps[t]:
                xf[g.target] ^= xf[g.control]
                zf[g.control] ^= zf[g.target]
    nd, mx = circuit.n_data, circuit.n_anc_x
    return FaultMaps(
        circuit,
        fdx=BitMatrix.from_array(xf[:nd]),
        fdz=BitMatrix.from_array(zf[:nd]),
        fsx=BitMatrix.from_array(zf[nd : nd + mx]),
        fsz=BitMatrix.from_array(xf[nd + mx :]),
    )


def simulate_circuit(
    circuit: SmCircuit, fx: Sequence[int], fz: Sequence[int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gate-by-gate Pauli frame simulation of one round with the given faults.

    Independent of :func:`derive_fault_maps`; used to check the maps.
    Returns ``(ex, ez, sx, sz)``.
    """
    nq, slots = circuit.n_qubits, circuit.n_slots
    frames = [(0, 0)] * nq
    for t in range(slots):
        frames = [
            (x ^ int(fx[q * slots + t]), z ^ int(fz[q * slots + t])) for q, (x, z) in enumerate(frames)
        ]
        if t < circuit.depth:
            for g in circuit.timesteps[t]:
                frames[g.control], frames[g.target] = propagate_through_cnot(
                    frames[g.control], frames[g.target]
                )
    nd, mx = circuit.n_data, circuit.n_anc_x
    ex = np.array([frames[q][0] for q in range(nd)], dtype=np.uint8)
    ez = np.array([frames[q][1] for q in range(nd)], dtype=np.uint8)
    # X-basis readout flips on Z, Z-basis readout flips on X
    sx = np.array([frames[nd + i][1] for i in range(mx)], dtype=np.uint8)
    sz = np.array([frames[nd + mx + i][0] for i in range(circuit.n_anc_z)], dtype=np.uint8)
    return ex, ez, sx, sz


# detector models ----------------------------------------------------------------------


def circuit_priors(
    circuit: SmCircuit, p: float, data: float = 1.0, ancilla: float = 1.0
) -> np.ndarray:
    """Depolarizing probability per fault location: ``p`` scaled by a per-class multiplier."""
    _check_probability("p", p)
    out = np.empty(circuit.n_qubits * circuit.n_slots)
    for q in range(circuit.n_qubits):
        scale = data if circuit.is_data(q) else ancilla
        out[q * circuit.n_slots : (q + 1) * circuit.n_slots] = p * scale
    if (out > 1).any():
        raise DomainError("scaled location probability exceeds 1")
    return out


@dataclass(frozen=True, eq=False)
class SectorModel:
    """Detector matrix for one error sector after merging equivalent fault classes.

    ``h_det`` has one row per (round, check) detector; ``fault_to_data`` maps
    fault classes to the data error they leave behind.
    """

    sector: Side
    h_det: BitMatrix
    priors: np.ndarray
    fault_to_data: BitMatrix
    provenance: list[list[tuple]]
    raw_to_class: np.ndarray  # raw mechanism index -> merged column, -1 if dropped

    @property
    def n_detectors(self) -> int:
        return self.h_det.rows

    @property
    def n_classes(self) -> int:
        return self.h_det.cols


@dataclass(frozen=True, eq=False)
class DetectorModel:
    """Round-differenced decoding problem for both sectors.

    Detectors are laid out round-major: block ``r`` holds the change of every
    check's outcome between rounds ``r - 1`` and ``r``; with ``closure`` an
    extra block compares the last round against a noiseless readout of the
    final data.  ``x`` decodes X errors from Z-check detectors, ``z`` the mirror.
    """

    rounds: int
    closure: bool
    x: SectorModel
    z: SectorModel
    n_data: int
    # physical channel parameters, kept for joint sampling
    location_priors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    cnot_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    cnot_p: float = 0.0
    meta: dict[str, Any] = field(default_factory=dict)

    def sector(self, side: Side) -> SectorModel:
        return self.x if side == "X" else self.z

    @property
    def n_detectors(self) -> int:
        return self.x.n_detectors + self.z.n_detectors

    @property
    def h_det(self) -> BitMatrix:
        """Block-diagonal detector matrix, X sector first."""
        a, b = self.x.h_det.to_array(), self.z.h_det.to_array()
        out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]), dtype=np.uint8)
        out[: a.shape[0], : a.shape[1]] = a
        out[a.shape[0] :, a.shape[1] :] = b
        return BitMatrix.from_array(out)

    @property
    def priors(self) -> np.ndarray:
        return np.concatenate([self.x.priors, self.z.priors])

    @property
    def fault_to_data(self) -> BitMatrix:
        """``2n x classes`` map onto ``(ex | ez)``."""
        a, b = self.x.fault_to_data.to_array(), self.z.fault_to_data.to_array()
        out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]), dtype=np.uint8)
        out[: a.shape[0], : a.shape[1]] = a
        out[a.shape[0] :, a.shape[1] :] = b
        return BitMatrix.from_array(out)

    @property
    def provenance(self) -> list[list[tuple]]:
        return [*self.x.provenance, *self.z.provenance]

    def to_json(self) -> dict[str, Any]:
        return {
            "rounds": self.rounds,
            "closure": self.closure,
            "h_det": self.h_det.to_text().strip().splitlines(),
            "priors": [float(p) for p in self.priors],
            "fault_to_data": self.fault_to_data.to_text().strip().splitlines(),
            "provenance": [[list(item) for item in col] for col in self.provenance],
        }


class _SectorBuilder:
    """Collects raw fault mechanisms and merges those with identical signatures."""

    def __init__(self, sector: Side, n_det: int, n_data: int) -> None:
        self.sector = sector
        self.n_det = n_det
        self.n_data = n_data
        self.index: dict[tuple[bytes, bytes], int] = {}
        self.det_cols: list[np.ndarray] = []
        self.data_cols: list[np.ndarray] = []
        self.priors: list[float] = []
        self.provenance: list[list[tuple]] = []
        self.raw_to_class: list[int] = []

    def add(self, det: np.ndarray, data: np.ndarray, prior: float, tag: tuple) -> None:
        if prior <= 0 or (not det.any() and not data.any()):
            self.raw_to_class.append(-1)
            return
        key = (np.packbits(det).tobytes(), np.packbits(data).tobytes())
        col = self.index.get(key)
        if col is None:
            col = len(self.priors)
            self.index[key] = col
            self.det_cols.append(det.copy())
            self.data_cols.append(data.copy())
            self.priors.append(float(prior))
            self.provenance.append([tag])
        else:
            self.priors[col] = float(xor_combine(self.priors[col], prior))
            self.provenance[col].append(tag)
        self.raw_to_class.append(col)

    def build(self) -> SectorModel:
        n_cols = len(self.priors)
        det = np.array(self.det_cols, dtype=np.uint8).reshape(n_cols, self.n_det).T
        data = np.array(self.data_cols, dtype=np.uint8).reshape(n_cols, self.n_data).T
        return SectorModel(
            self.sector,
            BitMatrix.from_array(det),
            np.array(self.priors, dtype=np.float64),
            BitMatrix.from_array(data),
            self.provenance,
            np.array(self.raw_to_class, dtype=np.int64),
        )


def _round_signature(
    rounds: int, closure: bool, r: int, own: np.ndarray, carried: np.ndarray
) -> np.ndarray:
    """Detector signature of a mechanism in round ``r``.

    ``own`` flips the outcomes of round ``r`` directly; ``carried`` is the change
    it leaves in every later round's outcome (the syndrome of its data error).
    """
    m = len(own)
    blocks = rounds + (1 if closure else 0)
    det = np.zeros(blocks * m, dtype=np.uint8)
    det[r * m : (r + 1) * m] = own
    if r + 1 < blocks:
        det[(r + 1) * m : (r + 2) * m] = own ^ carried
    return det


def build_detector_model(
    maps: FaultMaps,
    rounds: int,
    priors: np.ndarray,
    cnot_p: float = 0.0,
    closure: bool = True,
) -> DetectorModel:
    """Stack ``rounds`` copies of the fault maps into a round-differenced detector model.

    ``priors`` gives the depolarizing probability of each fault location,
    either once (shape ``(n_faults,)``) or per round (``(rounds, n_faults)``).
    A location with probability ``p`` contributes an X unit fault and a Z unit
    fault, each with marginal ``2p/3``.  ``cnot_p`` adds a two-qubit
    depolarizing channel after every CNOT whose correlated X-X and Z-Z parts
    become their own fault classes.  Classes with identical detector and data
    signatures are merged with XOR-combined priors.
    """
    if rounds < 1:
        raise DomainError(f"rounds must be >= 1, got {rounds}")
    circuit = maps.circuit
    n_faults = maps.n_faults
    priors = np.asarray(priors, dtype=np.float64)
    if priors.shape == (n_faults,):
        priors = np.broadcast_to(priors, (rounds, n_faults))
    if priors.shape != (rounds, n_faults):
        raise DimensionError(f"priors shape {priors.shape} does not fit {rounds} rounds x {n_faults} faults")
    if (priors < 0).any() or (priors > 1).any() or not 0 <= cnot_p <= 1:
        raise DomainError("fault probabilities must lie in [0, 1]")
    pairs = np.array(
        [(g.control, g.target, t) for t, layer in enumerate(circuit.timesteps) for g in layer],
        dtype=np.int64,
    ).reshape(-1, 3)

    sectors = {}
    code_h = {
        "X": _parity_from_circuit(circuit, "X"),
        "Z": _parity_from_circuit(circuit, "Z"),
    }
    for side in ("X", "Z"):
        fd = maps.data_map(side).to_array()
        fs = maps.syndrome_map(side).to_array()
        h = code_h[side]
        m = fs.shape[0]
        blocks = rounds + (1 if closure else 0)
        builder = _SectorBuilder(side, blocks * m, circuit.n_data)
        carried_all = (h @ fd) & 1
        for r in range(rounds):
            for f in range(n_faults):
                det = _round_signature(rounds, closure, r, fs[:, f], carried_all[:, f])
                builder.add(det, fd[:, f], 2 * priors[r, f] / 3, (r, "loc", f))
            for gi, (c, t, layer) in enumerate(pairs):
                fc = circuit.location(int(c), int(layer) + 1)
                ft = circuit.location(int(t), int(layer) + 1)
                for pattern, cols in (("c", (fc,)), ("t", (ft,)), ("ct", (fc, ft))):
                    own = np.bitwise_xor.reduce(fs[:, list(cols)], axis=1)
                    carried = np.bitwise_xor.reduce(carried_all[:, list(cols)], axis=1)
                    data = np.bitwise_xor.reduce(fd[:, list(cols)], axis=1)
                    det = _round_signature(rounds, closure, r, own, carried)
                    builder.add(det, data, 4 * cnot_p / 15, (r, "cnot", gi, pattern))
        sectors[side] = builder.build()
    return DetectorModel(
        rounds,
        closure,
        sectors["X"],
        sectors["Z"],
        circuit.n_data,
        location_priors=np.array(priors),
        cnot_pairs=pairs[:, :2].copy(),
        cnot_p=cnot_p,
        meta={"kind": "circuit", "n_faults": n_faults},
    )


def _parity_from_circuit(circuit: SmCircuit, side: Side) -> np.ndarray:
    n, mx = circuit.n_data, circuit.n_anc_x
    if side == "X":
        h = np.zeros((circuit.n_anc_z, n), dtype=np.uint8)
        for layer in circuit.timesteps:
            for g in layer:
                if g.target >= n + mx:
                    h[g.target - n - mx, g.control] = 1
    else:
        h = np.zeros((mx, n), dtype=np.uint8)
        for layer in circuit.timesteps:
            for g in layer:
                if n <= g.control < n + mx:
                    h[g.control - n, g.target] = 1
    return h


def phenomenological_model(
    code: CssCode, p: float, q_syn: float, rounds: int, closure: bool = True
) -> DetectorModel:
    """Detector model for phenomenological noise: data faults each round plus readout flips."""
    _check_probability("p", p)
    _check_probability("q_syn", q_syn)
    if rounds < 1:
        raise DomainError(f"rounds must be >= 1, got {rounds}")
    sectors = {}
    for side in ("X", "Z"):
        h = code.parity_for(side).to_array()
        m, n = h.shape
        blocks = rounds + (1 if closure else 0)
        builder = _SectorBuilder(side, blocks * m, n)
        eye_n = np.eye(n, dtype=np.uint8)
        eye_m = np.eye(m, dtype=np.uint8)
        zero_n = np.zeros(n, dtype=np.uint8)
        for r in range(rounds):
            for j in range(n):
                # a data error shifts every later outcome equally, so only round r changes
                det = np.zeros(blocks * m, dtype=np.uint8)
                det[r * m : (r + 1) * m] = h[:, j]
                builder.add(det, eye_n[j], 2 * p / 3, (r, "data", j))
            for i in range(m):
                det = _round_signature(rounds, closure, r, eye_m[i], np.zeros(m, dtype=np.uint8))
                builder.add(det, zero_n, q_syn, (r, "meas", i))
        sectors[side] = builder.build()
    return DetectorModel(
        rounds, closure, sectors["X"], sectors["Z"], code.n, meta={"kind": "phenomenological"}
    )


def detectors_from_syndromes(rounds_syndrome: np.ndarray, final_syndrome: np.ndarray | None) -> np.ndarray:
    """Round-difference measured outcomes ``(..., rounds, m)`` into detectors ``(..., blocks*m)``."""
    s = np.asarray(rounds_syndrome, dtype=np.uint8)
    if final_syndrome is not None:
        s = np.concatenate([s, np.asarray(final_syndrome, dtype=np.uint8)[..., None, :]], axis=-2)
    prev = np.zeros_like(s)
    prev[..., 1:, :] = s[..., :-1, :]
    det = s ^ prev
    return det.reshape(*det.shape[:-2], -1)


def sample_circuit_level(
    model: DetectorModel, rng: np.random.Generator, shots: int | None = None
) -> NoiseSample:
    """Fire every merged fault class independently with its prior.

    ``faults`` is the concatenated ``[x classes | z classes]`` indicator.
    """
    batch = 1 if shots is None else shots
    out = {}
    for side in ("X", "Z"):
        sm = model.sector(side)
        f = (rng.random((batch, sm.n_classes)) < sm.priors).astype(np.uint8)
        det = (f @ sm.h_det.to_array().T) & 1
        data = (f @ sm.fault_to_data.to_array().T) & 1
        out[side] = (f, det, data)
    faults = np.concatenate([out["X"][0], out["Z"][0]], axis=1)
    dets = np.concatenate([out["X"][1], out["Z"][1]], axis=1)
    ex, ez = out["X"][2], out["Z"][2]
    if shots is None:
        return NoiseSample(ex[0], ez[0], detectors=dets[0], faults=faults[0])
    return NoiseSample(ex, ez, detectors=dets, faults=faults)


_TWO_QUBIT_PAULIS = np.array([(a, b) for a in range(4) for b in range(4)][1:], dtype=np.int64)
# Pauli index: 0 I, 1 X, 2 Y, 3 Z -> (x, z) bits
_PAULI_X = np.array([0, 1, 1, 0], dtype=np.uint8)
_PAULI_Z = np.array([0, 0, 1, 1], dtype=np.uint8)


def sample_circuit_faults(
    model: DetectorModel, rng: np.random.Generator, shots: int
) -> NoiseSample:
    """Physical sampling: exclusive X/Y/Z at each location and a 15-way two-qubit channel per CNOT.

    Y faults set the X and Z unit faults together, so the sectors stay correlated
    the way depolarizing noise correlates them.  Only for circuit models.
    """
    if model.meta.get("kind") != "circuit":
        raise ValueError("joint fault sampling needs a circuit-level model")
    rounds, n_faults = model.location_priors.shape
    p_loc = model.location_priors[None]
    u = rng.random((shots, rounds, n_faults))
    fx = u < 2 * p_loc / 3
    fz = (u >= p_loc / 3) & (u < p_loc)
    n_pairs = len(model.cnot_pairs)
    u2 = rng.random((shots, rounds, n_pairs))
    fired = u2 < model.cnot_p
    which = np.zeros(u2.shape, dtype=np.int64)
    if model.cnot_p > 0:
        which[fired] = np.minimum((u2[fired] / model.cnot_p * 15).astype(np.int64), 14)
    pauli = _TWO_QUBIT_PAULIS[which]  # (shots, rounds, pairs, 2)
    xbits = _PAULI_X[pauli] & fired[..., None]
    zbits = _PAULI_Z[pauli] & fired[..., None]

    result = {}
    for side, loc_bits, pair_bits in (("X", fx, xbits), ("Z", fz, zbits)):
        sm = model.sector(side)
        # raw mechanism order matches build_detector_model: per round, locations then (c, t, ct) per pair
        c, t = pair_bits[..., 0], pair_bits[..., 1]
        pat = np.stack([c & (1 - t), t & (1 - c), c & t], axis=-1).reshape(shots, rounds, -1)
        raw = np.concatenate([loc_bits.astype(np.uint8), pat.astype(np.uint8)], axis=2).reshape(shots, -1)
        classes = sm.raw_to_class
        keep = classes >= 0
        f = np.zeros((shots, sm.n_classes), dtype=np.uint8)
        hits = raw[:, keep]
        cols = classes[keep]
        for j in np.flatnonzero(hits.any(axis=0)):
            f[:, cols[j]] ^= hits[:, j]
        # dropped mechanisms either never fire or have an empty signature
        det = (f @ sm.h_det.to_array().T) & 1
        data = (f @ sm.fault_to_data.to_array().T) & 1
        result[side] = (f, det, data)
    faults = np.concatenate([result["X"][0], result["Z"][0]], axis=1)
    dets = np.concatenate([result["X"][1], result["Z"][1]], axis=1)
    return NoiseSample(result["X"][2], result["Z"][2], detectors=dets, faults=faults)
