"""Syndrome decoding: belief propagation (sum-product or normalized min-sum) and OSD-0.

Messages are log-likelihood ratios ``log(P(0) / P(1))``, so a positive value
favours "no error".  The decoder is batched: it runs many syndromes against
one parity-check matrix at once and drops each syndrome from the working set
as soon as its hard decision reproduces it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from qldpc import gf2
from qldpc.code import CssCode, Side
from qldpc.errors import DimensionError, DomainError, InconsistentSyndrome, PolicyError
from qldpc.gf2 import BitMatrix, BitVector
from qldpc.noise import DetectorModel

_ALGORITHMS = {
    "normalized-min-sum": "nms",
    "nms": "nms",
    "min-sum": "nms",
    "sum-product": "sp",
    "sp": "sp",
    "bp": "sp",
}


@dataclass(frozen=True)
class Layering:
    """An ordered partition used by the layered schedule.

    ``kind == "check"`` groups check rows: each layer refreshes its checks'
    messages against the latest posteriors.  ``kind == "variable"`` groups
    variable columns: each layer recomputes the incoming messages of its
    variables from the latest outgoing messages of every other variable.
    """

    kind: Literal["check", "variable"]
    layers: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.kind not in ("check", "variable"):
            raise ValueError(f"unknown layering kind {self.kind!r}")
        seen = [i for layer in self.layers for i in layer]
        if len(seen) != len(set(seen)):
            raise ValueError("layers overlap")

    def validate(self, h_shape: tuple[int, int]) -> None:
        size = h_shape[0] if self.kind == "check" else h_shape[1]
        seen = sorted(i for layer in self.layers for i in layer)
        if seen != list(range(size)):
            raise DimensionError(f"{self.kind} layering does not cover 0..{size - 1} exactly once")


Schedule = Literal["flooding", "serial"] | Layering


@dataclass(frozen=True)
class DecoderConfig:
    algorithm: str = "normalized-min-sum"
    normalization: float = 0.85
    schedule: Schedule = "flooding"
    max_iters: int = 100
    prior_p: float | np.ndarray = 0.05
    osd: bool = False
    clip: float = 30.0
    # stop at the first hard decision that matches the syndrome; when False,
    # keep iterating until the posteriors reach a fixed point (or max_iters)
    early_stop: bool = True

    def __post_init__(self) -> None:
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0 < self.normalization <= 1:
            raise DomainError(f"normalization {self.normalization} not in (0, 1]")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if not isinstance(self.schedule, Layering) and self.schedule not in ("flooding", "serial"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.clip <= 0:
            raise DomainError("clip must be positive")

    @property
    def kind(self) -> str:
        return _ALGORITHMS[self.algorithm]


@dataclass
class DecodeResult:
    estimate: BitVector
    converged: bool
    iterations: int
    posteriors: np.ndarray
    used_osd: bool = False


@dataclass
class BatchResult:
    """Row-aligned results for a batch of syndromes."""

    estimates: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    posteriors: np.ndarray
    used_osd: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __len__(self) -> int:
        return len(self.converged)

    def item(self, i: int) -> DecodeResult:
        return DecodeResult(
            BitVector.from_array(self.estimates[i]),
            bool(self.converged[i]),
            int(self.iterations[i]),
            self.posteriors[i].copy(),
            bool(self.used_osd[i]),
        )


def _llr(p: np.ndarray, clip: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.clip(np.log((1 - p) / p), -clip, clip)


class BPDecoder:
    """Reusable decoder bound to one parity-check matrix.

    Holds the padded Tanner-graph adjacency; every call to :meth:`decode`
    allocates its own message state, so one instance may serve many batches.
    """

    def __init__(self, h: BitMatrix | np.ndarray, config: DecoderConfig) -> None:
        dense = h.to_array() if isinstance(h, BitMatrix) else np.asarray(h, dtype=np.uint8)
        self.h = dense.astype(np.uint8)
        self.config = config
        m, n = self.h.shape
        self.m, self.n = m, n
        chk, var = np.nonzero(self.h)  # row-major, so edges are grouped by check
        self.n_edges = len(chk)
        self.edge_chk, self.edge_var = chk, var
        pad = self.n_edges
        self.chk_edges = _padded_groups(chk, m, pad)
        order = np.lexsort((chk, var))
        self.var_edges = _padded_groups(var[order], n, pad, values=order)
        self.chk_mask = self.chk_edges != pad
        # position of every edge inside its check row, for scattering check outputs
        self.edge_slot = np.empty(self.n_edges, dtype=np.int64)
        for row in range(m):
            real = self.chk_edges[row][self.chk_mask[row]]
            self.edge_slot[real] = np.arange(len(real))
        self.priors = self._priors(config.prior_p)
        sched = config.schedule
        if isinstance(sched, Layering):
            sched.validate(self.h.shape)
            self.layering: Layering | None = sched
        elif sched == "serial":
            self.layering = Layering("check", tuple((i,) for i in range(m)))
        else:
            self.layering = None
        if self.layering is not None and self.layering.kind == "variable":
            mark = np.zeros((len(self.layering.layers), self.n_edges), dtype=bool)
            for li, layer in enumerate(self.layering.layers):
                mark[li] = np.isin(self.edge_var, layer)
            self._var_layer_edges = [np.flatnonzero(row) for row in mark]

    def _priors(self, prior_p: float | np.ndarray) -> np.ndarray:
        p = np.broadcast_to(np.asarray(prior_p, dtype=np.float64), (self.n,)).copy()
        if ((p <= 0) | (p > 0.5)).any():
            raise DomainError("prior probabilities must lie in (0, 0.5]")
        return _llr(p, self.config.clip)

    # message kernels -------------------------------------------------------------

    def _check_messages(self, q: np.ndarray, synd: np.ndarray) -> np.ndarray:
        """Check-to-variable messages for every edge, given variable-to-check ``q``.

        ``q`` has shape ``(B, E + 1)``; the last column is a padding slot.
        Returns ``(B, E)``.
        """
        cfg = self.config
        g = q[:, self.chk_edges]  # (B, m, dc)
        neg = (g < 0) & self.chk_mask
        parity = (neg.sum(axis=2) & 1).astype(bool) ^ synd.astype(bool)  # (B, m)
        if cfg.kind == "nms":
            mag = np.where(self.chk_mask, np.abs(g), np.inf)
            idx = np.argmin(mag, axis=2)
            min1 = np.take_along_axis(mag, idx[..., None], axis=2)[..., 0]
            np.put_along_axis(mag, idx[..., None], np.inf, axis=2)
            min2 = mag.min(axis=2)
            e_chk = self.edge_chk
            slot = self.edge_slot
            is_min = idx[:, e_chk] == slot
            out = np.where(is_min, min2[:, e_chk], min1[:, e_chk]) * cfg.normalization
        else:
            t = np.where(self.chk_mask, np.tanh(np.abs(g) / 2), 1.0)
            fwd = np.cumprod(t, axis=2)
            bwd = np.cumprod(t[..., ::-1], axis=2)[..., ::-1]
            excl = np.ones_like(t)
            excl[..., 1:] *= fwd[..., :-1]
            excl[..., :-1] *= bwd[..., 1:]
            excl = np.minimum(excl, 1 - 1e-15)
            vals = 2 * np.arctanh(excl)
            out = vals[:, self.edge_chk, self.edge_slot]
        sign_neg = parity[:, self.edge_chk] ^ neg[:, self.edge_chk, self.edge_slot]
        out = np.minimum(out, cfg.clip)
        return np.where(sign_neg, -out, out)

    def _posteriors(self, prior: np.ndarray, r: np.ndarray) -> np.ndarray:
        rp = np.concatenate([r, np.zeros((r.shape[0], 1))], axis=1)
        return prior + rp[:, self.var_edges].sum(axis=2)

    # main loop --------------------------------------------------------------------

    def decode(self, syndromes: np.ndarray) -> BatchResult:
        s = np.atleast_2d(np.asarray(syndromes, dtype=np.uint8))
        if s.shape[1] != self.m:
            raise DimensionError(f"syndrome length {s.shape[1]} does not match {self.m} checks")
        cfg = self.config
        batch = s.shape[0]
        est = np.zeros((batch, self.n), dtype=np.uint8)
        post = np.tile(self.priors, (batch, 1))
        iters = np.zeros(batch, dtype=np.int64)
        conv = ~s.any(axis=1)  # iteration 0: the all-zero guess
        active = np.flatnonzero(~conv)
        prior = np.tile(self.priors, (len(active), 1))
        synd = s[active]
        e = self.n_edges
        # variable-to-check messages with a padding column, check-to-variable without
        q = np.empty((len(active), e + 1))
        q[:, :e] = prior[:, self.edge_var]
        q[:, e] = np.inf
        r = np.zeros((len(active), e))
        p_cur = prior.copy()
        for it in range(1, cfg.max_iters + 1):
            if not len(active):
                break
            p_prev = p_cur.copy()
            if self.layering is None:
                r = self._check_messages(q, synd)
                p_cur = self._posteriors(prior, r)
                q[:, :e] = np.clip(p_cur[:, self.edge_var] - r, -cfg.clip, cfg.clip)
            elif self.layering.kind == "variable":
                for edges in self._var_layer_edges:
                    fresh = self._check_messages(q, synd)
                    r[:, edges] = fresh[:, edges]
                    p_cur = self._posteriors(prior, r)
                    q[:, edges] = np.clip(
                        p_cur[:, self.edge_var[edges]] - r[:, edges], -cfg.clip, cfg.clip
                    )
            else:
                for layer in self.layering.layers:
                    rows = np.asarray(layer, dtype=np.int64)
                    edges = np.flatnonzero(np.isin(self.edge_chk, rows))
                    vars_ = self.edge_var[edges]
                    q[:, edges] = np.clip(p_cur[:, vars_] - r[:, edges], -cfg.clip, cfg.clip)
                    fresh = self._check_messages(q, synd)
                    delta = fresh[:, edges] - r[:, edges]
                    r[:, edges] = fresh[:, edges]
                    np.add.at(p_cur.T, vars_, delta.T)
            hard = (p_cur < 0).astype(np.uint8)
            ok = ~(((hard @ self.h.T) & 1) ^ synd).any(axis=1)
            if cfg.early_stop:
                done = ok | (it == cfg.max_iters)
            else:
                settled = (np.abs(p_cur - p_prev) <= 1e-9 * (1 + np.abs(p_cur))).all(axis=1)
                done = (ok & settled) | (it == cfg.max_iters)
            idx = active[done]
            est[idx] = hard[done]
            post[idx] = p_cur[done]
            iters[idx] = it
            conv[idx] = ok[done]
            keep = ~done
            active = active[keep]
            prior, synd, q, r, p_cur = prior[keep], synd[keep], q[keep], r[keep], p_cur[keep]

        used_osd = np.zeros(batch, dtype=bool)
        if cfg.osd:
            for i in np.flatnonzero(~conv):
                est[i] = osd0(self.h, s[i], post[i]).to_array()
                used_osd[i] = True
        return BatchResult(est, conv, iters, post, used_osd)


def _padded_groups(keys: np.ndarray, n_groups: int, pad: int, values: np.ndarray | None = None) -> np.ndarray:
    """Rows of ``values`` (default: positions) grouped by sorted ``keys``, padded with ``pad``."""
    values = np.arange(len(keys)) if values is None else values
    counts = np.bincount(keys, minlength=n_groups)
    width = max(int(counts.max(initial=0)), 1)
    out = np.full((n_groups, width), pad, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    pos = np.arange(len(keys)) - np.repeat(starts, counts)
    out[keys, pos] = values
    return out


def decode_syndrome(h: BitMatrix, s: BitVector | np.ndarray, config: DecoderConfig) -> DecodeResult:
    s = gf2.as_bitvector(s)
    if s.len != h.rows:
        raise DimensionError(f"syndrome length {s.len} does not match {h.rows} rows")
    return BPDecoder(h, config).decode(s.to_array()[None]).item(0)


def osd0(h: BitMatrix | np.ndarray, s: BitVector | np.ndarray, soft: np.ndarray) -> BitVector:
    """Order-0 ordered statistics decoding.

    Columns are ranked from most to least likely in error (ascending LLR, ties
    to the lower index); the first independent columns in that order form the
    information set and carry the unique solution, all others are zero.
    """
    hm = h if isinstance(h, BitMatrix) else BitMatrix.from_array(h)
    s = gf2.as_bitvector(s)
    soft = np.asarray(soft, dtype=np.float64)
    if s.len != hm.rows or soft.shape != (hm.cols,):
        raise DimensionError("osd0 inputs have inconsistent dimensions")
    order = np.argsort(soft, kind="stable")
    x = gf2.solve(hm.select_cols(order), s)
    if x is None:
        raise InconsistentSyndrome("syndrome is not in the column space of h")
    out = np.zeros(hm.cols, dtype=np.uint8)
    out[order] = x.to_array()
    return BitVector.from_array(out)


# layer assignments ------------------------------------------------------------------------


def row_coloring(h: BitMatrix | np.ndarray) -> Layering:
    """Greedy first-fit coloring of rows so that each layer has disjoint variable support."""
    dense = h.to_array() if isinstance(h, BitMatrix) else np.asarray(h, dtype=np.uint8)
    layers: list[list[int]] = []
    used: list[np.ndarray] = []
    for i, row in enumerate(dense.astype(bool)):
        for li, mask in enumerate(used):
            if not (mask & row).any():
                layers[li].append(i)
                mask |= row
                break
        else:
            layers.append([i])
            used.append(row.copy())
    return Layering("check", tuple(tuple(layer) for layer in layers))


def layered_partition(code: CssCode, policy: str, side: Side = "X") -> Layering:
    """Layering for decoding ``side`` errors of ``code``.

    ``"two-block-AB"`` splits the variables at the block boundary, left block
    first; ``"row-coloring"`` colors the rows of the relevant check matrix.
    """
    if policy == "two-block-AB":
        block = code.meta.get("block")
        if block is None or 2 * block != code.n:
            raise PolicyError("two-block-AB needs a code built by a two-block constructor")
        return Layering("variable", (tuple(range(block)), tuple(range(block, 2 * block))))
    if policy == "row-coloring":
        return row_coloring(code.parity_for(side))
    raise PolicyError(f"unknown layering policy {policy!r}")


# circuit level --------------------------------------------------------------------------


def decode_circuit_level(
    model: DetectorModel, detectors: np.ndarray, config: DecoderConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Decode both sectors of a detector model.

    ``detectors`` is ``[x-sector | z-sector]`` (one row per shot for batches);
    the priors in ``config`` are replaced by the model's class priors.
    Returns ``(fault_estimate, data_estimate)`` with data laid out ``(ex | ez)``.
    """
    det = np.asarray(detectors, dtype=np.uint8)
    single = det.ndim == 1
    det = np.atleast_2d(det)
    if det.shape[1] != model.n_detectors:
        raise DimensionError(f"{det.shape[1]} detectors given, model has {model.n_detectors}")
    split = model.x.n_detectors
    faults, data = [], []
    for side, chunk in (("X", det[:, :split]), ("Z", det[:, split:])):
        sm = model.sector(side)
        cfg = _with_priors(config, np.minimum(sm.priors, 0.5))
        res = BPDecoder(sm.h_det, cfg).decode(chunk)
        faults.append(res.estimates)
        data.append((res.estimates @ sm.fault_to_data.to_array().T) & 1)
    f = np.concatenate(faults, axis=1).astype(np.uint8)
    d = np.concatenate(data, axis=1).astype(np.uint8)
    return (f[0], d[0]) if single else (f, d)


def _with_priors(config: DecoderConfig, priors: np.ndarray) -> DecoderConfig:
    return dataclasses.replace(config, prior_p=priors)
