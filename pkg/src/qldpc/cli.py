"""Command-line entry point: ``qldpc construct|params|circuit|decode|sim``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from qldpc import code as code_mod
from qldpc import construct, decode, noise, sim
from qldpc.errors import QldpcError
from qldpc.gf2 import BitVector, read_matrix


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _base_matrix(path: str, q: int) -> construct.BaseMatrix:
    text = Path(path).read_text()
    try:
        entries = json.loads(text)
    except json.JSONDecodeError:
        entries = [[int(t) for t in line.split()] for line in text.splitlines() if line.strip()]
    return construct.BaseMatrix(np.array(entries, dtype=np.int64), q)


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def cmd_construct(args: argparse.Namespace) -> None:
    fam = args.family
    if fam in ("toric", "surface"):
        code = construct.toric_code(args.L) if fam == "toric" else construct.surface_code(args.L)
    elif fam == "hp":
        code = construct.hypergraph_product(read_matrix(args.ha), read_matrix(args.hb))
    elif fam == "lp":
        code = construct.lifted_product(_base_matrix(args.base_a, args.q), _base_matrix(args.base_b, args.q))
    elif fam == "two-block":
        code = construct.two_block(read_matrix(args.a), read_matrix(args.b))
    elif fam == "bb":
        code = construct.bivariate_bicycle(
            args.ell, args.m, construct.parse_monomials(args.a), construct.parse_monomials(args.b), args.relaxed
        )
    else:
        code = sim.code_from_source({"family": "2bga", "group": args.group, "sa": _split(args.sa), "sb": _split(args.sb)})
    bundle = code_mod.code_to_bundle(code, include_logicals=not args.no_logicals)
    _emit(json.dumps(bundle, indent=2) + "\n", args.out)


def cmd_params(args: argparse.Namespace) -> None:
    code = code_mod.load_code(args.code)
    if args.exhaustive_wmax is not None:
        params = code_mod.distance_exhaustive(code, w_max=args.exhaustive_wmax)
    elif args.probe_trials is not None:
        params = code_mod.distance_probe(code, args.probe_trials, args.seed)
    else:
        params = code_mod.code_params(code)
    _emit(json.dumps(params.as_dict()) + "\n", None)


def cmd_circuit(args: argparse.Namespace) -> None:
    code = code_mod.load_code(args.code)
    circuit = noise.build_sm_circuit(code, args.schedule)
    if args.emit == "circuit":
        _emit(circuit.to_text(), args.out)
        return
    maps = noise.derive_fault_maps(circuit)
    priors = noise.circuit_priors(circuit, args.p)
    model = noise.build_detector_model(maps, args.rounds, priors, cnot_p=args.cnot * args.p)
    _emit(json.dumps(model.to_json()) + "\n", args.out)


def cmd_decode(args: argparse.Namespace) -> None:
    h = read_matrix(args.h)
    s = BitVector.from_bits(args.syndrome)
    schedule: str | decode.Layering = args.schedule
    if schedule == "layered":
        schedule = decode.row_coloring(h)
    alg = {"nms": "normalized-min-sum", "sp": "sum-product"}[args.alg]
    cfg = decode.DecoderConfig(alg, args.norm, schedule, args.iters, args.prior, args.osd0)
    res = decode.decode_syndrome(h, s, cfg)
    out = {
        "estimate": res.estimate.to_bits(),
        "converged": res.converged,
        "iterations": res.iterations,
        "used_osd": res.used_osd,
    }
    _emit(json.dumps(out) + "\n", None)


def cmd_sim(args: argparse.Namespace) -> None:
    spec = sim.load_spec(args.spec)
    grid = sim.parse_grid(args.p_grid) if args.p_grid else list(spec.p_values)
    _emit(sim.sweep(spec, grid), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qldpc", description="Quantum LDPC code toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    con = sub.add_parser("construct", help="build a code and print its JSON bundle")
    fam = con.add_subparsers(dest="family", required=True)
    for name in ("toric", "surface"):
        p = fam.add_parser(name)
        p.add_argument("--L", type=int, required=True)
    p = fam.add_parser("hp", help="hypergraph product of two classical check matrices")
    p.add_argument("--ha", required=True)
    p.add_argument("--hb", required=True)
    p = fam.add_parser("lp", help="lifted product of two base matrices (JSON or whitespace text, -1 = zero block)")
    p.add_argument("--base-a", required=True)
    p.add_argument("--base-b", required=True)
    p.add_argument("--q", type=int, required=True)
    p = fam.add_parser("two-block")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p = fam.add_parser("bb", help="bivariate bicycle code (defaults give the [[144,12,12]] code)")
    p.add_argument("--ell", type=int, default=12)
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--a", default="x3,y1,y2")
    p.add_argument("--b", default="y3,x1,x2")
    p.add_argument("--relaxed", action="store_true", help="allow other than three monomials")
    p = fam.add_parser("2bga", help="two-block group algebra code from Cayley graphs")
    p.add_argument("--group", required=True, help="dihedral:R or cyclic:Q")
    p.add_argument("--sa", required=True, help="comma-separated generators, right Cayley graph")
    p.add_argument("--sb", required=True, help="comma-separated generators, left Cayley graph")
    for p in fam.choices.values():
        p.add_argument("--out")
        p.add_argument("--no-logicals", action="store_true")
    con.set_defaults(func=cmd_construct)

    par = sub.add_parser("params", help="report n, k and distance bounds")
    par.add_argument("--code", required=True)
    mode = par.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive-wmax", type=int)
    mode.add_argument("--probe-trials", type=int)
    par.add_argument("--seed", type=int, default=0)
    par.set_defaults(func=cmd_params)

    cir = sub.add_parser("circuit", help="syndrome-measurement circuit or its detector model")
    cir.add_argument("--code", required=True)
    cir.add_argument("--rounds", type=int, default=1)
    cir.add_argument("--p", type=float, default=0.001)
    cir.add_argument("--cnot", type=float, default=0.0, help="two-qubit channel strength as a multiple of p")
    cir.add_argument("--schedule", default="greedy", choices=sorted(noise.SCHEDULES))
    cir.add_argument("--emit", choices=("circuit", "detmodel"), default="circuit")
    cir.add_argument("--out")
    cir.set_defaults(func=cmd_circuit)

    dec = sub.add_parser("decode", help="decode one syndrome")
    dec.add_argument("--h", required=True)
    dec.add_argument("--syndrome", required=True)
    dec.add_argument("--alg", choices=("nms", "sp"), default="nms")
    dec.add_argument("--norm", type=float, default=0.85)
    dec.add_argument("--iters", type=int, default=100)
    dec.add_argument("--schedule", choices=("flooding", "serial", "layered"), default="flooding")
    dec.add_argument("--prior", type=float, default=0.05)
    dec.add_argument("--osd0", action="store_true")
    dec.set_defaults(func=cmd_decode)

    sm = sub.add_parser("sim", help="Monte Carlo logical error rate sweep")
    sm.add_argument("--spec", required=True)
    sm.add_argument("--p-grid", help="lo:hi:NUMlog, lo:hi:NUM or a comma list")
    sm.add_argument("--out")
    sm.set_defaults(func=cmd_sim)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        args.func(args)
    except (QldpcError, OSError, KeyError) as exc:
        print(f"qldpc: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
