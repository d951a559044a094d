"""Command line front end for the census/complexity/simulation pipeline.

Every subcommand prints its resolved configuration first, produces
deterministic output (identical flags give identical bytes) and supports
``--json`` for scripting.  Exit status is 0 on success and 2 on any
validation or file error, with a diagnostic naming the violated
precondition on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import __version__
from .census import enumerate_machines, shard_plan
from .complexity import NotInTableError, bdm_detail, build_table
from .machine import MachineSpec, count_programs
from .qsim import run_staged
from .resources import estimate, growth_csv, growth_rows
from .store import (
    Checkpoint,
    StoreError,
    append_checkpoint_shard,
    export_table_jsonl,
    load_checkpoint,
    load_table,
    save_table,
)

_CHECKPOINT_SHARDS = 32


def _render_bits(bits: float) -> str:
    return f"{bits:.11e}"


def _config_line(pairs: list[tuple[str, object]]) -> str:
    return "# config " + " ".join(f"{k}={v}" for k, v in pairs)


def _emit(args, human_lines, payload) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


def _default_workers() -> int:
    env = os.environ.get("CTMQ_WORKERS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def cmd_count(args) -> int:
    spec = MachineSpec(m=args.states, c=1, z=1, n=args.symbols, d=args.dimension)
    total = count_programs(spec)
    config = [("m", args.states), ("n", args.symbols), ("d", args.dimension)]
    _emit(
        args,
        [_config_line(config), str(total)],
        {"config": dict(config), "programs": total},
    )
    return 0


def _spec_from_args(args) -> MachineSpec:
    return MachineSpec(m=args.states, c=args.tape_cells, z=args.max_steps)


def cmd_enumerate(args) -> int:
    spec = _spec_from_args(args)
    workers = args.workers if args.workers else _default_workers()
    config = [
        ("m", spec.m), ("n", spec.n), ("d", spec.d), ("c", spec.c), ("z", spec.z),
        ("workers", workers), ("output", args.output),
        ("checkpoint", args.checkpoint or "-"),
    ]
    if args.checkpoint and os.path.exists(args.checkpoint):
        ckpt = load_checkpoint(args.checkpoint)
        if ckpt.spec != spec:
            raise StoreError(
                f"checkpoint {args.checkpoint} was written for {ckpt.spec}"
            )
    else:
        ckpt = Checkpoint(spec, [])
    if args.checkpoint:
        plan = ckpt.remaining(shard_plan(spec, _CHECKPOINT_SHARDS))
        on_shard = lambda lo, hi, d: append_checkpoint_shard(
            args.checkpoint, spec, lo, hi, d
        )
        fresh = enumerate_machines(spec, workers=workers, ranges=plan, on_shard=on_shard)
        dist = ckpt.merged() if not plan else load_checkpoint(args.checkpoint).merged()
    else:
        dist = enumerate_machines(spec, workers=workers)
    table = build_table(dist)
    save_table(table, args.output)
    if args.jsonl:
        export_table_jsonl(table, args.jsonl)
    lines = [
        _config_line(config),
        f"programs {table.total}",
        f"halting {table.halting_total}",
        f"nonhalting {table.nonhalting_total}",
        f"frozen {table.frozen_total}",
        f"distinct-outputs {len(table.counts)}",
        f"coverage {table.coverage:.6f}",
    ]
    payload = {
        "config": dict(config),
        "programs": table.total,
        "halting": table.halting_total,
        "nonhalting": table.nonhalting_total,
        "frozen": table.frozen_total,
        "distinct_outputs": len(table.counts),
        "coverage": table.coverage,
    }
    _emit(args, lines, payload)
    return 0


def cmd_ctm(args) -> int:
    table = load_table(args.table)
    config = [("table", args.table), ("strings", len(args.strings))]
    lines = [_config_line(config)]
    rows = []
    for s in args.strings:
        d = table.d_value(s)
        if d == 0:
            lines.append(f"{s} absent")
            rows.append({"string": s, "present": False})
        else:
            bits = table.ctm(s)
            lines.append(f"{s} d {d} ctm {_render_bits(bits)}")
            rows.append(
                {
                    "string": s,
                    "present": True,
                    "d_numerator": d.numerator,
                    "d_denominator": d.denominator,
                    "ctm": bits,
                }
            )
    _emit(args, lines, {"config": dict(config), "results": rows})
    return 0


def cmd_bdm(args) -> int:
    table = load_table(args.table)
    if args.input_file:
        text = open(args.input_file).read().split()
        if len(text) != 1:
            raise ValueError("input file must hold exactly one binary string")
        s = text[0]
    else:
        s = args.string
    detail = bdm_detail(
        s,
        table,
        block=args.block,
        mode=args.mode,
        stride=args.stride,
        multiplicity=args.multiplicity,
        lenient=args.lenient,
    )
    config = [
        ("table", args.table),
        ("length", len(s)),
        ("block", args.block if args.block else table.spec.c),
        ("mode", args.mode),
        ("stride", args.stride),
        ("multiplicity", args.multiplicity),
        ("lenient", args.lenient),
    ]
    lines = [_config_line(config)]
    for block, count, bits in detail.blocks:
        lines.append(f"block {block} count {count} ctm {_render_bits(bits)}")
    for block, count in detail.missing:
        lines.append(f"missing {block} count {count}")
    lines.append(f"bdm {_render_bits(detail.value)}")
    payload = {
        "config": dict(config),
        "blocks": [
            {"block": b, "count": n, "ctm": bits} for b, n, bits in detail.blocks
        ],
        "missing": [{"block": b, "count": n} for b, n in detail.missing],
        "bdm": detail.value,
    }
    _emit(args, lines, payload)
    return 0


def _fraction_str(value) -> str:
    return str(value) if isinstance(value, Fraction) else repr(value)


def cmd_qsim(args) -> int:
    spec = _spec_from_args(args)
    z_ch = args.stage_steps if args.stage_steps else args.max_steps
    config = [
        ("m", spec.m), ("n", spec.n), ("d", spec.d), ("c", spec.c),
        ("z", args.max_steps), ("z_ch", z_ch), ("backend", args.backend),
    ]
    report = run_staged(spec, z=args.max_steps, z_ch=z_ch, backend=args.backend)
    lines = [_config_line(config), f"p_h {_fraction_str(report.p_h)}"]
    ranked = sorted(report.p_s.items(), key=lambda kv: (-kv[1], kv[0]))
    if args.top:
        ranked = ranked[: args.top]
    rows = []
    for s, p in ranked:
        bits = report.ctm_estimate(s)
        lines.append(f"p_s {s} {_fraction_str(p)} ctm {_render_bits(bits)}")
        rows.append({"string": s, "p_s": float(p), "ctm": bits})
    payload = {
        "config": dict(config),
        "p_h": float(report.p_h),
        "strings": rows,
    }
    if args.verify:
        census = enumerate_machines(spec, workers=_default_workers())
        table = build_table(census)
        exact_ph = Fraction(census.halting_total, table.total)
        ph_match = report.p_h == exact_ph
        deviation = 0.0
        for s in census.output_counts:
            deviation = max(deviation, abs(report.ctm_estimate(s) - table.ctm(s)))
        extra = set(report.p_s) - set(census.output_counts)
        lines.append(f"verify p_h-exact {str(ph_match).lower()}")
        lines.append(f"verify max-ctm-deviation {deviation!r}")
        lines.append(f"verify extra-strings {len(extra)}")
        payload["verify"] = {
            "p_h_exact": bool(ph_match),
            "max_ctm_deviation": deviation,
            "extra_strings": len(extra),
        }
    _emit(args, lines, payload)
    return 0


def cmd_resources(args) -> int:
    est = estimate(args.states, args.tape_cells, q_a=args.ancillas)
    total = est.total(args.max_steps)
    config = [
        ("m", args.states), ("n", 2), ("d", 1), ("c", args.tape_cells),
        ("z", args.max_steps), ("q_a", args.ancillas),
    ]
    lines = [_config_line(config)]
    for name, width in est.widths.items():
        lines.append(f"{name} {width}")
    lines.append(f"base {est.base}")
    lines.append(f"total {total}")
    payload = {
        "config": dict(config),
        "widths": est.widths,
        "base": est.base,
        "slope": est.slope,
        "total": total,
    }
    if args.growth_m or args.growth_c:
        m_lo, m_hi = _parse_range(args.growth_m, args.states)
        c_lo, c_hi = _parse_range(args.growth_c, args.tape_cells)
        rows = growth_rows(
            range(m_lo, m_hi + 1), range(c_lo, c_hi + 1), args.max_steps,
            q_a=args.ancillas,
        )
        for row in rows:
            lines.append(f"growth m {row['m']} c {row['c']} qubits {row['qubits']}")
        payload["growth"] = rows
        if args.csv:
            with open(args.csv, "w") as fh:
                fh.write(growth_csv(rows))
            lines.append(f"wrote {args.csv}")
            payload["csv"] = args.csv
    _emit(args, lines, payload)
    return 0


def _parse_range(text: str | None, default: int) -> tuple[int, int]:
    if not text:
        return default, default
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def _add_spec_arguments(parser, include_steps=True) -> None:
    parser.add_argument("-m", "--states", type=int, required=True, help="state count")
    parser.add_argument("-c", "--tape-cells", type=int, required=True, help="tape length")
    if include_steps:
        parser.add_argument("-z", "--max-steps", type=int, required=True, help="step budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctmq",
        description="complexity estimation from exhaustive Turing machine censuses",
    )
    parser.add_argument("--version", action="version", version=f"ctmq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="number of programs of a universe")
    p.add_argument("-m", "--states", type=int, required=True)
    p.add_argument("-n", "--symbols", type=int, default=2)
    p.add_argument("-d", "--dimension", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("enumerate", help="run a census and save the table")
    _add_spec_arguments(p)
    p.add_argument("-o", "--output", required=True, help="table file to write")
    p.add_argument("--jsonl", help="also export the table as JSON lines")
    p.add_argument("--workers", type=int, default=0,
                   help="worker processes (default: CTMQ_WORKERS or 1)")
    p.add_argument("--checkpoint", help="shard checkpoint file for resumable runs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("ctm", help="look up d and ctm values in a table")
    p.add_argument("-t", "--table", required=True)
    p.add_argument("strings", nargs="+", metavar="STRING")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ctm)

    p = sub.add_parser("bdm", help="block-decomposition complexity of a long string")
    p.add_argument("-t", "--table", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("string", nargs="?", help="binary string")
    group.add_argument("--input-file", help="file holding one binary string")
    p.add_argument("--block", type=int, help="block size (must match the table)")
    p.add_argument("--mode", choices=("partition", "sliding"), default="partition")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--multiplicity", action="store_true")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bdm)

    p = sub.add_parser("qsim", help="simulate all machines in superposition")
    _add_spec_arguments(p)
    p.add_argument("--stage-steps", type=int, default=0,
                   help="history capacity per stage (default: whole run)")
    p.add_argument("--backend", choices=("permutation", "statevector"),
                   default="permutation")
    p.add_argument("--top", type=int, default=0, help="show only the top N strings")
    p.add_argument("--verify", action="store_true",
                   help="cross-check against the classical census")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_qsim)

    p = sub.add_parser("resources", help="qubit budget of the circuit")
    _add_spec_arguments(p)
    p.add_argument("--ancillas", type=int, default=0)
    p.add_argument("--growth-m", help="state range LO:HI for a growth table")
    p.add_argument("--growth-c", help="tape range LO:HI for a growth table")
    p.add_argument("--csv", help="write the growth table as CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_resources)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, StoreError, NotInTableError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
