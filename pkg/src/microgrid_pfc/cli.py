"""Command-line entry point: ``run``, ``batch`` and ``oracle`` subcommands.

Exit codes: 0 success, 2 configuration error, 3 simulation fault, 4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config
from .output import OutputError, emit_plot_script, write_summary, write_trace_csv
from .scenarios import (CASE_ORDER, CASE_TITLES, SCENARIO_ORDER, CellResult, ScenarioError,
                        build_microgrid, build_scenario, run_cell)

EXIT_OK, EXIT_CONFIG, EXIT_FAULT, EXIT_IO = 0, 2, 3, 4
OUT_ENV = "MICROGRID_PFC_OUT"


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="microgrid-pfc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./out)")
        p.add_argument("--dt", type=float, help="integration step [s]")
        p.add_argument("--duration", type=float, help="horizon [s]")
        p.add_argument("--ev-count", type=int, help="fleet size for the V2G cases")
        p.add_argument("--seed", type=int, help="fleet profile seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any dotted key, e.g. controller.kp=1.2")

    run = sub.add_parser("run", help="one scenario and case")
    run.add_argument("--scenario", help="pv_drop | wind_trip | acm_start")
    run.add_argument("--case", help="v2g_off | ev100 | ev200")
    common(run)
    batch = sub.add_parser("batch", help="all three scenarios under all three cases")
    common(batch)
    sub.add_parser("oracle", help="print the reference values of the hand-derived checks")
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags: dict[str, object] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        k, v = item.split("=", 1)
        flags[k.strip()] = v.strip()
    for attr, key in (("dt", "sim.dt_s"), ("duration", "sim.duration_s"), ("ev_count", "fleet.n_evs"),
                      ("seed", "fleet.seed"), ("scenario", "scenario.id"), ("case", "scenario.case")):
        val = getattr(args, attr, None)
        if val is not None:
            flags[key] = val
    if args.out is not None:
        flags["output.out_dir"] = str(args.out)
    cfg = parse_config(args.config, flags)
    if not cfg.output.out_dir:
        cfg = cfg.with_values({"output.out_dir": os.environ.get(OUT_ENV, "out")})
    return cfg


def _write_cell(cell: CellResult, out: Path) -> Path | None:
    if cell.result is None:
        return None
    path = out / f"trace_{cell.scenario.value}_{cell.case.value}.csv"
    write_trace_csv(cell.result.trace, path)
    return path


def _report(cells: list[CellResult], out: Path) -> int:
    traces: dict[str, list] = {}
    for cell in cells:
        p = _write_cell(cell, out)
        if p is not None:
            traces.setdefault(cell.scenario.value, []).append((CASE_TITLES[cell.case], p))
    jpath, tpath = write_summary(cells, out / "summary")
    if traces:
        emit_plot_script(traces, out / "plot_frequency.py")
    sys.stdout.write(tpath.read_text())
    return EXIT_FAULT if any(c.error for c in cells) else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "oracle":
        from .oracles import derived_examples
        for label, value in derived_examples():
            print(f"{label}: {value!r}")
        return EXIT_OK
    try:
        cfg = resolve_config(args)
        out = Path(cfg.output.out_dir)
        pairs = ([(cfg.scenario.id, cfg.scenario.case)] if args.command == "run"
                 else [(s.value, c.value) for s in SCENARIO_ORDER for c in CASE_ORDER])
        # surface configuration problems before any simulation starts
        for sid, cid in pairs:
            build_microgrid(build_scenario(sid, cid, cfg))
        cells = [run_cell(sid, cid, cfg) for sid, cid in pairs]
        out.mkdir(parents=True, exist_ok=True)
        code = _report(cells, out)
        for c in cells:
            if c.error:
                print(f"simulation fault in {c.scenario.value}/{c.case.value}: {c.error}", file=sys.stderr)
        return code
    except (ConfigError, ScenarioError, ValueError) as exc:     # ValueError: bad profile/roster file
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OutputError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

