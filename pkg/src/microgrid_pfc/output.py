"""Trace and summary serialization, plus a generated plotting script."""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .fleet import Mode
from .scenarios import (CASE_ORDER, CASE_TITLES, SCENARIO_ORDER, SCENARIO_TITLES, CaseId, CellResult,
                        RunSummary, ScenarioId)
from .simcore import SimTrace

CSV_COLUMNS = ("t_s", "f_hz", "p_diesel_mw", "p_pv_mw", "p_wind_mw", "p_load_mw", "p_ev_mw",
               "mean_soc", "mode")
_MODE_NAMES = {m.value: m.name.lower() for m in Mode}
_MODE_VALUES = {v: k for k, v in _MODE_NAMES.items()}


class OutputError(OSError):
    pass


def _num(x: float) -> str:
    # shortest repr that round-trips exactly
    return repr(float(x))


def write_trace_csv(trace: SimTrace, path: str | Path) -> Path:
    """One header line then one line per sample; values round-trip exactly."""
    path = Path(path)
    f_hz = trace.f_hz
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for k in range(len(trace)):
                w.writerow((_num(trace.t_s[k]), _num(f_hz[k]), _num(trace.p_diesel_mw[k]),
                            _num(trace.p_pv_mw[k]), _num(trace.p_wind_mw[k]), _num(trace.p_load_mw[k]),
                            _num(trace.p_ev_mw[k]), _num(trace.mean_soc[k]),
                            _MODE_NAMES[int(trace.mode[k])]))
    except OSError as exc:
        raise OutputError(f"cannot write trace {path}: {exc.strerror}") from exc
    return path


def read_trace_csv(path: str | Path, f_nom_hz: float = 50.0) -> SimTrace:
    """Inverse of :func:`write_trace_csv` (wind speed and SE% are not stored: NaN)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected header")
    body = rows[1:]
    col = lambda j: np.array([float(r[j]) for r in body])   # noqa: E731
    n = len(body)
    return SimTrace(t_s=col(0), delta_f_hz=col(1) - f_nom_hz, p_diesel_mw=col(2), p_pv_mw=col(3),
                    p_wind_mw=col(4), p_load_mw=col(5), p_ev_mw=col(6), mean_soc=col(7),
                    mode=np.array([_MODE_VALUES[r[8]] for r in body], dtype=np.int8),
                    wind_speed_m_s=np.full(n, np.nan), se_percent=np.full(n, np.nan),
                    f_nom_hz=f_nom_hz)


def batch_to_json(cells: list[CellResult]) -> dict:
    return {"cells": [{"scenario": c.scenario.value, "case": c.case.value,
                       "summary": c.summary.to_dict() if c.summary else None,
                       "error": c.error} for c in cells]}


def _nan_to_none(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


def summaries_from_json(doc: dict) -> dict[tuple[str, str], dict]:
    return {(c["scenario"], c["case"]): c for c in doc["cells"]}


def format_summary_table(cells: list[CellResult]) -> str:
    """Frequency min/max per scenario with one column per case; failed cells read ERROR."""
    by_key = {(c.scenario, c.case): c for c in cells}
    width = 12
    lines = []
    for sid in SCENARIO_ORDER:
        if not any((sid, cid) in by_key for cid in CASE_ORDER):
            continue
        lines.append(SCENARIO_TITLES[sid])
        lines.append(f"{'':<22}" + "".join(f"{CASE_TITLES[c]:>{width}}" for c in CASE_ORDER))
        for label, attr in (("Frequency Min (Hz)", "f_min_hz"), ("Frequency Max (Hz)", "f_max_hz"),
                            ("Max |df| (Hz)", "max_abs_dev_hz")):
            row = f"{label:<22}"
            for cid in CASE_ORDER:
                c = by_key.get((sid, cid))
                if c is None:
                    row += f"{'-':>{width}}"
                elif c.error is not None or c.summary is None:
                    row += f"{'ERROR':>{width}}"
                else:
                    row += f"{getattr(c.summary, attr):>{width}.4f}"
            lines.append(row)
        lines.append("")
    errors = [c for c in cells if c.error]
    for c in errors:
        lines.append(f"ERROR {c.scenario.value}/{c.case.value}: {c.error}")
    return "\n".join(lines).rstrip() + "\n"


def write_summary(cells: list[CellResult], path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.json`` and ``<path>.txt``; ``path`` is taken without suffix."""
    base = Path(path)
    if base.suffix in (".json", ".txt"):
        base = base.with_suffix("")
    jpath, tpath = base.with_suffix(".json"), base.with_suffix(".txt")
    try:
        jpath.write_text(json.dumps(_nan_to_none(batch_to_json(cells)), indent=2, sort_keys=True) + "\n")
        tpath.write_text(format_summary_table(cells))
    except OSError as exc:
        raise OutputError(f"cannot write summary {base}: {exc.strerror}") from exc
    return jpath, tpath


def load_summary_json(path: str | Path) -> list[CellResult]:
    doc = json.loads(Path(path).read_text())
    out = []
    for c in doc["cells"]:
        s = c["summary"]
        if s is not None and s.get("final_mean_soc") is None:
            s = dict(s, final_mean_soc=math.nan)
        out.append(CellResult(ScenarioId(c["scenario"]), CaseId(c["case"]),
                              RunSummary.from_dict(s) if s else None, c["error"]))
    return out


_PLOT_HEADER = '''"""Frequency overlays, one figure per scenario and one line per case."""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
'''

_PLOT_BODY = '''

for scenario, series in SCENARIOS.items():
    fig, ax = plt.subplots(figsize=(9, 4))
    for label, rel in series:
        data = np.genfromtxt(HERE / rel, delimiter=",", names=True, usecols=(0, 1))
        ax.plot(data["t_s"], data["f_hz"], label=label, lw=0.8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("frequency [Hz]")
    ax.set_title(scenario)
    ax.legend()
    fig.tight_layout()
    fig.savefig(HERE / f"{scenario}_frequency.png", dpi=150)
    plt.close(fig)
'''


def emit_plot_script(traces: dict[str, list[tuple[str, str | Path]]], out_path: str | Path) -> Path:
    """Write a matplotlib script plotting ``{scenario: [(label, csv_path), ...]}``.

    CSV paths are referenced relative to the script. Missing files are left
    out of the plot and listed in a comment.
    """
    if not traces or not any(traces.values()):
        raise ValueError("no traces to plot")
    out_path = Path(out_path)
    root = out_path.resolve().parent
    present: dict[str, list[tuple[str, str]]] = {}
    missing = []
    for scenario, series in traces.items():
        for label, p in series:
            p = Path(p)
            rel = os.path.relpath(p.resolve(), root)
            if p.exists():
                present.setdefault(scenario, []).append((label, rel))
            else:
                missing.append(f"{scenario}: {label} ({rel})")
    lines = [_PLOT_HEADER]
    for m in missing:
        lines.append(f"# missing trace, not plotted: {m}")
    lines.append("SCENARIOS = {")
    for scenario, series in present.items():
        lines.append(f"    {scenario!r}: [")
        for label, rel in series:
            lines.append(f"        ({label!r}, {rel!r}),")
        lines.append("    ],")
    lines.append("}")
    try:
        out_path.write_text("\n".join(lines) + _PLOT_BODY)
    except OSError as exc:
        raise OutputError(f"cannot write plot script {out_path}: {exc.strerror}") from exc
    return out_path
