"""Experiment matrix runs and the cross-cell comparison table."""

from __future__ import annotations

import csv
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .dec import energy_saving
from .scenario import INFINITE, Scenario, dumps
from .simulation import FogSimulation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cell:
    name: str
    threshold: float
    dec_enabled: bool


TABLE6 = (
    Cell("no-offloading", math.inf, False),
    Cell("no-offloading-dec", math.inf, True),
    Cell("offloading-50", 50.0, False),
    Cell("offloading-50-dec", 50.0, True),
    Cell("offloading-100", 100.0, False),
    Cell("offloading-100-dec", 100.0, True),
    Cell("offloading-200", 200.0, False),
    Cell("offloading-200-dec", 200.0, True),
)


def check_matrix(matrix) -> list[Cell]:
    cells = list(matrix)
    names = [c.name for c in cells]
    if len(set(names)) != len(names):
        raise ValueError("experiment names must be unique")
    return cells


def run_cell(scenario: Scenario, out_dir=None, trace: bool = False, write_tasks: bool = True) -> dict:
    """Run one scenario; write its outputs under ``out_dir`` if given; return the report dict."""
    sim = FogSimulation(scenario, audit=trace, trace=trace, record_power=trace)
    report = sim.run().to_dict()
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        (out / "scenario.json").write_text(dumps(scenario))
        if write_tasks:
            sim.write_tasks(out / "tasks.csv")
        if trace:
            sim.write_trace(out / "trace.csv")
            sim.write_decisions(out / "decisions.csv")
            sim.write_power(out / "power.csv")
    return report


def _run_cell_safe(args) -> tuple[str, dict | None, str | None]:
    cell, base, out_dir, trace, write_tasks = args
    try:
        scenario = base.with_overrides(name=cell.name, offloading_threshold=cell.threshold,
                                       dec_enabled=cell.dec_enabled)
        return cell.name, run_cell(scenario, out_dir, trace, write_tasks), None
    except Exception:  # one failing cell must not abort the sweep
        return cell.name, None, traceback.format_exc()


COMPARISON_COLUMNS = ("threshold", "mean_rtt_loop_A_ms", "mean_rtt_loop_B_ms",
                      "mean_rtt_loop_A_all_ms", "mean_rtt_loop_B_all_ms", "fog_task_count",
                      "fog_energy_no_dec_j", "fog_energy_dec_j", "energy_saving")


def comparison_rows(reports: dict[str, dict]) -> list[dict]:
    """One row per threshold pairing the DEC-off and DEC-on cells."""
    by_threshold: dict[str, dict[bool, dict]] = {}
    for rep in reports.values():
        by_threshold.setdefault(str(rep["offloading_threshold"]), {})[rep["dec_enabled"]] = rep

    def order(label):
        return math.inf if label == INFINITE else float(label)

    rows = []
    for label in sorted(by_threshold, key=lambda k: (order(k) != math.inf, order(k))):
        pair = by_threshold[label]
        base = pair.get(False) or pair.get(True)
        off, on = pair.get(False), pair.get(True)
        rows.append({
            "threshold": label,
            "mean_rtt_loop_A_ms": base["mean_rtt_loop_A"],
            "mean_rtt_loop_B_ms": base["mean_rtt_loop_B"],
            "mean_rtt_loop_A_all_ms": base["mean_rtt_loop_A_all"],
            "mean_rtt_loop_B_all_ms": base["mean_rtt_loop_B_all"],
            "fog_task_count": base["executed_task_count"],
            "fog_energy_no_dec_j": off["fog_energy"] if off else None,
            "fog_energy_dec_j": on["fog_energy"] if on else None,
            "energy_saving": (energy_saving(off["fog_energy"], on["fog_energy"])
                              if off and on else None),
        })
    return rows


def write_comparison(path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COMPARISON_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v))
                        for k, v in row.items()})


def read_comparison(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_experiments(matrix, scenario: Scenario, out_dir=None, jobs: int = 1,
                    trace: bool = False, write_tasks: bool = True):
    """Run every cell of ``matrix`` against ``scenario``.

    Returns ``(reports, rows, failures)``: reports by cell name, comparison
    rows, and tracebacks of failed cells by name.
    """
    cells = check_matrix(matrix)
    out = Path(out_dir) if out_dir is not None else None
    work = [(c, scenario, None if out is None else out / c.name, trace, write_tasks) for c in cells]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_safe, work))
    else:
        results = [_run_cell_safe(w) for w in work]
    reports, failures = {}, {}
    for name, rep, err in results:
        if err is None:
            reports[name] = rep
        else:
            failures[name] = err
            logger.error("cell %s failed:\n%s", name, err)
    rows = comparison_rows(reports)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_comparison(out / "comparison.csv", rows)
    return reports, rows, failures
