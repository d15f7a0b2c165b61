"""Seeded sweep harness: cartesian parameter grids, per-trial derived seeds,
concurrent execution, CSV emission, and scaling fits against the closed-form
budgets.

Trial seeds come from a splitmix64 chain over (base seed, cell index, trial
index), so a sweep is reproducible run to run and independent of scheduling.
"""

from __future__ import annotations

import csv
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from . import bounds
from .adversaries import KINDS, AdversarySpec, ScriptedTable
from .core import ParamError, SimConfig
from .engine import RunResult, run

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1

CSV_COLUMNS = (
    "kind",
    "n",
    "alpha",
    "beta",
    "trial",
    "seed",
    "solved",
    "solve_slot",
    "covered_count",
    "audit_ok",
    "predicted_bound",
)

AXES = ("n", "alpha", "beta", "kind")


def splitmix64(x: int) -> int:
    """One splitmix64 step: 64-bit state advance plus output mix."""
    x = (x + GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(base_seed: int, cell_index: int, trial: int) -> int:
    """Deterministic per-trial seed from (base seed, cell, trial)."""
    h = splitmix64(base_seed & _MASK)
    h = splitmix64(h ^ (cell_index & _MASK))
    h = splitmix64(h ^ (trial & _MASK))
    return h


def oscillating_chain_table(n: int, r: float) -> ScriptedTable:
    """Two-row cyclic chain scenario.

    Nodes sit 0.8 r apart on a line. Odd slots bend every other node 0.61 r
    off the line, which stretches the diagonals past r and cuts every link;
    even slots re-align the chain so neighbors reconnect. The lateral move
    is a legal hop whenever v_max >= 0.61 r, and each odd slot is witnessed
    by the aligned slot right after it.
    """
    if n < 2:
        raise ParamError("the chain scenario needs n >= 2")
    xs = 0.8 * r * np.arange(n, dtype=np.float64)
    bend = np.where(np.arange(n) % 2 == 1, 0.61 * r, 0.0)
    shifted = np.stack([xs, bend], axis=1)
    aligned = np.stack([xs, np.zeros(n)], axis=1)
    return ScriptedTable(
        positions=np.stack([shifted, aligned]),
        active=np.ones((2, n), dtype=bool),
    )


def _oscillating_chain_spec(n: int, base: SimConfig) -> AdversarySpec:
    return AdversarySpec(kind="scripted", cycle=True, table=oscillating_chain_table(n, base.r))


# named scenario builders usable as sweep kind values, keyed by name;
# each maps (n, base config) to a concrete adversary spec
SCENARIOS: dict[str, Callable[[int, SimConfig], AdversarySpec]] = {
    "oscillating-chain": _oscillating_chain_spec,
}


@dataclass(frozen=True)
class ExperimentPlan:
    """A batch of runs: base config, swept axes, trials per cell.

    repetition_factor is the analyst's repetition knob for stability
    experiments; it is recorded with the plan and does not change the
    simulated runs or the predicted bounds.
    """

    base: SimConfig
    sweep: dict[str, tuple[Any, ...]]
    trials: int
    repetition_factor: float = 1.0
    out: str | None = None

    def validate(self) -> "ExperimentPlan":
        self.base.protocol.validate(self.base.n)
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ParamError("trials must be a positive integer")
        if not (math.isfinite(self.repetition_factor) and self.repetition_factor > 0):
            raise ParamError("repetition_factor must be positive and finite")
        for axis, values in self.sweep.items():
            if axis not in AXES:
                raise ParamError(f"unknown sweep axis {axis!r}")
            if len(values) == 0:
                raise ParamError(f"sweep axis {axis!r} is empty")
            if axis == "kind":
                for v in values:
                    if v not in KINDS and v not in SCENARIOS:
                        raise ParamError(f"unknown kind value {v!r}")
            else:
                for v in values:
                    if not isinstance(v, int):
                        raise ParamError(f"sweep axis {axis!r} takes integers")
        return self

    def cells(self) -> list[dict[str, Any]]:
        """Cartesian product of the swept axes, n varying slowest."""
        out: list[dict[str, Any]] = [{}]
        for axis in AXES:
            if axis in self.sweep:
                out = [dict(c, **{axis: v}) for c in out for v in self.sweep[axis]]
        return out

    def to_json(self) -> dict[str, Any]:
        obj: dict[str, Any] = {
            "base": self.base.to_json(),
            "sweep": {axis: list(values) for axis, values in self.sweep.items()},
            "trials": self.trials,
            "repetition_factor": self.repetition_factor,
        }
        if self.out is not None:
            obj["out"] = self.out
        return obj

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "ExperimentPlan":
        try:
            base = SimConfig.from_json(obj["base"])
            raw = obj.get("sweep", {})
            sweep = {}
            for axis, values in raw.items():
                if axis == "kind":
                    sweep[axis] = tuple(str(v) for v in values)
                else:
                    sweep[axis] = tuple(int(v) for v in values)
            return ExperimentPlan(
                base=base,
                sweep=sweep,
                trials=int(obj["trials"]),
                repetition_factor=float(obj.get("repetition_factor", 1.0)),
                out=None if obj.get("out") is None else str(obj["out"]),
            ).validate()
        except KeyError as exc:
            raise ParamError(f"plan is missing field {exc.args[0]!r}") from exc
        except ParamError:
            raise
        except (TypeError, ValueError) as exc:
            raise ParamError(f"malformed plan JSON: {exc}") from exc


def cell_params(plan: ExperimentPlan, cell: dict[str, Any]) -> dict[str, Any]:
    """The four identifying parameters of a cell, defaults from the base."""
    base = plan.base
    return {
        "kind": str(cell.get("kind", base.adversary.kind)),
        "n": int(cell.get("n", base.n)),
        "alpha": int(cell.get("alpha", base.alpha)),
        "beta": int(cell.get("beta", base.beta)),
    }


def build_cell_config(plan: ExperimentPlan, cell: dict[str, Any], seed: int) -> SimConfig:
    """Materialize one cell's run config.

    A kind value naming a scenario rebuilds its scripted table for the
    cell's n; a kind naming an adversary keeps the base spec's other
    parameters. Without a kind axis the base adversary is reused as is.
    """
    params = cell_params(plan, cell)
    adv = plan.base.adversary
    if "kind" in cell:
        kind = params["kind"]
        if kind in SCENARIOS:
            adv = SCENARIOS[kind](params["n"], plan.base)
        else:
            adv = replace(adv, kind=kind)
    return replace(
        plan.base,
        n=params["n"],
        alpha=params["alpha"],
        beta=params["beta"],
        seed=seed,
        adversary=adv,
    )


def cell_predicted_bound(params: dict[str, Any]) -> float:
    """Closed-form yardstick for a cell: the matching lower-bound budget for
    geocast adversaries, the dissemination budget otherwise. NaN when the
    bound's preconditions fail."""
    try:
        kind = params["kind"]
        if kind.startswith("geocast-"):
            return bounds.geocast_lb(kind.split("-", 1)[1], params["n"], params["alpha"])
        return bounds.ub_budget(params["n"], params["alpha"], params["beta"])
    except ParamError:
        return float("nan")


@dataclass(frozen=True)
class CellResult:
    """Aggregated outcome of one cell's trials."""

    params: dict[str, Any]
    trials: int
    solved_count: int
    success_rate: float
    success_interval: tuple[float, float]
    mean_solve: float | None
    median_solve: float | None
    audit_pass_rate: float
    predicted_bound: float

    @property
    def valid(self) -> bool:
        return self.audit_pass_rate == 1.0

    def to_json(self) -> dict[str, Any]:
        return {
            "params": dict(self.params),
            "trials": self.trials,
            "solved_count": self.solved_count,
            "success_rate": self.success_rate,
            "success_interval": list(self.success_interval),
            "mean_solve": self.mean_solve,
            "median_solve": self.median_solve,
            "audit_pass_rate": self.audit_pass_rate,
            "predicted_bound": self.predicted_bound,
            "valid": self.valid,
        }


@dataclass
class SweepOutcome:
    """Everything a sweep produced: flat trial rows, per-cell aggregates,
    and any retained full run results."""

    plan: ExperimentPlan
    rows: list[dict[str, Any]]
    cells: list[CellResult]
    kept: dict[tuple[int, int], RunResult] = field(default_factory=dict)


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else TOOL_THREADS, else the machine."""
    if threads is not None:
        value = int(threads)
    elif os.environ.get("TOOL_THREADS"):
        try:
            value = int(os.environ["TOOL_THREADS"])
        except ValueError as exc:
            raise ParamError("TOOL_THREADS must be an integer") from exc
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ParamError("thread count must be >= 1")
    return value


def run_sweep(plan: ExperimentPlan, out: str | None = None, threads: int | None = None,
              keep_trials: int = 0) -> SweepOutcome:
    """Execute every (cell, trial) run and aggregate.

    Runs execute concurrently but rows are assembled in (cell, trial) order,
    so output is deterministic. The CSV goes to `out`, falling back to the
    plan's own output path; no path means no file. keep_trials > 0 retains
    the first few full run results of every cell for deeper inspection.
    """
    plan.validate()
    cells = plan.cells()
    jobs = [(ci, trial) for ci in range(len(cells)) for trial in range(plan.trials)]
    bounds_by_cell = [cell_predicted_bound(cell_params(plan, c)) for c in cells]

    def work(job: tuple[int, int]):
        ci, trial = job
        seed = derive_seed(plan.base.seed, ci, trial)
        cfg = build_cell_config(plan, cells[ci], seed)
        result = run(cfg)
        params = cell_params(plan, cells[ci])
        row = {
            "kind": params["kind"],
            "n": params["n"],
            "alpha": params["alpha"],
            "beta": params["beta"],
            "trial": trial,
            "seed": seed,
            "solved": result.solved,
            "solve_slot": result.solve_slot,
            "covered_count": result.covered_count,
            "audit_ok": result.audit.ok,
            "predicted_bound": bounds_by_cell[ci],
        }
        return ci, trial, row, (result if trial < keep_trials else None)

    rows: list[dict[str, Any]] = []
    kept: dict[tuple[int, int], RunResult] = {}
    workers = resolve_threads(threads)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for ci, trial, row, result in pool.map(work, jobs):
            rows.append(row)
            if result is not None:
                kept[(ci, trial)] = result

    cell_results = cells_from_rows(rows)
    path = out if out is not None else plan.out
    if path is not None:
        write_rows_csv(rows, path)
    return SweepOutcome(plan=plan, rows=rows, cells=cell_results, kept=kept)


def cells_from_rows(rows: list[dict[str, Any]]) -> list[CellResult]:
    """Group flat trial rows into per-cell aggregates, first-seen order."""
    groups: dict[tuple[Any, ...], list[dict[str, Any]]] = {}
    for row in rows:
        key = (row["kind"], row["n"], row["alpha"], row["beta"])
        groups.setdefault(key, []).append(row)
    out: list[CellResult] = []
    for key, group in groups.items():
        solved_slots = [int(r["solve_slot"]) for r in group if r["solved"] and r["solve_slot"] is not None]
        solved_count = sum(1 for r in group if r["solved"])
        rate, interval = bounds.estimate_probability(solved_count, len(group))
        audits = sum(1 for r in group if r["audit_ok"])
        out.append(
            CellResult(
                params={"kind": key[0], "n": key[1], "alpha": key[2], "beta": key[3]},
                trials=len(group),
                solved_count=solved_count,
                success_rate=rate,
                success_interval=interval,
                mean_solve=float(statistics.fmean(solved_slots)) if solved_slots else None,
                median_solve=float(statistics.median(solved_slots)) if solved_slots else None,
                audit_pass_rate=audits / len(group),
                predicted_bound=float(group[0]["predicted_bound"]),
            )
        )
    return out


def write_rows_csv(rows: list[dict[str, Any]], path: str) -> None:
    """Serialize trial rows with the fixed column set."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(_format_row(row))


def _format_row(row: dict[str, Any]) -> list[str]:
    return [
        str(row["kind"]),
        str(int(row["n"])),
        str(int(row["alpha"])),
        str(int(row["beta"])),
        str(int(row["trial"])),
        str(int(row["seed"])),
        "true" if row["solved"] else "false",
        "" if row["solve_slot"] is None else str(int(row["solve_slot"])),
        str(int(row["covered_count"])),
        "true" if row["audit_ok"] else "false",
        repr(float(row["predicted_bound"])),
    ]


def load_rows_csv(path: str) -> list[dict[str, Any]]:
    """Read trial rows back from a sweep CSV."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ParamError(f"sweep CSV must start with header {','.join(CSV_COLUMNS)}")
        rows = []
        for line_no, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_COLUMNS):
                raise ParamError(f"CSV line {line_no} has {len(rec)} fields")
            try:
                rows.append(
                    {
                        "kind": rec[0],
                        "n": int(rec[1]),
                        "alpha": int(rec[2]),
                        "beta": int(rec[3]),
                        "trial": int(rec[4]),
                        "seed": int(rec[5]),
                        "solved": _parse_flag(rec[6]),
                        "solve_slot": None if rec[7] == "" else int(rec[7]),
                        "covered_count": int(rec[8]),
                        "audit_ok": _parse_flag(rec[9]),
                        "predicted_bound": float(rec[10]),
                    }
                )
            except ValueError as exc:
                raise ParamError(f"CSV line {line_no} is malformed: {exc}") from exc
    return rows


def _parse_flag(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"flag field must be true or false, got {text!r}")


# scaling models usable with fit_scaling, keyed by name
MODELS: dict[str, Callable[[dict[str, Any]], float]] = {
    "n2_over_logn": lambda p: p["n"] * p["n"] / math.log(p["n"]),
    "alpha_n": lambda p: p["alpha"] * p["n"],
}


def fit_scaling(cells: list[CellResult], model: str) -> tuple[float, float]:
    """Least-squares coefficient a through the origin for median solve time
    against the chosen model, plus the normalized residual.

    Cells with no solved trials are skipped; at least three distinct n must
    remain.
    """
    fn = MODELS.get(model)
    if fn is None:
        raise ParamError(f"unknown scaling model {model!r}; choose from {sorted(MODELS)}")
    usable = [c for c in cells if c.median_solve is not None]
    distinct_n = {c.params["n"] for c in usable}
    if len(distinct_n) < 3:
        raise ParamError("fit_scaling needs cells with at least 3 distinct n values")
    f = np.asarray([fn(c.params) for c in usable], dtype=np.float64)
    y = np.asarray([c.median_solve for c in usable], dtype=np.float64)
    denom = float(np.dot(f, f))
    if denom == 0.0:
        raise ParamError("model values are all zero; cannot fit")
    a = float(np.dot(f, y) / denom)
    norm_y = float(np.linalg.norm(y))
    residual = 0.0 if norm_y == 0.0 else float(np.linalg.norm(y - a * f) / norm_y)
    return a, residual
