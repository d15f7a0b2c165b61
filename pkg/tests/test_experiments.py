import math

import numpy as np
import pytest

from manetsim import bounds, run
from manetsim.core import ParamError
from manetsim.experiments import (
    AXES,
    CSV_COLUMNS,
    GOLDEN,
    MODELS,
    SCENARIOS,
    CellResult,
    ExperimentPlan,
    build_cell_config,
    cell_params,
    cell_predicted_bound,
    cells_from_rows,
    derive_seed,
    fit_scaling,
    load_rows_csv,
    oscillating_chain_table,
    resolve_threads,
    run_sweep,
    splitmix64,
    write_rows_csv,
)

from helpers import fair, line_positions, scripted_cfg, static_cfg


def test_splitmix64_reference_sequence():
    # published outputs for the all-zero initial state
    mask = (1 << 64) - 1
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(GOLDEN) == 0x6E789E6AA1B965F4
    assert splitmix64((2 * GOLDEN) & mask) == 0x06C45D188009454F


def test_derive_seed_chain_and_distinctness():
    h = splitmix64(42)
    h = splitmix64(h ^ 3)
    h = splitmix64(h ^ 7)
    assert derive_seed(42, 3, 7) == h
    seeds = {derive_seed(42, ci, t) for ci in range(4) for t in range(25)}
    assert len(seeds) == 100


def test_oscillating_chain_geometry():
    table = oscillating_chain_table(6, 1.0)
    assert table.positions.shape == (2, 6, 2)
    assert table.active.all()
    bent, straight = table.positions
    assert np.allclose(bent[:, 0], 0.8 * np.arange(6))
    assert np.allclose(bent[:, 1], [0.0, 0.61] * 3)
    assert np.allclose(straight[:, 1], 0.0)
    # the bend pushes every neighbor pair just past radio range
    diag = math.hypot(0.8, 0.61)
    assert diag > 1.0
    for i in range(5):
        assert math.dist(bent[i], bent[i + 1]) == pytest.approx(diag)
        assert math.dist(straight[i], straight[i + 1]) == pytest.approx(0.8)
    # the lateral hop itself stays legal for v_max >= 0.61 r
    assert np.abs(bent - straight).max() == pytest.approx(0.61)
    with pytest.raises(ParamError):
        oscillating_chain_table(1, 1.0)


def test_scenario_registry():
    assert set(SCENARIOS) == {"oscillating-chain"}
    assert AXES == ("n", "alpha", "beta", "kind")


def base_plan(**kw):
    cfg = static_cfg(line_positions(3, 0.5), fair(0.6), max_slots=40, seed=5)
    defaults = dict(base=cfg, sweep={}, trials=3)
    defaults.update(kw)
    return ExperimentPlan(**defaults)


@pytest.mark.parametrize("bad", [
    dict(sweep={"gamma": (1,)}),
    dict(sweep={"n": ()}),
    dict(sweep={"kind": ("unheard-of",)}),
    dict(sweep={"n": (3.5,)}),
    dict(trials=0),
    dict(trials=2.0),
    dict(repetition_factor=0.0),
    dict(repetition_factor=float("inf")),
])
def test_plan_validation_rejects(bad):
    with pytest.raises(ParamError):
        base_plan(**bad).validate()


def test_plan_accepts_scenario_and_adversary_kinds():
    base_plan(sweep={"kind": ("oscillating-chain", "static")}).validate()


def test_cells_cartesian_order_n_slowest():
    plan = base_plan(sweep={"alpha": (0, 1), "n": (4, 8)})
    assert plan.cells() == [
        {"n": 4, "alpha": 0},
        {"n": 4, "alpha": 1},
        {"n": 8, "alpha": 0},
        {"n": 8, "alpha": 1},
    ]


def test_cell_params_defaults_from_base():
    plan = base_plan()
    assert cell_params(plan, {"n": 7}) == {
        "kind": "static", "n": 7, "alpha": 0, "beta": 1,
    }


def test_plan_json_round_trip():
    plan = base_plan(sweep={"n": (4, 8), "kind": ("oscillating-chain",)},
                     repetition_factor=2.5)
    again = ExperimentPlan.from_json(plan.to_json())
    assert again.sweep == plan.sweep
    assert again.trials == plan.trials
    assert again.repetition_factor == 2.5
    with pytest.raises(ParamError):
        ExperimentPlan.from_json({"trials": 1})


def test_build_cell_config_scenario_rebuilds_table():
    plan = base_plan(sweep={"n": (4, 6), "kind": ("oscillating-chain",)})
    cfg = build_cell_config(plan, {"n": 6, "kind": "oscillating-chain"}, seed=77)
    assert cfg.n == 6 and cfg.seed == 77
    assert cfg.adversary.kind == "scripted"
    assert cfg.adversary.cycle
    assert cfg.adversary.table.positions.shape == (2, 6, 2)
    cfg.validate()


def test_build_cell_config_without_kind_keeps_adversary():
    plan = base_plan(sweep={"alpha": (0, 2)})
    cfg = build_cell_config(plan, {"alpha": 2}, seed=9)
    assert cfg.adversary is plan.base.adversary
    assert cfg.alpha == 2 and cfg.n == plan.base.n


def test_cell_predicted_bound_dispatch():
    geo = cell_predicted_bound({"kind": "geocast-fair", "n": 50, "alpha": 4, "beta": 1})
    assert geo == pytest.approx(bounds.geocast_lb("fair", 50, 4))
    plain = cell_predicted_bound({"kind": "static", "n": 16, "alpha": 1, "beta": 1})
    assert plain == pytest.approx(bounds.ub_budget(16, 1, 1))
    assert math.isnan(cell_predicted_bound({"kind": "static", "n": 2, "alpha": 0, "beta": 1}))
    assert math.isnan(cell_predicted_bound({"kind": "geocast-fair", "n": 24, "alpha": 4, "beta": 1}))


SAMPLE_ROWS = [
    {"kind": "static", "n": 3, "alpha": 0, "beta": 1, "trial": 0, "seed": 11,
     "solved": True, "solve_slot": 4, "covered_count": 3, "audit_ok": True,
     "predicted_bound": 12.5},
    {"kind": "static", "n": 3, "alpha": 0, "beta": 1, "trial": 1, "seed": 12,
     "solved": False, "solve_slot": None, "covered_count": 2, "audit_ok": False,
     "predicted_bound": 12.5},
]


def test_csv_round_trip(tmp_path):
    path = str(tmp_path / "rows.csv")
    write_rows_csv(SAMPLE_ROWS, path)
    assert load_rows_csv(path) == SAMPLE_ROWS


@pytest.mark.parametrize("mangle", [
    lambda lines: ["bogus,header"] + lines[1:],
    lambda lines: lines[:1] + [lines[1].rsplit(",", 1)[0]],
    lambda lines: lines[:1] + [lines[1].replace("true", "True")],
    lambda lines: lines[:1] + [lines[1].replace("static,3", "static,x")],
])
def test_csv_rejects_malformed(tmp_path, mangle):
    path = str(tmp_path / "rows.csv")
    write_rows_csv(SAMPLE_ROWS[:1], path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(mangle(lines)) + "\n")
    with pytest.raises(ParamError):
        load_rows_csv(path)


def test_run_sweep_single_cell_matches_direct_run():
    plan = base_plan()
    outcome = run_sweep(plan, threads=1, keep_trials=2)
    assert [r["trial"] for r in outcome.rows] == [0, 1, 2]
    assert [r["seed"] for r in outcome.rows] == [derive_seed(5, 0, t) for t in range(3)]

    direct = run(build_cell_config(plan, {}, derive_seed(5, 0, 0)))
    assert outcome.rows[0]["solved"] == direct.solved
    assert outcome.rows[0]["solve_slot"] == direct.solve_slot
    assert outcome.rows[0]["covered_count"] == direct.covered_count

    assert set(outcome.kept) == {(0, 0), (0, 1)}
    assert outcome.kept[(0, 0)].solve_slot == outcome.rows[0]["solve_slot"]

    (cell,) = outcome.cells
    assert cell.trials == 3
    assert cell.valid
    assert cell.predicted_bound == pytest.approx(bounds.ub_budget(3, 0, 1))


def test_run_sweep_deterministic_and_thread_invariant(tmp_path):
    p1 = str(tmp_path / "a.csv")
    p2 = str(tmp_path / "b.csv")
    plan = base_plan(sweep={"n": (3, 4), "kind": ("oscillating-chain",)}, trials=2)
    run_sweep(plan, out=p1, threads=1)
    run_sweep(plan, out=p2, threads=2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_run_sweep_writes_to_plan_out(tmp_path):
    path = str(tmp_path / "planned.csv")
    plan = base_plan(out=path)
    outcome = run_sweep(plan)
    assert load_rows_csv(path) == outcome.rows


def test_failing_audit_marks_cell_invalid():
    # two nodes parked three radii apart can never satisfy the audit
    rows = [([(0.0, 0.0), (3.0, 0.0)], [True, True])]
    cfg = scripted_cfg(rows, fair(0.5), cycle=True, max_slots=4, seed=1)
    outcome = run_sweep(ExperimentPlan(base=cfg, sweep={}, trials=2), threads=1)
    (cell,) = outcome.cells
    assert cell.audit_pass_rate == 0.0
    assert not cell.valid
    assert cell.solved_count == 0
    assert cell.mean_solve is None and cell.median_solve is None


def test_cells_from_rows_statistics():
    rows = [
        dict(SAMPLE_ROWS[0]),
        dict(SAMPLE_ROWS[0], trial=1, solve_slot=8),
        dict(SAMPLE_ROWS[0], trial=2, solved=False, solve_slot=None),
        dict(SAMPLE_ROWS[0], n=5, trial=0, solve_slot=6),
    ]
    first, second = cells_from_rows(rows)
    assert first.params["n"] == 3 and second.params["n"] == 5
    assert first.trials == 3 and first.solved_count == 2
    assert first.mean_solve == pytest.approx(6.0)
    assert first.median_solve == pytest.approx(6.0)
    assert first.audit_pass_rate == 1.0
    rate, interval = bounds.estimate_probability(2, 3)
    assert first.success_rate == rate and first.success_interval == interval
    assert second.median_solve == 6.0


def make_cell(n, median, alpha=1):
    return CellResult(
        params={"kind": "static", "n": n, "alpha": alpha, "beta": 1},
        trials=10, solved_count=10 if median is not None else 0,
        success_rate=1.0, success_interval=(0.7, 1.0),
        mean_solve=median, median_solve=median,
        audit_pass_rate=1.0, predicted_bound=float("nan"),
    )


def test_fit_scaling_recovers_exact_coefficients():
    cells = [make_cell(n, 2.0 * n * n / math.log(n)) for n in (8, 16, 32)]
    a, resid = fit_scaling(cells, "n2_over_logn")
    assert a == pytest.approx(2.0)
    assert resid == pytest.approx(0.0, abs=1e-12)

    lin = [make_cell(n, 3.0 * n, alpha=1) for n in (8, 16, 32)]
    a, resid = fit_scaling(lin, "alpha_n")
    assert a == pytest.approx(3.0)
    assert resid == pytest.approx(0.0, abs=1e-12)


def test_fit_scaling_skips_unsolved_and_needs_three_n():
    cells = [make_cell(n, 2.0 * n * n / math.log(n)) for n in (8, 16, 32)]
    a, _ = fit_scaling(cells + [make_cell(64, None)], "n2_over_logn")
    assert a == pytest.approx(2.0)
    with pytest.raises(ParamError):
        fit_scaling(cells[:2], "n2_over_logn")
    with pytest.raises(ParamError):
        fit_scaling(cells, "cubic")
    assert set(MODELS) == {"n2_over_logn", "alpha_n"}


def test_resolve_threads(monkeypatch):
    assert resolve_threads(3) == 3
    monkeypatch.setenv("TOOL_THREADS", "2")
    assert resolve_threads() == 2
    monkeypatch.setenv("TOOL_THREADS", "soon")
    with pytest.raises(ParamError):
        resolve_threads()
    with pytest.raises(ParamError):
        resolve_threads(0)


def test_csv_columns_frozen():
    assert CSV_COLUMNS == ("kind", "n", "alpha", "beta", "trial", "seed",
                          "solved", "solve_slot", "covered_count", "audit_ok",
                          "predicted_bound")
