import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manetsim import SimConfig, WorldState
from manetsim.core import (
    GeometryError,
    MotionError,
    ParamError,
    Point,
    ScheduleError,
    Trace,
    apply_activation,
    distance,
    trace_from_lines,
    trace_to_jsonl,
    validate_motion,
)

from helpers import bare_world, fair, line_positions, static_cfg


def test_distance_matches_hypot():
    assert distance((0.0, 0.0), (3.0, 4.0)) == pytest.approx(5.0)
    assert distance(Point(1.0, 1.0), Point(1.0, 1.0)) == 0.0


def test_world_requires_informed_subset_of_covered():
    with pytest.raises(ParamError):
        WorldState(pos=np.zeros((2, 2)) + [[0, 0], [1, 0]],
                   active=np.array([True, True]),
                   covered=np.array([False, False]),
                   informed=np.array([True, False]),
                   local_step=np.array([1, 1]), slot=1)


def test_world_requires_informed_nodes_active():
    with pytest.raises(ParamError):
        WorldState(pos=np.array([[0.0, 0.0], [1.0, 0.0]]),
                   active=np.array([False, True]),
                   covered=np.array([True, False]),
                   informed=np.array([True, False]),
                   local_step=np.array([0, 1]), slot=1)


def test_world_arrays_are_frozen():
    w = bare_world([(0, 0), (1, 0)])
    with pytest.raises(ValueError):
        w.active[0] = False


def test_initial_world_all_flags_down():
    w = WorldState.initial([(0, 0), (2, 0), (4, 0)])
    assert w.n == 3
    assert list(w.ids()) == [1, 2, 3]
    assert not w.active.any() and not w.covered.any() and not w.informed.any()
    assert w.slot == 0


def test_activation_up_starts_fresh_local_step():
    w = WorldState.initial([(0, 0), (1, 0)], track_histories=True)
    w2 = apply_activation(w, [(1, "up"), (2, "up")])
    assert w2.active.all()
    assert list(w2.local_step) == [0, 0]
    assert w2.histories == ("", "")


def test_activation_down_clears_informed_keeps_covered():
    w = bare_world([(0, 0), (1, 0)], informed=[True, False], covered=[True, True])
    w2 = apply_activation(w, [(1, "down")])
    assert not w2.active[0]
    assert not w2.informed[0]
    assert w2.covered[0]


def test_activation_up_on_active_is_schedule_error():
    w = bare_world([(0, 0), (1, 0)])
    with pytest.raises(ScheduleError):
        apply_activation(w, [(1, "up")])


def test_activation_down_on_inactive_is_schedule_error():
    w = WorldState.initial([(0, 0), (1, 0)])
    with pytest.raises(ScheduleError):
        apply_activation(w, [(2, "down")])


def test_reactivated_node_is_not_informed():
    w = bare_world([(0, 0), (1, 0)], informed=[True, True])
    down = apply_activation(w, [(2, "down")])
    up = apply_activation(down, [(2, "up")])
    assert up.covered[1]
    assert not up.informed[1]
    assert up.local_step[1] == 0


def _cfg2(v_max=1.0):
    return static_cfg(line_positions(2, 0.5), fair(0.5), v_max=v_max)


def test_motion_speed_bound_is_inclusive():
    cfg = _cfg2(v_max=1.0)
    prev = bare_world([(0.0, 0.0), (5.0, 0.0)])
    nxt = bare_world([(1.0, 0.0), (5.0, 0.0)], slot=2)
    assert validate_motion(prev, nxt, cfg) is None


def test_motion_speed_violation_reports_node_and_magnitude():
    cfg = _cfg2(v_max=1.0)
    prev = bare_world([(0.0, 0.0), (5.0, 0.0)])
    nxt = bare_world([(0.0, 0.0), (5.0, 1.5)], slot=2)
    v = validate_motion(prev, nxt, cfg)
    assert v is not None
    assert v.node == 2
    assert v.reason == "speed"
    assert v.displacement == pytest.approx(1.5)


def test_motion_speed_checked_for_inactive_nodes_too():
    cfg = _cfg2(v_max=0.5)
    prev = bare_world([(0.0, 0.0), (5.0, 0.0)], active=[True, False])
    nxt = bare_world([(0.0, 0.0), (6.0, 0.0)], active=[True, False], slot=2)
    v = validate_motion(prev, nxt, cfg)
    assert v is not None and v.node == 2 and v.reason == "speed"


def test_motion_overlap_only_among_active():
    cfg = _cfg2()
    prev = bare_world([(0.0, 0.0), (0.5, 0.0)], active=[True, False])
    nxt = bare_world([(0.0, 0.0), (0.0, 0.0)], active=[True, False], slot=2)
    assert validate_motion(prev, nxt, cfg) is None


def test_motion_overlap_blames_higher_id():
    cfg = _cfg2()
    prev = bare_world([(0.0, 0.0), (0.5, 0.0)])
    nxt = bare_world([(0.25, 0.0), (0.25, 0.0)], slot=2)
    v = validate_motion(prev, nxt, cfg)
    assert v is not None
    assert v.node == 2
    assert v.reason == "overlap"


def test_simconfig_validate_rejects_bad_fields():
    base = static_cfg(line_positions(3, 0.5), fair(0.5))
    base.validate()
    bad = [
        dict(n=1), dict(r=0.0), dict(v_max=-1.0), dict(alpha=-1),
        dict(beta=0), dict(seed=-3), dict(predicate="everything"),
        dict(predicate="geocast"),  # missing d
        dict(max_slots=0),
    ]
    import dataclasses
    for patch in bad:
        with pytest.raises(ParamError):
            dataclasses.replace(base, **patch).validate()


def test_simconfig_geocast_predicate_needs_d():
    cfg = static_cfg(line_positions(2, 0.5), fair(0.5), predicate="geocast", d=1.5)
    cfg.validate()


def test_resolved_max_slots_explicit_wins():
    cfg = static_cfg(line_positions(4, 0.5), fair(0.5), max_slots=17)
    assert cfg.resolved_max_slots() == 17


def test_resolved_max_slots_small_n_fixed():
    cfg = static_cfg(line_positions(2, 0.5), fair(0.5))
    assert cfg.resolved_max_slots() == 256


def test_resolved_max_slots_uses_budget():
    from manetsim import ub_budget
    cfg = static_cfg(line_positions(16, 0.5), fair(0.5), alpha=1, beta=1)
    assert cfg.resolved_max_slots() == math.ceil(4.0 * ub_budget(16, 1, 1))


def test_simconfig_json_roundtrip():
    cfg = static_cfg(line_positions(3, 0.4), fair(0.25), alpha=2, beta=3,
                     seed=11, d=1.2, predicate="geocast", max_slots=40)
    again = SimConfig.from_json(cfg.to_json())
    assert again.to_json() == cfg.to_json()
    again.validate()


def test_simconfig_from_json_missing_field():
    cfg = static_cfg(line_positions(2, 0.4), fair(0.25))
    obj = cfg.to_json()
    del obj["r"]
    with pytest.raises(ParamError):
        SimConfig.from_json(obj)


@given(st.integers(2, 6), st.integers(1, 9))
def test_trace_jsonl_roundtrip(n, T):
    rng = np.random.default_rng(n * 100 + T)
    from helpers import synthetic_trace
    trace = synthetic_trace(rng, n, T)
    lines = list(trace_to_jsonl(trace))
    back = trace_from_lines(lines)
    assert back.n == n and back.n_slots == T
    assert np.array_equal(back.covered, trace.covered)
    assert np.array_equal(back.active, trace.active)
    assert np.allclose(back.pos, trace.pos)
    assert back.solved_slot == trace.solved_slot
    # serialization is canonical: dumping again yields identical bytes
    assert list(trace_to_jsonl(back)) == lines


def test_trace_accessors():
    rng = np.random.default_rng(5)
    from helpers import synthetic_trace
    trace = synthetic_trace(rng, 3, 4)
    with pytest.raises(ParamError):
        trace.world_at(5)
    w = trace.world_at(2)
    assert w.slot == 2
    assert np.array_equal(w.covered, trace.covered[2])
    assert trace.transmitters_at(0) == ()
    assert trace.receptions_at(0) == {}


def test_error_hierarchy():
    assert issubclass(ParamError, ValueError)
    assert issubclass(ScheduleError, ValueError)
    assert issubclass(MotionError, RuntimeError)
    assert issubclass(GeometryError, RuntimeError)
