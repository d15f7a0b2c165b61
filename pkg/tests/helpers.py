"""Shared fixtures-in-code: config builders, definitional oracles, and
run-invariant checks used by both the unit tests and the acceptance suite."""

import math

import numpy as np

from manetsim import AdversarySpec, ScriptedTable, SimConfig, WorldState
from manetsim.adversaries import (
    CLUSTER_KINDS,
    geocast_geometry_violations,
    stability_geometry_violations,
    xi_cluster,
)
from manetsim.core import Trace
from manetsim.protocols import ProtocolSpec, Schedule


def fair(p=None):
    return ProtocolSpec(kind="fair-uniform", p=p)


def constant_schedules(n, p):
    return {node: Schedule(prefix=(), tail=(float(p),)) for node in range(1, n + 1)}


def oblivious_spec(n, p):
    return ProtocolSpec(kind="oblivious-schedule", schedules=constant_schedules(n, p))


def adaptive_spec(rule, **params):
    return ProtocolSpec(kind="locally-adaptive", rule=rule, params=params)


def line_positions(n, dx):
    return tuple((i * dx, 0.0) for i in range(n))


def static_cfg(positions, protocol, r=1.0, v_max=1.0, alpha=0, beta=1, **kw):
    spec = AdversarySpec(kind="static", positions=tuple(map(tuple, positions)))
    return SimConfig(n=len(positions), r=r, v_max=v_max, alpha=alpha, beta=beta,
                     protocol=protocol, adversary=spec, **kw)


def scripted_cfg(rows, protocol, r=1.0, v_max=1.0, alpha=0, beta=1, cycle=False, **kw):
    """rows: list of (positions, active) per slot, slot 1 first."""
    table_rows = []
    for slot, (pos, act) in enumerate(rows, start=1):
        for node, (p, a) in enumerate(zip(pos, act), start=1):
            table_rows.append((slot, node, p[0], p[1], bool(a)))
    table = ScriptedTable.from_rows(table_rows)
    spec = AdversarySpec(kind="scripted", table=table, cycle=cycle)
    return SimConfig(n=table.n, r=r, v_max=v_max, alpha=alpha, beta=beta,
                     protocol=protocol, adversary=spec, **kw)


def bare_world(positions, active=None, informed=None, covered=None, slot=1):
    n = len(positions)
    act = np.ones(n, bool) if active is None else np.asarray(active, bool)
    inf = np.zeros(n, bool) if informed is None else np.asarray(informed, bool)
    cov = np.array(inf) if covered is None else np.asarray(covered, bool)
    return WorldState(pos=np.asarray(positions, float), active=act, covered=cov,
                      informed=inf, local_step=act.astype(np.int64), slot=slot)


# --- collision channel oracle -------------------------------------------

def brute_resolve(pos, active, tx_ids, r):
    """Definitional reception map: active non-transmitter u hears v exactly
    when v is the only transmitter within r of u (boundary inclusive)."""
    receptions = {}
    n = len(pos)
    for u in range(1, n + 1):
        if not active[u - 1] or u in tx_ids:
            continue
        in_range = [v for v in tx_ids
                    if math.dist(pos[u - 1], pos[v - 1]) <= r]
        if len(in_range) == 1:
            receptions[u] = in_range[0]
    return receptions


# --- connectivity audit oracle ------------------------------------------

def _witness_ok(trace, t_prime, p, q, beta):
    if p == q:
        return False
    if not trace.informed[t_prime, p - 1]:
        return False
    if trace.covered[t_prime - 1, q - 1]:
        return False
    cov = 10 ** 9
    for s in range(trace.n_slots + 1):
        if trace.covered[s, q - 1]:
            cov = s
            break
    stop = min(cov, t_prime + beta - 1, trace.n_slots)
    for s in range(t_prime, stop + 1):
        if not (trace.active[s, p - 1] and trace.active[s, q - 1]):
            return False
        if math.dist(trace.pos[s, p - 1], trace.pos[s, q - 1]) > trace.config.r:
            return False
    return True


def brute_audit(trace, alpha, beta):
    """Quantifier sweep over the connectivity definition, written with plain
    loops so it shares nothing with the windowed production scan."""
    T = trace.n_slots
    t1 = trace.t1
    last = T if trace.solved_slot is None else trace.solved_slot - 1
    n = trace.n
    for t in range(t1, min(last, T) + 1):
        if t + alpha > T:
            continue
        found = any(
            _witness_ok(trace, tp, p, q, beta)
            for tp in range(max(t1, t - beta + 1), min(t + alpha, T) + 1)
            for p in range(1, n + 1)
            for q in range(1, n + 1)
        )
        if not found:
            return False, t
    return True, None


def synthetic_trace(rng, n, T, force_solved=None):
    """Random but internally consistent trace: monotone coverage, informed
    only while covered and active, bounded motion."""
    pos = np.zeros((T + 1, n, 2))
    pos[0] = rng.uniform(0.0, 2.5, size=(n, 2))
    active = np.zeros((T + 1, n), bool)
    covered = np.zeros((T + 1, n), bool)
    informed = np.zeros((T + 1, n), bool)
    act = rng.random(n) < 0.7
    cov = np.zeros(n, bool)
    for t in range(1, T + 1):
        step = rng.uniform(-0.4, 0.4, size=(n, 2))
        pos[t] = np.clip(pos[t - 1] + step, 0.0, 2.5)
        flip = rng.random(n) < 0.15
        act = act ^ flip
        if t == 1:
            cov = cov | (np.arange(n) == 0)
        newly = rng.random(n) < 0.12
        cov = cov | (newly & act)
        active[t] = act
        covered[t] = cov
        informed[t] = cov & act & (rng.random(n) < 0.8)
    solved = force_solved
    if solved is None and rng.random() < 0.3:
        solved = int(rng.integers(1, T + 1))
    cfg = static_cfg(line_positions(n, 0.5), fair(0.5), v_max=1.2)
    return Trace(config=cfg, pos=pos, active=active, covered=covered,
                 informed=informed, tx=np.zeros((T + 1, n), bool),
                 rx_from=np.zeros((T + 1, n), np.int32), solved_slot=solved)


# --- run invariants -------------------------------------------------------

def run_invariant_violations(result, geometry_stride=10):
    """Check one finished run against the cross-cutting invariants.

    Returns a list of violation strings; empty means clean. Geometry rules
    are re-validated from the recorded rows every geometry_stride slots for
    the clustered adversary kinds.
    """
    out = []
    trace = result.trace
    cfg = result.config
    T = trace.n_slots
    for t in range(1, T + 1):
        tx = trace.tx[t]
        if np.any(tx & ~(trace.informed[t] & trace.active[t])):
            out.append(f"slot {t}: transmitter outside informed*active")
        if np.any(trace.covered[t - 1] & ~trace.covered[t]):
            out.append(f"slot {t}: coverage lost")
        disp = np.linalg.norm(trace.pos[t] - trace.pos[t - 1], axis=1)
        if np.any(disp > cfg.v_max + 1e-9):
            out.append(f"slot {t}: speed bound broken ({disp.max():.4f})")
    if cfg.adversary is not None and getattr(cfg.adversary, "kind", None) in CLUSTER_KINDS:
        xi = xi_cluster(cfg)
        check = (stability_geometry_violations
                 if cfg.adversary.kind.startswith("stability")
                 else geocast_geometry_violations)
        for t in range(1, T + 1, geometry_stride):
            membership = result.memberships[t - 1]
            if membership is None:
                continue
            world = trace.world_at(t)
            problems = check(world, membership, cfg, xi)
            out.extend(f"slot {t}: {p}" for p in problems)
    if not result.audit.ok:
        out.append(f"audit violation at slot {result.audit.first_violation_slot}")
    return out
