"""Slot loop driving a full run: adversary placement, activation events,
motion checking, protocol draws, collision resolution, and bookkeeping.

Slot t runs as: the adversary plans positions and activation events from the
previous end-of-slot state, events fire at the boundary, step counters of
active nodes advance, motion is validated against the speed and overlap
rules, informed nodes draw their transmission decisions, the collision
channel resolves, and coverage flags update. The source holds the message
from the end of slot 1, so its first transmission happens in slot 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .adversaries import make_adversary
from .channel import resolve_slot
from .connectivity import AuditReport, audit_alpha_beta
from .core import (
    GeometryError,
    MotionError,
    SimConfig,
    Trace,
    WorldState,
    apply_activation,
    validate_motion,
)
from .protocols import decide_transmissions, uniform_fair_prob

SOURCE = 1


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent protocol and adversary generators from one run seed."""
    proto_ss, adv_ss = np.random.SeedSequence(seed).spawn(2)
    return (
        np.random.Generator(np.random.Philox(proto_ss)),
        np.random.Generator(np.random.Philox(adv_ss)),
    )


def resolved_fair_prob(cfg: SimConfig) -> float | None:
    """The common per-slot probability of a fair-uniform run, else None."""
    if cfg.protocol.kind != "fair-uniform":
        return None
    if cfg.protocol.p is not None:
        return float(cfg.protocol.p)
    return uniform_fair_prob(cfg.n)


def target_set(cfg: SimConfig, first_world: WorldState) -> frozenset[int]:
    """Nodes that must end up covered, frozen at the first slot.

    all-nodes targets everyone. geocast targets the nodes active in the
    first slot within d (inclusive) of the source's first-slot position.
    """
    if cfg.predicate == "all-nodes":
        return frozenset(first_world.ids())
    src = first_world.pos[SOURCE - 1]
    diff = first_world.pos - src
    within = np.einsum("ij,ij->i", diff, diff) <= cfg.d * cfg.d
    mask = within & first_world.active
    return frozenset(int(i) + 1 for i in np.nonzero(mask)[0])


def is_solved(targets: frozenset[int], covered: np.ndarray) -> bool:
    """Every target covered; an empty target set counts as solved."""
    return all(bool(covered[t - 1]) for t in targets)


@dataclass
class RunResult:
    """Everything one run produced, including side-channel diagnostics the
    adversaries emit (slot labels, throttle witnesses, clique membership)."""

    config: SimConfig
    trace: Trace
    solved: bool
    solve_slot: int | None
    covered_count: int
    audit: AuditReport
    seed: int
    slots_executed: int
    targets: frozenset[int]
    slot_labels: tuple[str, ...]
    slot_targets: tuple[int, ...]
    mass_slots: tuple[bool, ...]
    witnesses: tuple[int, ...]
    memberships: tuple[Any, ...]

    def summary(self) -> dict[str, Any]:
        return {
            "n": self.config.n,
            "seed": self.seed,
            "solved": self.solved,
            "solve_slot": self.solve_slot,
            "slots_executed": self.slots_executed,
            "covered_count": self.covered_count,
            "audit_ok": self.audit.ok,
        }


def run(cfg: SimConfig) -> RunResult:
    """Simulate one configured run to solution or the slot budget."""
    cfg.validate()
    proto_rng, adv_rng = rng_streams(cfg.seed)
    adversary = make_adversary(cfg)
    world = adversary.initial_world()
    fair_prob = resolved_fair_prob(cfg)
    max_slots = cfg.resolved_max_slots()
    track = world.histories is not None
    n = cfg.n

    pos_rows = [world.pos]
    active_rows = [world.active]
    covered_rows = [world.covered]
    informed_rows = [world.informed]
    tx_rows = [np.zeros(n, dtype=bool)]
    rx_rows = [np.zeros(n, dtype=np.int32)]
    labels: list[str] = []
    slot_targets: list[int] = []
    mass_slots: list[bool] = []
    witnesses: list[int] = []
    memberships: list[Any] = []

    targets: frozenset[int] = frozenset()
    solved = False
    solve_slot: int | None = None

    for t in range(1, max_slots + 1):
        plan = adversary.step(world, t, fair_prob, adv_rng)
        staged = apply_activation(world, plan.events)
        cur = WorldState(
            pos=plan.positions,
            active=staged.active,
            covered=staged.covered,
            informed=staged.informed,
            local_step=staged.local_step + staged.active,
            slot=t,
            histories=staged.histories,
        )
        violation = validate_motion(world, cur, cfg)
        if violation is not None:
            raise MotionError(
                f"slot {t}: node {violation.node} {violation.reason} violation"
                f" (displacement {violation.displacement:.6g}, v_max {cfg.v_max:.6g})"
            )
        tx = decide_transmissions(cur, cfg.protocol, proto_rng)
        outcome = resolve_slot(cur, tx, cfg.r)

        covered = np.array(cur.covered)
        informed = np.array(cur.informed)
        for receiver in outcome.receptions:
            covered[receiver - 1] = True
            informed[receiver - 1] = True
        if t == 1:
            covered[SOURCE - 1] = True
            if cur.active[SOURCE - 1]:
                informed[SOURCE - 1] = True
        histories = cur.histories
        if track:
            hist = list(histories)
            tx_set = {int(i) for i in tx}
            for idx in np.nonzero(cur.active)[0]:
                hist[idx] += "T" if (idx + 1) in tx_set else "R"
            histories = tuple(hist)
        end = WorldState(
            pos=cur.pos,
            active=cur.active,
            covered=covered,
            informed=informed,
            local_step=cur.local_step,
            slot=t,
            histories=histories,
        )
        problems = adversary.check_geometry(end)
        if problems:
            raise GeometryError(f"slot {t}: " + "; ".join(problems))

        pos_rows.append(end.pos)
        active_rows.append(end.active)
        covered_rows.append(end.covered)
        informed_rows.append(end.informed)
        tx_mask = np.zeros(n, dtype=bool)
        tx_mask[[int(i) - 1 for i in tx]] = True
        tx_rows.append(tx_mask)
        rx_row = np.zeros(n, dtype=np.int32)
        for receiver, sender in outcome.receptions.items():
            rx_row[receiver - 1] = sender
        rx_rows.append(rx_row)
        labels.append(plan.label)
        slot_targets.append(plan.target)
        mass_slots.append(plan.mass)
        witnesses.append(plan.witness)
        memberships.append(None if plan.membership is None else plan.membership.copy())

        if t == 1:
            targets = target_set(cfg, end)
        world = end
        if is_solved(targets, end.covered):
            solved = True
            solve_slot = t
            break

    trace = Trace(
        config=cfg,
        pos=np.stack(pos_rows),
        active=np.stack(active_rows),
        covered=np.stack(covered_rows),
        informed=np.stack(informed_rows),
        tx=np.stack(tx_rows),
        rx_from=np.stack(rx_rows),
        t1=1,
        solved_slot=solve_slot,
    )
    audit = audit_alpha_beta(trace, cfg.alpha, cfg.beta)
    return RunResult(
        config=cfg,
        trace=trace,
        solved=solved,
        solve_slot=solve_slot,
        covered_count=int(world.covered.sum()),
        audit=audit,
        seed=cfg.seed,
        slots_executed=len(labels),
        targets=targets,
        slot_labels=tuple(labels),
        slot_targets=tuple(slot_targets),
        mass_slots=tuple(mass_slots),
        witnesses=tuple(witnesses),
        memberships=tuple(memberships),
    )
