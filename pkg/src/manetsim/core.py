"""Domain types, geometry, and motion legality for the dissemination simulator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

PREDICATES = ("all-nodes", "geocast")


class ParamError(ValueError):
    """A parameter violates a documented precondition."""


class ScheduleError(ValueError):
    """Malformed activation schedule."""


class MotionError(RuntimeError):
    """A run produced an illegal movement."""


class GeometryError(RuntimeError):
    """A scenario script broke its own placement invariant."""


class Point(NamedTuple):
    """A position in the plane."""

    x: float
    y: float


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance between two plane points."""
    return math.hypot(float(a[0]) - float(b[0]), float(a[1]) - float(b[1]))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WorldState:
    """Snapshot of every node for one slot.

    Positions are the locations held during the slot; ``covered`` and
    ``informed`` are end-of-slot values. Node ids are 1-based: array index
    ``i`` belongs to node ``i + 1``. ``local_step`` counts slots since the
    node's latest activation (1 in the activation slot, 0 while inactive).
    ``histories`` records each node's own transmit/receive symbols ("T"/"R",
    one per active slot) and is only populated for runs that need it.
    """

    pos: np.ndarray
    active: np.ndarray
    covered: np.ndarray
    informed: np.ndarray
    local_step: np.ndarray
    slot: int = 0
    histories: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        pos = _frozen(np.asarray(self.pos, dtype=np.float64).copy())
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ParamError("pos must be an (n, 2) array")
        n = pos.shape[0]
        object.__setattr__(self, "pos", pos)
        for name in ("active", "covered", "informed"):
            arr = _frozen(np.asarray(getattr(self, name), dtype=bool).copy())
            if arr.shape != (n,):
                raise ParamError(f"{name} must have shape ({n},)")
            object.__setattr__(self, name, arr)
        steps = _frozen(np.asarray(self.local_step, dtype=np.int64).copy())
        if steps.shape != (n,):
            raise ParamError(f"local_step must have shape ({n},)")
        object.__setattr__(self, "local_step", steps)
        if self.histories is not None:
            hist = tuple(self.histories)
            if len(hist) != n:
                raise ParamError("histories must have one entry per node")
            object.__setattr__(self, "histories", hist)
        # informed implies covered and active; inactive nodes hold no message
        if bool(np.any(self.informed & ~self.covered)):
            raise ParamError("informed nodes must be covered")
        if bool(np.any(self.informed & ~self.active)):
            raise ParamError("informed nodes must be active")
        if bool(np.any(self.active & (steps < 0))):
            raise ParamError("local_step must be non-negative")

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    def ids(self) -> range:
        """All node ids (1-based)."""
        return range(1, self.n + 1)

    @staticmethod
    def initial(pos: Sequence[Sequence[float]], track_histories: bool = False) -> "WorldState":
        """Pre-run world: given positions, everything inactive and uncovered."""
        arr = np.asarray(pos, dtype=np.float64)
        n = arr.shape[0]
        return WorldState(
            pos=arr,
            active=np.zeros(n, dtype=bool),
            covered=np.zeros(n, dtype=bool),
            informed=np.zeros(n, dtype=bool),
            local_step=np.zeros(n, dtype=np.int64),
            slot=0,
            histories=("",) * n if track_histories else None,
        )


def apply_activation(state: WorldState, events: Iterable[tuple[int, str]]) -> WorldState:
    """Apply slot-boundary activation events.

    "down" clears the held message, the step counter, and the history;
    covered status persists across failures. "up" restarts the node with an
    empty history. Raising a node that is already active, or lowering one
    that is already inactive, is a malformed schedule.
    """
    ordered = sorted(events, key=lambda e: e[0])
    if not ordered:
        return state
    active = state.active.copy()
    informed = state.informed.copy()
    steps = state.local_step.copy()
    hist = list(state.histories) if state.histories is not None else None
    seen: set[int] = set()
    for node, kind in ordered:
        if not isinstance(node, (int, np.integer)) or not 1 <= node <= state.n:
            raise ScheduleError(f"activation event for unknown node {node!r}")
        if node in seen:
            raise ScheduleError(f"node {node} has multiple events in one slot")
        seen.add(node)
        idx = node - 1
        if kind == "up":
            if active[idx]:
                raise ScheduleError(f"node {node} raised while already active")
            active[idx] = True
            steps[idx] = 0
            if hist is not None:
                hist[idx] = ""
        elif kind == "down":
            if not active[idx]:
                raise ScheduleError(f"node {node} lowered while already inactive")
            active[idx] = False
            informed[idx] = False
            steps[idx] = 0
            if hist is not None:
                hist[idx] = ""
        else:
            raise ScheduleError(f"unknown activation event kind {kind!r}")
    return WorldState(
        pos=state.pos,
        active=active,
        covered=state.covered,
        informed=informed,
        local_step=steps,
        slot=state.slot,
        histories=tuple(hist) if hist is not None else None,
    )


@dataclass(frozen=True)
class MotionViolation:
    """First illegal movement found between two consecutive slots."""

    node: int
    displacement: float
    reason: str  # "speed" or "overlap"


def validate_motion(prev: WorldState, nxt: WorldState, cfg: "SimConfig") -> MotionViolation | None:
    """Check one slot transition: per-node displacement is at most v_max
    (boundary inclusive) and active nodes occupy pairwise distinct points.

    Returns None when legal, else the violation for the first offending node
    in id order. For a position clash the higher id of the pair offends.
    """
    if prev.n != nxt.n:
        raise ParamError("world size changed between slots")
    disp = np.linalg.norm(nxt.pos - prev.pos, axis=1)
    offenders: dict[int, str] = {}
    for idx in np.nonzero(disp > cfg.v_max)[0]:
        offenders[int(idx)] = "speed"
    act = np.nonzero(nxt.active)[0]
    if act.size > 1:
        pts = nxt.pos[act]
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        sorted_pts = pts[order]
        same = np.all(sorted_pts[1:] == sorted_pts[:-1], axis=1)
        for j in np.nonzero(same)[0]:
            a, b = int(act[order[j]]), int(act[order[j + 1]])
            offenders.setdefault(max(a, b), "overlap")
    if not offenders:
        return None
    idx = min(offenders)
    return MotionViolation(node=idx + 1, displacement=float(disp[idx]), reason=offenders[idx])


@dataclass(frozen=True)
class SimConfig:
    """Full description of one run.

    d is the coverage radius for the "geocast" predicate (targets are the
    nodes active in the first slot within d of the source's first-slot
    position); "all-nodes" ignores d and targets everyone.
    """

    n: int
    r: float
    v_max: float
    alpha: int
    beta: int
    protocol: Any
    adversary: Any
    seed: int = 0
    d: float | None = None
    predicate: str = "all-nodes"
    max_slots: int | None = None

    def validate(self) -> "SimConfig":
        if not isinstance(self.n, int) or self.n < 2:
            raise ParamError("n must be an integer >= 2")
        if not (math.isfinite(self.r) and self.r > 0):
            raise ParamError("r must be positive and finite")
        if not (math.isfinite(self.v_max) and self.v_max > 0):
            raise ParamError("v_max must be positive and finite")
        if not isinstance(self.alpha, int) or self.alpha < 0:
            raise ParamError("alpha must be an integer >= 0")
        if not isinstance(self.beta, int) or self.beta < 1:
            raise ParamError("beta must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ParamError("seed must be a non-negative integer")
        if self.predicate not in PREDICATES:
            raise ParamError(f"predicate must be one of {PREDICATES}")
        if self.d is not None and not (math.isfinite(self.d) and self.d > 0):
            raise ParamError("d must be positive and finite when given")
        if self.predicate == "geocast" and self.d is None:
            raise ParamError("the geocast predicate requires d")
        if self.max_slots is not None and (not isinstance(self.max_slots, int) or self.max_slots < 1):
            raise ParamError("max_slots must be a positive integer when given")
        self.protocol.validate(self.n)
        self.adversary.validate(self)
        return self

    def resolved_max_slots(self) -> int:
        """Budget actually simulated: explicit max_slots, else four times the
        dissemination budget bound (fixed 256 for n <= 2 where the bound's
        precondition fails)."""
        if self.max_slots is not None:
            return self.max_slots
        if self.n <= 2:
            return 256
        from . import bounds

        return int(math.ceil(4.0 * bounds.ub_budget(self.n, self.alpha, self.beta)))

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "r": self.r,
            "v_max": self.v_max,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "d": self.d,
            "predicate": self.predicate,
            "max_slots": self.max_slots,
            "protocol": self.protocol.to_json(),
            "adversary": self.adversary.to_json(),
        }

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "SimConfig":
        from .adversaries import AdversarySpec
        from .protocols import ProtocolSpec

        try:
            return SimConfig(
                n=int(obj["n"]),
                r=float(obj["r"]),
                v_max=float(obj["v_max"]),
                alpha=int(obj["alpha"]),
                beta=int(obj["beta"]),
                protocol=ProtocolSpec.from_json(obj["protocol"]),
                adversary=AdversarySpec.from_json(obj["adversary"]),
                seed=int(obj.get("seed", 0)),
                d=None if obj.get("d") is None else float(obj["d"]),
                predicate=str(obj.get("predicate", "all-nodes")),
                max_slots=None if obj.get("max_slots") is None else int(obj["max_slots"]),
            )
        except KeyError as exc:
            raise ParamError(f"config is missing field {exc.args[0]!r}") from exc
        except ParamError:
            raise
        except (TypeError, ValueError) as exc:
            raise ParamError(f"malformed config JSON: {exc}") from exc


@dataclass(frozen=True)
class Trace:
    """Recorded run: per-slot worlds stacked into arrays plus events.

    Row 0 is the initial world (all flags false); row t holds the positions
    used during slot t and the end-of-slot flags. ``tx`` marks transmitters,
    ``rx_from[t, i]`` is the 1-based sender id node i+1 received from in slot
    t (0 when it received nothing). Histories and step counters are run
    internals and are not recorded.
    """

    config: SimConfig
    pos: np.ndarray
    active: np.ndarray
    covered: np.ndarray
    informed: np.ndarray
    tx: np.ndarray
    rx_from: np.ndarray
    t1: int = 1
    solved_slot: int | None = None

    def __post_init__(self) -> None:
        for name in ("pos", "active", "covered", "informed", "tx", "rx_from"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name)).copy()))
        if self.pos.ndim != 3 or self.pos.shape[2] != 2:
            raise ParamError("trace positions must have shape (T+1, n, 2)")

    @property
    def n(self) -> int:
        return self.pos.shape[1]

    @property
    def n_slots(self) -> int:
        """Number of simulated slots T (rows minus the initial row)."""
        return self.pos.shape[0] - 1

    def world_at(self, t: int) -> WorldState:
        if not 0 <= t <= self.n_slots:
            raise ParamError(f"slot {t} outside trace range 0..{self.n_slots}")
        return WorldState(
            pos=self.pos[t],
            active=self.active[t],
            covered=self.covered[t],
            informed=self.informed[t],
            local_step=np.zeros(self.n, dtype=np.int64),
            slot=t,
        )

    def transmitters_at(self, t: int) -> tuple[int, ...]:
        if not 0 <= t <= self.n_slots:
            raise ParamError(f"slot {t} outside trace range 0..{self.n_slots}")
        return tuple(int(i) + 1 for i in np.nonzero(self.tx[t])[0])

    def receptions_at(self, t: int) -> dict[int, int]:
        if not 0 <= t <= self.n_slots:
            raise ParamError(f"slot {t} outside trace range 0..{self.n_slots}")
        row = self.rx_from[t]
        return {int(i) + 1: int(row[i]) for i in np.nonzero(row > 0)[0]}


def trace_to_jsonl(trace: Trace) -> Iterator[str]:
    """Serialize a trace: one meta line, then one line per slot row."""
    meta = {
        "config": trace.config.to_json(),
        "t1": trace.t1,
        "solved_slot": trace.solved_slot,
    }
    yield json.dumps(meta, separators=(",", ":"), sort_keys=True)
    for t in range(trace.n_slots + 1):
        row = {
            "slot": t,
            "positions": [[float(x), float(y)] for x, y in trace.pos[t]],
            "active": [bool(v) for v in trace.active[t]],
            "covered": [bool(v) for v in trace.covered[t]],
            "informed": [bool(v) for v in trace.informed[t]],
            "tx": list(trace.transmitters_at(t)),
            "rx": {str(k): v for k, v in sorted(trace.receptions_at(t).items())},
        }
        yield json.dumps(row, separators=(",", ":"), sort_keys=True)


def write_trace(trace: Trace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in trace_to_jsonl(trace):
            fh.write(line)
            fh.write("\n")


def trace_from_lines(lines: Iterable[str]) -> Trace:
    it = iter(lines)
    try:
        meta = json.loads(next(it))
    except StopIteration:
        raise ParamError("empty trace stream") from None
    if not isinstance(meta, dict) or "config" not in meta:
        raise ParamError("trace stream does not start with a meta line")
    config = SimConfig.from_json(meta["config"])
    pos, active, covered, informed, txs, rxs = [], [], [], [], [], []
    for expect, line in enumerate(it):
        row = json.loads(line)
        if row.get("slot") != expect:
            raise ParamError(f"trace rows out of order at slot {expect}")
        pos.append(row["positions"])
        active.append(row["active"])
        covered.append(row["covered"])
        informed.append(row["informed"])
        txs.append(row["tx"])
        rxs.append(row["rx"])
    if not pos:
        raise ParamError("trace has no slot rows")
    n = len(pos[0])
    tx = np.zeros((len(pos), n), dtype=bool)
    rx_from = np.zeros((len(pos), n), dtype=np.int32)
    for t, ids in enumerate(txs):
        for node in ids:
            tx[t, int(node) - 1] = True
    for t, m in enumerate(rxs):
        for recv, snd in m.items():
            rx_from[t, int(recv) - 1] = int(snd)
    return Trace(
        config=config,
        pos=np.asarray(pos, dtype=np.float64),
        active=np.asarray(active, dtype=bool),
        covered=np.asarray(covered, dtype=bool),
        informed=np.asarray(informed, dtype=bool),
        tx=tx,
        rx_from=rx_from,
        t1=int(meta.get("t1", 1)),
        solved_slot=None if meta.get("solved_slot") is None else int(meta["solved_slot"]),
    )


def read_trace(path: str) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        return trace_from_lines(fh)
