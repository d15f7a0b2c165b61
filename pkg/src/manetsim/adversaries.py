"""Adversarial mobility scripts: throttling cluster scenarios, the visitor
scenario for geocast lower bounds, and scripted/static baselines.

The cluster scenarios keep an informed clique split across two nearby sets
B and B' and throttle how often outsiders hear a clean transmission: on
high-contention slots every clique member is pushed into range of the
listeners so transmissions collide, on low-contention slots only a single
sacrificial witness node y stays in range. The geocast variant walks one
listener at a time from the far set A to a landing point x, holds an
interlude there, then parks it in C while the next listener approaches.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from . import bounds
from .core import ParamError, SimConfig, WorldState, apply_activation
from .protocols import ProtocolSpec, adaptive_prob, schedule_prob

KINDS = (
    "stability-fair",
    "stability-oblivious",
    "stability-adaptive",
    "geocast-fair",
    "geocast-oblivious",
    "geocast-adaptive",
    "static",
    "scripted",
)

CLUSTER_KINDS = KINDS[:6]

# membership codes used in step plans and geometry checks
SET_A, SET_B, SET_BP, SET_C, AT_X, APPROACHING, DEPARTING = range(7)

_PROTOCOL_FOR = {
    "fair": "fair-uniform",
    "oblivious": "oblivious-schedule",
    "adaptive": "locally-adaptive",
}


def xi_cluster(cfg: SimConfig) -> float:
    """Cluster diameter bound: small against both the radio range and the
    per-slot speed limit."""
    return min(cfg.r / 100.0, cfg.v_max / 4.0)


def cfg_tracks(cfg: SimConfig) -> bool:
    """Histories are recorded only when an adaptive rule can read them."""
    return cfg.protocol.kind == "locally-adaptive"


@dataclass(frozen=True)
class ScriptedTable:
    """Explicit per-slot positions and activation flags, slot 1 first."""

    positions: np.ndarray  # (L, n, 2) float64
    active: np.ndarray  # (L, n) bool

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        act = np.asarray(self.active, dtype=bool)
        if pos.ndim != 3 or pos.shape[2] != 2:
            raise ParamError("scripted positions must have shape (L, n, 2)")
        if act.shape != pos.shape[:2]:
            raise ParamError("scripted active flags must have shape (L, n)")
        if pos.shape[0] < 1:
            raise ParamError("scripted table needs at least one slot row")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "active", act)

    @property
    def length(self) -> int:
        return self.positions.shape[0]

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    def row(self, slot: int, cycle: bool) -> tuple[np.ndarray, np.ndarray]:
        if slot < 1 or (not cycle and slot > self.length):
            raise ParamError(f"scripted table has no row for slot {slot}")
        idx = (slot - 1) % self.length if cycle else slot - 1
        return self.positions[idx], self.active[idx]

    @staticmethod
    def from_rows(rows: Iterable[Sequence[Any]]) -> "ScriptedTable":
        """Rows of (slot, node, x, y, active), 1-based slots and nodes."""
        cells: dict[tuple[int, int], tuple[float, float, bool]] = {}
        max_slot = 0
        max_node = 0
        for row in rows:
            slot, node = int(row[0]), int(row[1])
            if slot < 1 or node < 1:
                raise ParamError("scripted rows use 1-based slot and node ids")
            cells[(slot, node)] = (float(row[2]), float(row[3]), _as_bool(row[4]))
            max_slot = max(max_slot, slot)
            max_node = max(max_node, node)
        if not cells:
            raise ParamError("scripted table is empty")
        pos = np.zeros((max_slot, max_node, 2), dtype=np.float64)
        act = np.zeros((max_slot, max_node), dtype=bool)
        for slot in range(1, max_slot + 1):
            for node in range(1, max_node + 1):
                if (slot, node) not in cells:
                    raise ParamError(f"scripted table misses slot {slot}, node {node}")
                x, y, a = cells[(slot, node)]
                pos[slot - 1, node - 1] = (x, y)
                act[slot - 1, node - 1] = a
        return ScriptedTable(positions=pos, active=act)

    @staticmethod
    def from_csv(path: str) -> "ScriptedTable":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["slot", "node", "x", "y", "active"]:
                raise ParamError("scripted CSV needs header slot,node,x,y,active")
            return ScriptedTable.from_rows(reader)


def _as_bool(value: Any) -> bool:
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("1", "true", "yes"):
            return True
        if v in ("0", "false", "no"):
            return False
        raise ParamError(f"cannot read {value!r} as a flag")
    return bool(value)


@dataclass(frozen=True)
class AdversarySpec:
    """Which mobility script a run uses, plus its parameters.

    k is the informed clique size of the stability kinds. rollouts is the
    Monte Carlo width of the adaptive witness selector. Scripted tables
    replay verbatim and must cover the whole run unless cycle is set, in
    which case they repeat.
    """

    kind: str
    k: int | None = None
    rollouts: int = 256
    cycle: bool = False
    positions: tuple[tuple[float, float], ...] | None = None
    table: ScriptedTable | None = None

    def validate(self, cfg: SimConfig) -> "AdversarySpec":
        if self.kind not in KINDS:
            raise ParamError(f"unknown adversary kind {self.kind!r}")
        if self.kind == "static":
            if self.positions is None or len(self.positions) != cfg.n:
                raise ParamError("static adversary needs one position per node")
            if len(set(self.positions)) != cfg.n:
                raise ParamError("static adversary positions must be distinct")
        elif self.kind == "scripted":
            if self.table is None:
                raise ParamError("scripted adversary needs a table")
            if self.table.n != cfg.n:
                raise ParamError(
                    f"scripted table covers {self.table.n} nodes, config has {cfg.n}"
                )
            if not self.cycle and self.table.length < cfg.resolved_max_slots():
                raise ParamError(
                    f"scripted table has {self.table.length} slots, run needs "
                    f"{cfg.resolved_max_slots()}"
                )
        else:
            self._validate_cluster(cfg)
        return self

    def _validate_cluster(self, cfg: SimConfig) -> None:
        variant = self.kind.split("-")[1]
        want = _PROTOCOL_FOR[variant]
        if cfg.protocol.kind != want:
            raise ParamError(f"{self.kind} requires the {want} protocol")
        if self.rollouts < 1:
            raise ParamError("rollouts must be >= 1")
        xi = xi_cluster(cfg)
        if cfg.d is None or cfg.d < cfg.r + xi:
            raise ParamError("cluster scenarios require d >= r + xi")
        if self.kind.startswith("stability"):
            if self.k is None:
                raise ParamError("stability scenarios require the clique size k")
            if not self.k < cfg.n:
                raise ParamError("stability scenarios require k < n")
            if variant == "fair" and self.k < 45:
                raise ParamError("stability-fair requires k >= 45")
            if variant == "oblivious" and self.k < math.e**3:
                raise ParamError("stability-oblivious requires k >= e^3")
            if variant == "adaptive":
                bounds.stability_adaptive_params(self.k, cfg.beta)
        else:
            if cfg.n % 2:
                raise ParamError("geocast scenarios require even n")
            minimum = {"fair": 26, "oblivious": 6, "adaptive": 18}[variant]
            if cfg.n < minimum:
                raise ParamError(f"{self.kind} requires n >= {minimum}")
            if cfg.alpha < 1:
                raise ParamError("geocast scenarios require alpha >= 1")
            if cfg.v_max <= math.pi * cfg.r / (6.0 * cfg.alpha):
                raise ParamError("geocast scenarios require v_max > pi r / (6 alpha)")
            check_visitor_walk_feasible(cfg)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.k is not None:
            out["k"] = self.k
        if self.rollouts != 256:
            out["rollouts"] = self.rollouts
        if self.cycle:
            out["cycle"] = True
        if self.positions is not None:
            out["positions"] = [list(p) for p in self.positions]
        if self.table is not None:
            out["table"] = {
                "positions": self.table.positions.tolist(),
                "active": self.table.active.tolist(),
            }
        return out

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "AdversarySpec":
        kind = obj.get("kind")
        if kind not in KINDS:
            raise ParamError(f"unknown adversary kind {kind!r}")
        try:
            table = None
            if "csv" in obj:
                table = ScriptedTable.from_csv(str(obj["csv"]))
            elif "table" in obj:
                table = ScriptedTable(
                    positions=np.asarray(obj["table"]["positions"], dtype=np.float64),
                    active=np.asarray(obj["table"]["active"], dtype=bool),
                )
            elif "rows" in obj:
                table = ScriptedTable.from_rows(obj["rows"])
            positions = obj.get("positions")
            return AdversarySpec(
                kind=kind,
                k=None if obj.get("k") is None else int(obj["k"]),
                rollouts=int(obj.get("rollouts", 256)),
                cycle=bool(obj.get("cycle", False)),
                positions=None
                if positions is None
                else tuple((float(x), float(y)) for x, y in positions),
                table=table,
            )
        except ParamError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ParamError(f"malformed adversary JSON for kind {kind!r}: {exc}") from exc


@dataclass
class StepPlan:
    """One slot of adversary output: where everyone sits during the slot,
    which activation events fire at its boundary, and diagnostics."""

    positions: np.ndarray
    events: list[tuple[int, str]]
    label: str
    target: int = 0
    mass: bool = False
    witness: int = 0
    membership: np.ndarray | None = None


def _grid_offsets(count: int, pitch: float, radius: float) -> np.ndarray:
    """Deterministic micro-grid: the first `count` lattice points of the
    given pitch inside a disk, ordered ring by ring, then by (i, j)."""
    out: list[tuple[float, float]] = []
    ring = 0
    while len(out) < count:
        if ring * pitch > radius:
            raise ParamError(
                f"micro-grid of pitch {pitch} cannot host {count} nodes inside radius {radius}"
            )
        pts = []
        for i in range(-ring, ring + 1):
            for j in range(-ring, ring + 1):
                if max(abs(i), abs(j)) != ring:
                    continue
                if math.hypot(i * pitch, j * pitch) <= radius:
                    pts.append((i, j))
        pts.sort()
        out.extend((i * pitch, j * pitch) for i, j in pts)
        ring += 1
    return np.asarray(out[:count], dtype=np.float64)


class Adversary:
    """Base interface the engine drives once per slot."""

    def __init__(self, spec: AdversarySpec, cfg: SimConfig):
        self.spec = spec
        self.cfg = cfg

    def initial_world(self) -> WorldState:
        raise NotImplementedError

    def step(self, world: WorldState, slot: int, fair_prob: float | None,
             adv_rng: np.random.Generator) -> StepPlan:
        raise NotImplementedError

    def check_geometry(self, world: WorldState) -> list[str]:
        return []


class StaticAdversary(Adversary):
    """Everyone active from slot 1 and never moving."""

    def __init__(self, spec: AdversarySpec, cfg: SimConfig):
        super().__init__(spec, cfg)
        self._pos = np.asarray(spec.positions, dtype=np.float64)

    def initial_world(self) -> WorldState:
        return WorldState.initial(self._pos, track_histories=cfg_tracks(self.cfg))

    def step(self, world, slot, fair_prob, adv_rng):
        events = [(i, "up") for i in world.ids()] if slot == 1 else []
        return StepPlan(positions=self._pos, events=events, label="static")


class ScriptedAdversary(Adversary):
    """Replays an explicit position/activation table."""

    def __init__(self, spec: AdversarySpec, cfg: SimConfig):
        super().__init__(spec, cfg)
        self._table = spec.table
        self._cycle = spec.cycle

    def initial_world(self) -> WorldState:
        pos, _ = self._table.row(1, self._cycle)
        return WorldState.initial(pos, track_histories=cfg_tracks(self.cfg))

    def step(self, world, slot, fair_prob, adv_rng):
        if not self._cycle and slot > self._table.length:
            raise ParamError(f"scripted table exhausted at slot {slot}")
        pos, want_active = self._table.row(slot, self._cycle)
        events: list[tuple[int, str]] = []
        for idx in range(world.n):
            if want_active[idx] and not world.active[idx]:
                events.append((idx + 1, "up"))
            elif not want_active[idx] and world.active[idx]:
                events.append((idx + 1, "down"))
        return StepPlan(positions=pos, events=events, label="scripted")


def select_witness_y_oblivious(protocol: ProtocolSpec, members: Sequence[int],
                               steps: Sequence[int]) -> int:
    """Pick the witness whose scheduled probability mass over the window's
    low-contention steps is smallest (ties to the lowest id).

    A step is low contention when the members' summed probability stays
    under 1 + ln k. By averaging, the winner's low-step mass is at most
    len(steps) * (1 + ln k) / k.
    """
    if not members:
        raise ParamError("member set must be non-empty")
    ids = sorted(int(m) for m in members)
    thr = bounds.oblivious_contention_threshold(len(ids))
    probs = {node: [schedule_prob(protocol, node, int(s)) for s in steps] for node in ids}
    low = [j for j in range(len(steps)) if sum(probs[node][j] for node in ids) < thr]

    def low_mass(node: int) -> float:
        return sum(probs[node][j] for j in low)

    return min(ids, key=lambda node: (low_mass(node), node))


@dataclass(frozen=True)
class AdaptiveSelection:
    """Outcome of the Monte Carlo witness selection."""

    y: int
    low_steps: tuple[int, ...]
    kept_rollouts: int


def select_witness_y_adaptive(
    protocol: ProtocolSpec,
    members: Sequence[int],
    histories: Sequence[str],
    local_steps: Sequence[int],
    window: int,
    gamma: float,
    rng: np.random.Generator,
    rollouts: int,
) -> AdaptiveSelection:
    """Monte Carlo witness selection against locally adaptive rules.

    Pass one estimates each window step's expected summed transmission
    probability and classifies steps as high (>= gamma) or low. Pass two
    conditions on the rollouts that behaved like the classification says
    (more than gamma/e transmitters on high steps, at most e*gamma on low
    steps; all rollouts if none qualify) and picks the member with the
    least conditional probability mass on the low steps, ties to the
    lowest id.
    """
    if window < 1:
        raise ParamError("selection window must be >= 1")
    if rollouts < 1:
        raise ParamError("rollouts must be >= 1")
    ids = sorted(int(m) for m in members)
    m = len(ids)
    hist0 = [str(h) for h in histories]
    steps0 = [int(s) for s in local_steps]
    prob_cube = np.zeros((rollouts, window, m), dtype=np.float64)
    count_mat = np.zeros((rollouts, window), dtype=np.int64)
    for trial in range(rollouts):
        hist = list(hist0)
        for s in range(window):
            probs = np.asarray(
                [adaptive_prob(protocol, ids[j], steps0[j] + 1 + s, hist[j]) for j in range(m)]
            )
            prob_cube[trial, s] = probs
            fired = rng.random(m) < probs
            count_mat[trial, s] = int(fired.sum())
            for j in range(m):
                hist[j] = hist[j] + ("T" if fired[j] else "R")
    mean_sum = prob_cube.sum(axis=2).mean(axis=0)
    high = mean_sum >= gamma
    ok_high = (count_mat > gamma / math.e) | ~high[None, :]
    ok_low = (count_mat <= math.e * gamma) | high[None, :]
    keep = (ok_high & ok_low).all(axis=1)
    if not keep.any():
        keep = np.ones(rollouts, dtype=bool)
    low_idx = np.nonzero(~high)[0]
    if low_idx.size:
        est = prob_cube[keep][:, low_idx, :].sum(axis=1).mean(axis=0)
    else:
        est = np.zeros(m)
    best = min(range(m), key=lambda j: (float(est[j]), ids[j]))
    return AdaptiveSelection(
        y=ids[best],
        low_steps=tuple(int(i) for i in low_idx),
        kept_rollouts=int(keep.sum()),
    )


class _ClusterAdversary(Adversary):
    """Shared plumbing of the cluster scenarios."""

    members: list[int]

    def __init__(self, spec: AdversarySpec, cfg: SimConfig):
        super().__init__(spec, cfg)
        self.xi = xi_cluster(cfg)
        self.h = self.xi / 8.0
        self.gap = min(1e-6, self.xi / 16.0)
        self.pitch = self.xi / (2.0 * cfg.n)
        self.variant = spec.kind.split("-")[1]
        self.membership = np.zeros(cfg.n, dtype=np.int8)

    def _offsets(self, count: int) -> np.ndarray:
        return _grid_offsets(count, self.pitch, self.h)

    def member_probs(self, world: WorldState, fair_prob: float | None) -> np.ndarray:
        """Exact per-member transmission probabilities for the coming slot.

        Members are active from slot 1 on, so the coming local step is the
        recorded one plus 1.
        """
        proto = self.cfg.protocol
        out = np.zeros(len(self.members), dtype=np.float64)
        for j, node in enumerate(self.members):
            idx = node - 1
            step = int(world.local_step[idx]) + 1
            if proto.kind == "fair-uniform":
                out[j] = float(fair_prob)
            elif proto.kind == "oblivious-schedule":
                out[j] = schedule_prob(proto, node, step)
            else:
                out[j] = adaptive_prob(proto, node, step, world.histories[idx])
        return out

    def _all_members_covered(self, world: WorldState) -> bool:
        return bool(world.covered[[m - 1 for m in self.members]].all())

    def _up_events(self, world: WorldState, slot: int) -> list[tuple[int, str]]:
        return [(i, "up") for i in world.ids()] if slot == 1 else []


class StabilityAdversary(_ClusterAdversary):
    """Clique throttling: listeners A in range of B but not of B', the
    informed clique shuttling between B' and B around the witness y."""

    def __init__(self, spec: AdversarySpec, cfg: SimConfig):
        super().__init__(spec, cfg)
        k = spec.k
        self.members = list(range(1, k + 1))
        self.outsiders = list(range(k + 1, cfg.n + 1))
        self.c_bp = np.array([0.0, 0.0])
        self.c_b = np.array([0.6 * self.xi, 0.0])
        self.c_a = self.c_b + np.array([cfg.r - 2.0 * self.h - self.gap, 0.0])
        self.member_off = self._offsets(k)
        self.outsider_off = self._offsets(cfg.n - k)
        self.mode = "prelude"
        self.window_left = 0
        self.y = 0
        if self.variant == "fair":
            self.mass_thr = bounds.fair_stability_threshold(k)
        elif self.variant == "oblivious":
            self.mass_thr = bounds.oblivious_contention_threshold(k)
        else:
            self.gamma = bounds.stability_adaptive_params(k, cfg.beta).gamma
            self.mass_thr = self.gamma / math.e

    def initial_world(self) -> WorldState:
        self.mode = "prelude"
        self.window_left = 0
        self.y = 0
        return WorldState.initial(self._positions(set()), track_histories=cfg_tracks(self.cfg))

    def _positions(self, in_b: set[int]) -> np.ndarray:
        pos = np.zeros((self.cfg.n, 2), dtype=np.float64)
        for j, node in enumerate(self.members):
            anchor = self.c_b if node in in_b else self.c_bp
            pos[node - 1] = anchor + self.member_off[j]
            self.membership[node - 1] = SET_B if node in in_b else SET_BP
        for j, node in enumerate(self.outsiders):
            pos[node - 1] = self.c_a + self.outsider_off[j]
            self.membership[node - 1] = SET_A
        return pos

    def step(self, world, slot, fair_prob, adv_rng):
        events = self._up_events(world, slot)
        if self.mode == "prelude" and self._all_members_covered(world):
            self.mode = "throttle"
            self.window_left = 0
        if self.mode == "prelude":
            return StepPlan(
                positions=self._positions(set()),
                events=events,
                label="prelude",
                membership=self.membership.copy(),
            )
        if self.variant == "fair":
            self.y = self.members[0]
            mass = float(fair_prob) >= self.mass_thr
        else:
            if self.window_left == 0:
                self.window_left = self.cfg.beta
                self.y = self._pick_window_witness(world, adv_rng)
            self.window_left -= 1
            mass = float(self.member_probs(world, fair_prob).sum()) >= self.mass_thr
        in_b = set(self.members) if mass else {self.y}
        return StepPlan(
            positions=self._positions(in_b),
            events=events,
            label="throttle",
            mass=mass,
            witness=self.y,
            membership=self.membership.copy(),
        )

    def _pick_window_witness(self, world, adv_rng):
        first = int(world.local_step[self.members[0] - 1]) + 1
        if self.variant == "oblivious":
            steps = [first + j for j in range(self.cfg.beta)]
            return select_witness_y_oblivious(self.cfg.protocol, self.members, steps)
        sel = select_witness_y_adaptive(
            self.cfg.protocol,
            self.members,
            [world.histories[m - 1] for m in self.members],
            [int(world.local_step[m - 1]) for m in self.members],
            self.cfg.beta,
            self.gamma,
            adv_rng,
            self.spec.rollouts,
        )
        return sel.y

    def check_geometry(self, world):
        return stability_geometry_violations(world, self.membership, self.cfg, self.xi)


def _geocast_geometry(cfg: SimConfig):
    """Anchor points of the visitor scenario, landing point x at the origin.

    B hugs x from one side just inside range, B' just outside; the walk
    circle around B has radius r + xi/2 so every point of it stays out of
    range of x and of B. A sits on that circle 120 degrees up, C just
    inside it at 55 degrees below the axis, where parked nodes stay out of
    range of x but in range of the B/B' clique.
    """
    xi = xi_cluster(cfg)
    h = xi / 8.0
    gap = min(1e-6, xi / 16.0)
    r = cfg.r
    c_b = np.array([r - h - gap, 0.0])
    c_bp = np.array([r + h + gap, 0.0])
    rho = r + xi / 2.0
    psi_a = 2.0 * math.pi / 3.0
    c_a = c_b + rho * np.array([math.cos(psi_a), math.sin(psi_a)])
    phi_c = math.radians(55.0)
    c_c = (r + xi / 2.0) * np.array([math.cos(phi_c), -math.sin(phi_c)])
    return c_b, c_bp, c_a, c_c, rho


def check_visitor_walk_feasible(cfg: SimConfig) -> None:
    """Every scripted hop of the visitor walk must obey v_max."""
    c_b, c_bp, c_a, c_c, rho = _geocast_geometry(cfg)
    xi = xi_cluster(cfg)
    h = xi / 8.0
    steps: list[float] = []
    alpha = cfg.alpha
    land = c_b + rho * np.array([-1.0, 0.0])  # walk-circle point nearest x
    park = c_b + rho * np.array([math.cos(4 * math.pi / 3), math.sin(4 * math.pi / 3)])
    if alpha == 1:
        steps.append(float(np.linalg.norm(c_a)) + h)  # A grid -> x in one hop
        steps.append(float(np.linalg.norm(c_c)) + h)  # x -> C grid in one hop
    else:
        span = math.pi / 3.0 / (alpha - 1)
        chord = 2.0 * rho * math.sin(span / 2.0)
        steps.append(chord + h)  # first approach hop starts off the circle
        steps.append(float(np.linalg.norm(land)) + chord)  # x -> first departure point
        steps.append(float(np.linalg.norm(land)))  # final approach hop onto x
        steps.append(float(np.linalg.norm(park - c_c)) + h)  # departure pull-in to C
    steps.append(float(np.linalg.norm(c_b - c_bp)))  # witness shuttle
    worst = max(steps)
    if worst > cfg.v_max:
        raise ParamError(
            f"visitor walk needs per-slot moves up to {worst:.6g} > v_max {cfg.v_max:.6g}"
        )


class GeocastAdversary(_ClusterAdversary):
    """Visitor scenario: one listener at a time is escorted to the landing
    point x and throttled there for an interlude."""

    def __init__(self, spec: AdversarySpec, cfg: SimConfig):
        super().__init__(spec, cfg)
        m = cfg.n // 2
        self.members = list(range(1, m + 1))
        self.visitors = list(range(m + 1, cfg.n + 1))
        self.c_b, self.c_bp, self.c_a, self.c_c, self.rho = _geocast_geometry(cfg)
        self.member_off = self._offsets(m)
        self.visitor_off = self._offsets(m)
        self.park_off = self._offsets(m)
        if self.variant == "fair":
            self.mass_thr = bounds.geocast_fair_threshold(cfg.n)
            self.cap = None
        else:
            # the backward-looking audit witness at a capped interlude's end
            # needs at least beta in-position slots, so the cap never
            # undercuts the stability window
            self.cap = max(bounds.geocast_interlude_cap(cfg.n), cfg.beta)
            if self.variant == "oblivious":
                self.mass_thr = bounds.oblivious_contention_threshold(m)
            else:
                self.gamma = bounds.stability_adaptive_params(m, self.cap).gamma
                self.mass_thr = self.gamma / math.e
        self._reset()

    def _reset(self) -> None:
        self.mode = "prelude"
        self.u = 0  # approaching or landed visitor
        self.w = 0  # departing visitor
        self.jstep = 0
        self.interlude_len = 0
        self.y = 0
        self.next_visitor = 0
        self.parked: dict[int, int] = {}
        self.at_x = 0

    def initial_world(self) -> WorldState:
        self._reset()
        return WorldState.initial(self._positions(set()), track_histories=cfg_tracks(self.cfg))

    def _ring(self, psi: float) -> np.ndarray:
        return self.c_b + self.rho * np.array([math.cos(psi), math.sin(psi)])

    def _arc_angle(self, j: int, approach: bool) -> float:
        # the approach walks the circle from 120 to 180 degrees, the
        # departure from 180 to 240, both in alpha - 1 equal chords
        base = 2.0 * math.pi / 3.0 if approach else math.pi
        return base + (math.pi / 3.0) * j / max(self.cfg.alpha - 1, 1)

    def _positions(self, in_b: set[int]) -> np.ndarray:
        pos = np.zeros((self.cfg.n, 2), dtype=np.float64)
        for j, node in enumerate(self.members):
            anchor = self.c_b if node in in_b else self.c_bp
            pos[node - 1] = anchor + self.member_off[j]
            self.membership[node - 1] = SET_B if node in in_b else SET_BP
        for j, node in enumerate(self.visitors):
            idx = node - 1
            if node == self.at_x:
                pos[idx] = (0.0, 0.0)
                self.membership[idx] = AT_X
            elif node in self.parked:
                pos[idx] = self.c_c + self.park_off[self.parked[node]]
                self.membership[idx] = SET_C
            elif node == self.u and self.mode == "transit":
                pos[idx] = self._ring(self._arc_angle(self.jstep, True))
                self.membership[idx] = APPROACHING
            elif node == self.w and self.mode in ("transit", "drain"):
                pos[idx] = self._ring(self._arc_angle(self.jstep, False))
                self.membership[idx] = DEPARTING
            else:
                pos[idx] = self.c_a + self.visitor_off[j]
                self.membership[idx] = SET_A
        return pos

    def step(self, world, slot, fair_prob, adv_rng):
        cfg = self.cfg
        events = self._up_events(world, slot)
        # boundary transitions, driven by the previous end-of-slot state
        if self.mode == "prelude" and self._all_members_covered(world):
            self._advance_visitor()
        elif self.mode == "interlude":
            done = bool(world.covered[self.u - 1]) or (
                self.cap is not None and self.interlude_len >= self.cap
            )
            if done:
                self.w = self.u
                self.at_x = 0
                self.u = 0
                if self.next_visitor < len(self.visitors):
                    self._advance_visitor()
                else:
                    self.mode = "drain"
                    self.jstep = 0
        label = self.mode
        mass = False
        if self.mode in ("transit", "drain"):
            self.jstep += 1
            if self.jstep >= cfg.alpha:
                # landing hop: the departer parks in C, the approacher (if
                # any) reaches x and its interlude starts this very slot
                if self.w:
                    self.parked[self.w] = len(self.parked)
                    self.w = 0
                if self.mode == "transit":
                    self.at_x = self.u
                    self.mode = "interlude"
                    self.interlude_len = 0
                    self._select_interlude_witness(world, adv_rng)
                else:
                    self.mode = "idle"
                    label = "drain"
        if self.mode == "interlude":
            self.interlude_len += 1
            label = "interlude"
            mass = self._mass_now(world, fair_prob)
            in_b = set(self.members) if mass else {self.y}
        else:
            in_b = set()
        return StepPlan(
            positions=self._positions(in_b),
            events=events,
            label=label,
            target=self.at_x,
            mass=mass,
            witness=self.y if self.mode == "interlude" else 0,
            membership=self.membership.copy(),
        )

    def _advance_visitor(self) -> None:
        self.u = self.visitors[self.next_visitor]
        self.next_visitor += 1
        self.mode = "transit"
        self.jstep = 0

    def _mass_now(self, world, fair_prob) -> bool:
        if self.variant == "fair":
            return float(fair_prob) >= self.mass_thr
        return float(self.member_probs(world, fair_prob).sum()) >= self.mass_thr

    def _select_interlude_witness(self, world, adv_rng) -> None:
        if self.variant == "fair":
            self.y = self.members[0]
            return
        if self.variant == "oblivious":
            first = int(world.local_step[self.members[0] - 1]) + 1
            steps = [first + j for j in range(self.cap)]
            self.y = select_witness_y_oblivious(self.cfg.protocol, self.members, steps)
            return
        sel = select_witness_y_adaptive(
            self.cfg.protocol,
            self.members,
            [world.histories[m - 1] for m in self.members],
            [int(world.local_step[m - 1]) for m in self.members],
            self.cap,
            self.gamma,
            adv_rng,
            self.spec.rollouts,
        )
        self.y = sel.y

    def check_geometry(self, world):
        return geocast_geometry_violations(world, self.membership, self.cfg, self.xi)


def _construct(spec: AdversarySpec, cfg: SimConfig) -> Adversary:
    if spec.kind == "static":
        return StaticAdversary(spec, cfg)
    if spec.kind == "scripted":
        return ScriptedAdversary(spec, cfg)
    if spec.kind.startswith("stability"):
        return StabilityAdversary(spec, cfg)
    return GeocastAdversary(spec, cfg)


def make_adversary(cfg: SimConfig) -> Adversary:
    """Instantiate the mobility script a config names."""
    return _construct(cfg.adversary, cfg)


def build_initial_layout(spec: AdversarySpec, cfg: SimConfig) -> tuple[WorldState, np.ndarray]:
    """First-slot world of a scenario, everyone already activated, plus the
    membership codes of the cluster kinds (zeros for baselines)."""
    spec.validate(cfg)
    adv = _construct(spec, cfg)
    world = adv.initial_world()
    world = apply_activation(world, [(i, "up") for i in world.ids()])
    membership = adv.membership.copy() if isinstance(adv, _ClusterAdversary) else np.zeros(cfg.n, dtype=np.int8)
    return world, membership


# geometry validators --------------------------------------------------------


def _pair_dists(pos: np.ndarray, a_idx: np.ndarray, b_idx: np.ndarray) -> np.ndarray:
    if a_idx.size == 0 or b_idx.size == 0:
        return np.zeros((0, 0))
    diff = pos[a_idx][:, None, :] - pos[b_idx][None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _set_idx(membership: np.ndarray, code: int) -> np.ndarray:
    return np.nonzero(membership == code)[0]


def stability_geometry_violations(world: WorldState, membership: np.ndarray,
                                  cfg: SimConfig, xi: float) -> list[str]:
    """Throttling scenario placement rules: listeners in range of every B
    node, out of range but within r + xi of every B' node, B and B' within
    xi of each other, every set of diameter at most xi."""
    out: list[str] = []
    pos = world.pos
    a = _set_idx(membership, SET_A)
    b = _set_idx(membership, SET_B)
    bp = _set_idx(membership, SET_BP)
    r = cfg.r
    d_ab = _pair_dists(pos, a, b)
    if d_ab.size and float(d_ab.max()) > r:
        out.append(f"A-B distance {d_ab.max():.6g} exceeds r")
    d_abp = _pair_dists(pos, a, bp)
    if d_abp.size:
        if float(d_abp.min()) <= r:
            out.append(f"A-B' distance {d_abp.min():.6g} not above r")
        if float(d_abp.max()) > r + xi:
            out.append(f"A-B' distance {d_abp.max():.6g} exceeds r + xi")
    d_bbp = _pair_dists(pos, b, bp)
    if d_bbp.size and float(d_bbp.max()) > xi:
        out.append(f"B-B' distance {d_bbp.max():.6g} exceeds xi")
    for name, idx in (("A", a), ("B", b), ("B'", bp)):
        d = _pair_dists(pos, idx, idx)
        if d.size and float(d.max()) > xi:
            out.append(f"set {name} diameter {d.max():.6g} exceeds xi")
    return out


def geocast_geometry_violations(world: WorldState, membership: np.ndarray,
                                cfg: SimConfig, xi: float) -> list[str]:
    """Visitor scenario placement rules, plus the travel guarantees: the
    approaching listener stays uncovered and out of range of every informed
    node until it lands, and the two concurrent travelers stay out of range
    of each other."""
    out: list[str] = []
    pos = world.pos
    r = cfg.r
    a = _set_idx(membership, SET_A)
    b = _set_idx(membership, SET_B)
    bp = _set_idx(membership, SET_BP)
    c = _set_idx(membership, SET_C)
    at_x = _set_idx(membership, AT_X)
    approaching = _set_idx(membership, APPROACHING)
    departing = _set_idx(membership, DEPARTING)

    def dist_to_x(idx: np.ndarray) -> np.ndarray:
        return np.linalg.norm(pos[idx], axis=1) if idx.size else np.zeros(0)

    d = dist_to_x(a)
    if d.size and (float(d.min()) <= r or float(d.max()) > r + xi):
        out.append("A nodes must sit in the (r, r + xi] annulus of x")
    d = dist_to_x(b)
    if d.size and float(d.max()) > r:
        out.append("B nodes must stay within r of x")
    d = dist_to_x(bp)
    if d.size and float(d.min()) <= r:
        out.append("B' nodes must stay out of range of x")
    d = dist_to_x(c)
    if d.size and (float(d.min()) <= r or float(d.max()) > r + xi):
        out.append("C nodes must sit in the (r, r + xi] annulus of x")
    d_ab = _pair_dists(pos, a, b)
    if d_ab.size and (float(d_ab.min()) <= r or float(d_ab.max()) > r + xi):
        out.append("A-B distances must lie in (r, r + xi]")
    d_bpb = _pair_dists(pos, bp, b)
    if d_bpb.size and float(d_bpb.max()) > xi:
        out.append("B'-B distance exceeds xi")
    d_bpa = _pair_dists(pos, bp, a)
    if d_bpa.size and float(d_bpa.min()) <= r:
        out.append("B'-A distance not above r")
    d_ca = _pair_dists(pos, c, a)
    if d_ca.size and float(d_ca.min()) <= r:
        out.append("C-A distance not above r")
    for name, idx in (("A", a), ("B", b), ("B'", bp), ("C", c)):
        dd = _pair_dists(pos, idx, idx)
        if dd.size and float(dd.max()) > xi:
            out.append(f"set {name} diameter exceeds xi")
    if at_x.size:
        d_xb = _pair_dists(pos, at_x, b)
        if d_xb.size and float(d_xb.max()) > r:
            out.append("landed visitor out of range of B")
    informed = np.nonzero(world.informed)[0]
    for idx in approaching:
        if world.covered[idx]:
            out.append(f"approaching listener {idx + 1} was covered before landing")
            continue
        d_i = _pair_dists(pos, np.asarray([idx]), informed)
        if d_i.size and float(d_i.min()) <= r:
            out.append(f"approaching listener {idx + 1} within range of an informed node")
    if approaching.size and departing.size:
        d_t = _pair_dists(pos, approaching, departing)
        if float(d_t.min()) <= r:
            out.append("concurrent travelers within range of each other")
    return out
