"""Randomized transmission protocols and the per-slot sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .core import ParamError, WorldState

KINDS = ("fair-uniform", "oblivious-schedule", "locally-adaptive")

HISTORY_SYMBOLS = ("T", "R")


@dataclass(frozen=True)
class Schedule:
    """One node's deterministic probability sequence: a finite prefix
    followed by a repeating, non-empty tail."""

    prefix: tuple[float, ...]
    tail: tuple[float, ...]

    def validate(self) -> None:
        if len(self.tail) == 0:
            raise ParamError("schedule tail must be non-empty")
        for p in (*self.prefix, *self.tail):
            if not (0.0 <= float(p) <= 1.0):
                raise ParamError(f"schedule probability {p} outside [0, 1]")


@dataclass(frozen=True)
class ProtocolSpec:
    """Which protocol class a run uses, plus its parameters.

    fair-uniform: every informed node uses the same probability, ln(n)/n by
    default or the fixed override ``p`` when given. oblivious-schedule: each
    node follows its own Schedule indexed by local step. locally-adaptive:
    a named rule maps (local step, own history) to a probability.
    """

    kind: str
    p: float | None = None
    schedules: Mapping[int, Schedule] | None = None
    rule: str | None = None
    params: Mapping[str, float] = field(default_factory=dict)

    def validate(self, n: int) -> "ProtocolSpec":
        if self.kind not in KINDS:
            raise ParamError(f"unknown protocol kind {self.kind!r}")
        if self.kind == "fair-uniform":
            if self.p is None:
                uniform_fair_prob(n)
            elif not (0.0 <= self.p <= 1.0):
                raise ParamError("fair-uniform override p must lie in [0, 1]")
        elif self.kind == "oblivious-schedule":
            if not self.schedules:
                raise ParamError("oblivious-schedule requires schedules")
            for node in range(1, n + 1):
                if node not in self.schedules:
                    raise ParamError(f"no schedule for node {node}")
                self.schedules[node].validate()
        else:
            if self.rule not in ADAPTIVE_RULES:
                raise ParamError(f"unknown adaptive rule {self.rule!r}")
            ADAPTIVE_RULES[self.rule].validate(dict(self.params))
        return self

    def to_json(self) -> dict[str, Any]:
        if self.kind == "fair-uniform":
            out: dict[str, Any] = {"kind": self.kind}
            if self.p is not None:
                out["p"] = self.p
            return out
        if self.kind == "oblivious-schedule":
            return {
                "kind": self.kind,
                "schedules": {
                    str(node): {"prefix": list(s.prefix), "tail": list(s.tail)}
                    for node, s in sorted(self.schedules.items())
                },
            }
        return {"kind": self.kind, "rule": self.rule, "params": dict(self.params)}

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "ProtocolSpec":
        kind = obj.get("kind")
        try:
            if kind == "fair-uniform":
                p = obj.get("p")
                return ProtocolSpec(kind=kind, p=None if p is None else float(p))
            if kind == "oblivious-schedule":
                schedules = {
                    int(node): Schedule(
                        prefix=tuple(float(v) for v in s.get("prefix", [])),
                        tail=tuple(float(v) for v in s.get("tail", [])),
                    )
                    for node, s in obj.get("schedules", {}).items()
                }
                return ProtocolSpec(kind=kind, schedules=schedules)
            if kind == "locally-adaptive":
                return ProtocolSpec(
                    kind=kind,
                    rule=obj.get("rule"),
                    params={str(k): float(v) for k, v in obj.get("params", {}).items()},
                )
        except ParamError:
            raise
        except (TypeError, ValueError, AttributeError) as exc:
            raise ParamError(f"malformed protocol JSON for kind {kind!r}: {exc}") from exc
        raise ParamError(f"unknown protocol kind {kind!r}")


def uniform_fair_prob(n: int) -> float:
    """Default fair probability ln(n)/n; needs n > 2 so the value is a
    proper probability below 1/2."""
    if not isinstance(n, (int, np.integer)) or n <= 2:
        raise ParamError("fair-uniform default probability requires n > 2")
    return math.log(n) / n


def schedule_prob(spec: ProtocolSpec, node: int, local_step: int) -> float:
    """Probability an oblivious node uses at its local_step-th active slot."""
    if spec.kind != "oblivious-schedule":
        raise ParamError("schedule_prob requires an oblivious-schedule spec")
    if spec.schedules is None or node not in spec.schedules:
        raise ParamError(f"no schedule for node {node}")
    if local_step < 1:
        raise ParamError("local_step counts from 1")
    sched = spec.schedules[node]
    if local_step <= len(sched.prefix):
        return float(sched.prefix[local_step - 1])
    return float(sched.tail[(local_step - 1 - len(sched.prefix)) % len(sched.tail)])


class AdaptiveRule:
    """A locally adaptive rule: probability from local step and own history."""

    def __init__(self, name: str, fn: Callable[[int, str, Mapping[str, float]], float],
                 required: tuple[str, ...] = (), defaults: Mapping[str, float] | None = None):
        self.name = name
        self.fn = fn
        self.required = required
        self.defaults = dict(defaults or {})

    def validate(self, params: Mapping[str, float]) -> None:
        for key in self.required:
            if key not in params:
                raise ParamError(f"rule {self.name!r} requires parameter {key!r}")
        for key, value in params.items():
            if not (0.0 <= float(value)) or not math.isfinite(float(value)):
                raise ParamError(f"rule parameter {key}={value} must be finite and >= 0")

    def __call__(self, local_step: int, history: str, params: Mapping[str, float]) -> float:
        merged = {**self.defaults, **params}
        return min(1.0, max(0.0, float(self.fn(local_step, history, merged))))


def _trailing_transmit_run(history: str) -> int:
    return len(history) - len(history.rstrip("T"))


ADAPTIVE_RULES: dict[str, AdaptiveRule] = {
    "constant-p": AdaptiveRule("constant-p", lambda t, h, p: p["p"], required=("p",)),
    "halve-after-T": AdaptiveRule(
        "halve-after-T",
        lambda t, h, p: p["base"] * 0.5 ** h.count("T"),
        defaults={"base": 0.5},
    ),
    "reset-on-receive": AdaptiveRule(
        # halves per transmission since the last reception: with the two
        # symbol alphabet that is the trailing run of "T"
        "reset-on-receive",
        lambda t, h, p: p["base"] * 0.5 ** _trailing_transmit_run(h),
        defaults={"base": 0.5},
    ),
    "decay-1/t": AdaptiveRule(
        "decay-1/t",
        lambda t, h, p: p["base"] / t,
        defaults={"base": 1.0},
    ),
}


def adaptive_prob(spec: ProtocolSpec, node: int, local_step: int, history: str) -> float:
    """Probability a locally adaptive node uses, given its own history.

    The history must hold exactly one symbol per completed active slot,
    local_step - 1 of them.
    """
    if spec.kind != "locally-adaptive":
        raise ParamError("adaptive_prob requires a locally-adaptive spec")
    if local_step < 1:
        raise ParamError("local_step counts from 1")
    if len(history) != local_step - 1:
        raise ParamError(
            f"history length {len(history)} does not match local step {local_step}"
        )
    if any(sym not in HISTORY_SYMBOLS for sym in history):
        raise ParamError("history may contain only 'T' and 'R'")
    rule = ADAPTIVE_RULES.get(spec.rule or "")
    if rule is None:
        raise ParamError(f"unknown adaptive rule {spec.rule!r}")
    return rule(local_step, history, spec.params)


def slot_probabilities(world: WorldState, spec: ProtocolSpec) -> tuple[np.ndarray, np.ndarray]:
    """Transmission candidates (informed and active, ascending id order) and
    the probability each would use this slot."""
    candidates = np.nonzero(world.informed & world.active)[0]
    if candidates.size == 0:
        return candidates, np.zeros(0, dtype=np.float64)
    if spec.kind == "fair-uniform":
        p = spec.p if spec.p is not None else uniform_fair_prob(world.n)
        probs = np.full(candidates.size, float(p), dtype=np.float64)
    elif spec.kind == "oblivious-schedule":
        probs = np.asarray(
            [schedule_prob(spec, int(i) + 1, int(world.local_step[i])) for i in candidates],
            dtype=np.float64,
        )
    else:
        if world.histories is None:
            raise ParamError("locally-adaptive runs must track histories")
        probs = np.asarray(
            [
                adaptive_prob(spec, int(i) + 1, int(world.local_step[i]), world.histories[i])
                for i in candidates
            ],
            dtype=np.float64,
        )
    return candidates, probs


def decide_transmissions(world: WorldState, spec: ProtocolSpec, rng: np.random.Generator) -> np.ndarray:
    """Sample this slot's transmitters.

    Only informed active nodes may transmit. One independent uniform draw is
    consumed per candidate, in ascending id order, so equal configurations
    replay identically.
    """
    candidates, probs = slot_probabilities(world, spec)
    if candidates.size == 0:
        return np.zeros(0, dtype=np.int64)
    draws = rng.random(candidates.size)
    return (candidates[draws < probs] + 1).astype(np.int64)
