"""Connectivity audit: does a trace keep informed and uncovered nodes in
stable contact often enough for dissemination to be possible at all?

A witness for audited slot t is a triple (p, p', t') with the witness
window [t', t'+beta) meeting [t, t+alpha], p informed at the end of slot
t', p' uncovered at the start of slot t', and the pair active and within
range every slot from t' until p' is covered or until t'+beta-1, whichever
comes first. Every slot from t1 up to the last unsolved slot needs one.

A finite trace cannot falsify what lies beyond its horizon: stability runs
still alive at the last recorded slot count, and a slot whose candidate
window extends past the end is not reported as a violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .channel import adjacency
from .core import ParamError, Trace

_NEVER = np.iinfo(np.int64).max // 2


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one connectivity audit."""

    ok: bool
    first_violation_slot: int | None
    witness_log: dict[int, tuple[int, int, int] | None] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "first_violation_slot": self.first_violation_slot,
            "witness_log": {
                str(t): (None if w is None else list(w))
                for t, w in sorted(self.witness_log.items())
            },
        }


def links_at(trace: Trace, t: int) -> list[tuple[int, int]]:
    """Edges (u, v) with u < v between active nodes within range in slot t."""
    if not 0 <= t <= trace.n_slots:
        raise ParamError(f"slot {t} outside trace range 0..{trace.n_slots}")
    adj = adjacency(trace.pos[t], trace.active[t], trace.config.r)
    iu, iv = np.nonzero(np.triu(adj, k=1))
    return [(int(u) + 1, int(v) + 1) for u, v in zip(iu, iv)]

def online_route_exists(trace: Trace, u: int, v: int, t_start: int) -> bool:
    """True when a chain of links at strictly increasing slots >= t_start
    leads from u to v (one hop per slot; u == v is trivially routed)."""
    for node in (u, v):
        if not 1 <= node <= trace.n:
            raise ParamError(f"node id {node} out of range")
    if not 0 <= t_start <= trace.n_slots:
        raise ParamError(f"slot {t_start} outside trace range 0..{trace.n_slots}")
    if u == v:
        return True
    reached = np.zeros(trace.n, dtype=bool)
    reached[u - 1] = True
    for t in range(t_start, trace.n_slots + 1):
        adj = adjacency(trace.pos[t], trace.active[t], trace.config.r)
        new = adj[reached].any(axis=0) & ~reached
        if not new.any():
            continue
        reached |= new
        if reached[v - 1]:
            return True
    return bool(reached[v - 1])


def _first_covered_slots(trace: Trace) -> np.ndarray:
    covered = trace.covered
    ever = covered.any(axis=0)
    first = covered.argmax(axis=0).astype(np.int64)
    first[~ever] = _NEVER
    return first


def _audited_range(trace: Trace) -> tuple[int, int]:
    last = trace.n_slots if trace.solved_slot is None else trace.solved_slot - 1
    return trace.t1, min(last, trace.n_slots)


def witness_valid(trace: Trace, t: int, t_prime: int, p: int, p_prime: int,
                  alpha: int, beta: int) -> bool:
    """Check one candidate witness triple for audited slot t."""
    if alpha < 0 or beta < 1:
        raise ParamError("witness_valid requires alpha >= 0 and beta >= 1")
    T = trace.n_slots
    if not (trace.t1 <= t_prime <= T):
        return False
    if t_prime > t + alpha or t_prime + beta - 1 < t:
        return False
    if p == p_prime:
        return False
    pi, qi = p - 1, p_prime - 1
    if not trace.informed[t_prime, pi]:
        return False
    if trace.covered[t_prime - 1, qi]:
        return False
    cov = int(_first_covered_slots(trace)[qi])
    stop = min(cov, t_prime + beta - 1, T)
    r = trace.config.r
    for s in range(t_prime, stop + 1):
        if not (trace.active[s, pi] and trace.active[s, qi]):
            return False
        d = trace.pos[s, pi] - trace.pos[s, qi]
        if float(d @ d) > r * r:
            return False
    return True


def audit_alpha_beta(trace: Trace, alpha: int, beta: int) -> AuditReport:
    """Audit the whole trace for (alpha, beta)-connectivity.

    Windowed scan over precomputed per-slot witness availability: a
    backward pass maintains, for every ordered pair, the length of the
    mutual-contact run starting at each slot, from which the validity of
    any (p, p', t') is a closed-form test.
    """
    if alpha < 0:
        raise ParamError("alpha must be >= 0")
    if beta < 1:
        raise ParamError("beta must be >= 1")
    T = trace.n_slots
    t1 = trace.t1
    lo_t, hi_t = _audited_range(trace)
    if hi_t < lo_t:
        return AuditReport(ok=True, first_violation_slot=None)

    n = trace.n
    r = trace.config.r
    cov = _first_covered_slots(trace)
    has_witness = np.zeros(T + 1, dtype=bool)
    pair_p = np.zeros(T + 1, dtype=np.int64)
    pair_q = np.zeros(T + 1, dtype=np.int64)
    run = np.zeros((n, n), dtype=np.int64)
    for tp in range(T, t1 - 1, -1):
        adj = adjacency(trace.pos[tp], trace.active[tp], r)
        run = np.where(adj, run + 1, 0)
        need = np.minimum(np.minimum(cov, tp + beta - 1), T) - tp + 1
        valid = (
            trace.informed[tp][:, None]
            & ~trace.covered[tp - 1][None, :]
            & (run >= need[None, :])
        )
        flat = int(np.argmax(valid))
        if valid.flat[flat]:
            has_witness[tp] = True
            pair_p[tp], pair_q[tp] = divmod(flat, n)

    witness_log: dict[int, tuple[int, int, int] | None] = {}
    first_violation: int | None = None
    for t in range(lo_t, hi_t + 1):
        lo = max(t1, t - beta + 1)
        hi = min(t + alpha, T)
        found = None
        for tp in list(range(t, hi + 1)) + list(range(t - 1, lo - 1, -1)):
            if has_witness[tp]:
                found = (int(pair_p[tp]) + 1, int(pair_q[tp]) + 1, tp)
                break
        witness_log[t] = found
        if found is None and t + alpha <= T:
            first_violation = t
            break
    return AuditReport(
        ok=first_violation is None,
        first_violation_slot=first_violation,
        witness_log=witness_log,
    )
