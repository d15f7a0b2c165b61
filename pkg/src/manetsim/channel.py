"""Collision-channel radio semantics for a single slot."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import ParamError, WorldState


@dataclass(frozen=True)
class SlotOutcome:
    """Who transmitted and who received from whom (1-based ids)."""

    transmitters: frozenset[int]
    receptions: dict[int, int]


def adjacency(pos: np.ndarray, active: np.ndarray, r: float) -> np.ndarray:
    """Boolean n x n matrix: both endpoints active, distinct, within r.

    The range check is boundary inclusive.
    """
    diff = pos[:, None, :] - pos[None, :, :]
    within = np.einsum("ijk,ijk->ij", diff, diff) <= r * r
    both = active[:, None] & active[None, :]
    adj = within & both
    np.fill_diagonal(adj, False)
    return adj

def neighbors(world: WorldState, r: float) -> np.ndarray:
    """Adjacency matrix of the world's nodes at range r."""
    if not (np.isfinite(r) and r > 0):
        raise ParamError("r must be positive and finite")
    return adjacency(world.pos, world.active, r)


def resolve_slot(world: WorldState, transmitters: Iterable[int], r: float) -> SlotOutcome:
    """Resolve one slot of the collision channel.

    An active node u receives from v exactly when v is the only transmitter
    in u's neighborhood including u itself: u hears nothing while it
    transmits, and two or more transmitters in range collide with no
    collision detection. Transmitters must be active nodes.
    """
    tx_ids = sorted(int(t) for t in transmitters)
    for node in tx_ids:
        if not 1 <= node <= world.n:
            raise ParamError(f"transmitter id {node} out of range")
        if not world.active[node - 1]:
            raise ParamError(f"inactive node {node} cannot transmit")
    receptions: dict[int, int] = {}
    if tx_ids:
        adj = neighbors(world, r)
        tx_idx = np.asarray([t - 1 for t in tx_ids], dtype=np.intp)
        heard = adj[:, tx_idx]
        counts = heard.sum(axis=1)
        is_tx = np.zeros(world.n, dtype=bool)
        is_tx[tx_idx] = True
        can_receive = world.active & ~is_tx & (counts == 1)
        for idx in np.nonzero(can_receive)[0]:
            sender = tx_idx[int(np.argmax(heard[idx]))]
            receptions[int(idx) + 1] = int(sender) + 1
    return SlotOutcome(transmitters=frozenset(tx_ids), receptions=receptions)
