"""Synchronised time-expanded networks for AGVs (two layers) and racks.

Each network repeats a one-step edge template for ``t = 0 .. horizon-1``;
edge ``e`` at step ``t`` joins node ``(t, vi[, li])`` to ``(t+1, vo[, lo])``.
The AGV template lists, per source vertex: same-layer stay/move edges on
layer 0, the same on layer 1, then load (0->1) and unload (1->0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .domain import GridMap, Instance, Vertex, neighbors

W_O_RACK = 0
W_RACK = 1
LAYERS = (W_O_RACK, W_RACK)


class TxNode(NamedTuple):
    t: int
    v: Vertex
    layer: int | None = None


class TxEdge(NamedTuple):
    t: int
    vi: Vertex
    vo: Vertex
    li: int | None = None
    lo: int | None = None

    @property
    def is_stay(self) -> bool:
        return self.vi == self.vo and self.li == self.lo

    @property
    def is_layer_change(self) -> bool:
        return self.li != self.lo

    @property
    def tail(self) -> TxNode:
        return TxNode(self.t, self.vi, self.li)

    @property
    def head(self) -> TxNode:
        return TxNode(self.t + 1, self.vo, self.lo)


class StepEdge(NamedTuple):
    """Time-free edge of the one-step template."""

    vi: Vertex
    vo: Vertex
    li: int | None = None
    lo: int | None = None

    def at(self, t: int) -> TxEdge:
        return TxEdge(t, self.vi, self.vo, self.li, self.lo)


def agv_step_edges(grid: GridMap) -> list[StepEdge]:
    out = []
    for v in grid.vertices():
        succ = [v, *neighbors(grid, v)]
        for layer in LAYERS:
            out.extend(StepEdge(v, u, layer, layer) for u in succ)
        out.append(StepEdge(v, v, W_O_RACK, W_RACK))
        out.append(StepEdge(v, v, W_RACK, W_O_RACK))
    return out


def rack_step_edges(grid: GridMap) -> list[StepEdge]:
    out = []
    for v in grid.vertices():
        out.extend(StepEdge(v, u) for u in [v, *neighbors(grid, v)])
    return out


@dataclass(frozen=True)
class TxNetworks:
    grid: GridMap
    horizon: int
    ag_step: tuple[StepEdge, ...]
    ar_step: tuple[StepEdge, ...]
    n_targets: int

    @property
    def ag_edges(self) -> list[TxEdge]:
        return [e.at(t) for t in range(self.horizon) for e in self.ag_step]

    @property
    def ar_edges(self) -> list[TxEdge]:
        return [e.at(t) for t in range(self.horizon) for e in self.ar_step]

    @property
    def tr_edges(self) -> list[list[TxEdge]]:
        # one copy per target, same structure as the rack network
        return [self.ar_edges for _ in range(self.n_targets)]

    def nodes(self, layered: bool) -> list[TxNode]:
        vs = self.grid.vertices()
        if layered:
            return [TxNode(t, v, l) for t in range(self.horizon + 1) for v in vs for l in LAYERS]
        return [TxNode(t, v) for t in range(self.horizon + 1) for v in vs]


def build_networks(instance: Instance, horizon: int) -> TxNetworks:
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    grid = instance.grid
    return TxNetworks(
        grid,
        horizon,
        tuple(agv_step_edges(grid)),
        tuple(rack_step_edges(grid)),
        len(instance.targets),
    )


def edge_cost(e: TxEdge) -> int:
    """Flow cost of an AGV edge: zero for a pure stay, ``t + 1`` otherwise."""
    return 0 if e.is_stay else e.t + 1


def dump_edges(edges: list[TxEdge]) -> str:
    """Debug listing ``t vi_x vi_y li -> vo_x vo_y lo cost`` (``-`` for no layer)."""

    def lay(layer):
        return "-" if layer is None else str(layer)

    return "".join(
        f"{e.t} {e.vi.x} {e.vi.y} {lay(e.li)} -> {e.vo.x} {e.vo.y} {lay(e.lo)} {edge_cost(e)}\n"
        for e in edges
    )
