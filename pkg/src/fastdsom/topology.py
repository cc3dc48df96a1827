"""Prior lattice graphs, graph distances, evaluation orders and the neighborhood kernel."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

HEX_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))
RECT_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class PriorGraph:
    """Undirected connected graph over models 0..M-1 with all-pairs BFS distances."""

    def __init__(self, adjacency: list[list[int]], layout: str = "custom", side: int | None = None):
        self.adjacency = [sorted(set(nbrs)) for nbrs in adjacency]
        self.layout = layout
        self.side = side
        m = len(self.adjacency)
        if m == 0:
            raise ValueError("graph has no vertices")
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if not 0 <= v < m or v == u:
                    raise ValueError(f"invalid edge ({u}, {v})")
                if u not in self.adjacency[v]:
                    raise ValueError(f"edge ({u}, {v}) is not mirrored")
        gdist = np.stack([_bfs(self.adjacency, s) for s in range(m)])
        if np.any(gdist < 0):
            raise ValueError("graph is not connected")
        gdist.setflags(write=False)
        self.gdist = gdist

    @classmethod
    def from_edges(cls, m: int, edges, layout: str = "custom") -> "PriorGraph":
        adj: list[list[int]] = [[] for _ in range(m)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        return cls(adj, layout=layout)

    @property
    def m_models(self) -> int:
        return len(self.adjacency)

    @property
    def diameter(self) -> int:
        return int(self.gdist.max())

    @cached_property
    def orders(self) -> np.ndarray:
        """Row j is the evaluation order for model j (closest first, then by index)."""
        m = self.m_models
        out = np.empty((m, m), dtype=np.int64)
        idx = np.arange(m)
        for j in range(m):
            out[j] = np.lexsort((idx, self.gdist[:, j]))
        out.setflags(write=False)
        return out

    @cached_property
    def ring_starts(self) -> np.ndarray:
        """ring_starts[j, r] is the first position in ``orders[j]`` at graph distance >= r.

        Shape (M, diameter + 2); rings beyond the eccentricity of j are empty.
        """
        m, diam = self.m_models, self.diameter
        out = np.empty((m, diam + 2), dtype=np.int64)
        for j in range(m):
            dists = self.gdist[self.orders[j], j]
            out[j] = np.searchsorted(dists, np.arange(diam + 2), side="left")
        out.setflags(write=False)
        return out

    def representation_order(self, j: int) -> np.ndarray:
        if not 0 <= j < self.m_models:
            raise IndexError(f"model {j} out of range")
        return self.orders[j]

    def coordinates(self) -> list[tuple[int, int]]:
        if self.side is None:
            raise ValueError("graph has no grid coordinates")
        return [(q, r) for r in range(self.side) for q in range(self.side)]

    def __repr__(self):
        return f"PriorGraph(layout={self.layout!r}, M={self.m_models}, diameter={self.diameter})"


def _bfs(adjacency, source: int) -> np.ndarray:
    dist = np.full(len(adjacency), -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _grid(m: int, steps, layout: str) -> PriorGraph:
    if m < 1:
        raise ValueError("grid side must be at least 1")
    # Vertex (q, r) has index r * m + q.
    adj = []
    for r in range(m):
        for q in range(m):
            adj.append([(r + dr) * m + (q + dq) for dq, dr in steps
                        if 0 <= q + dq < m and 0 <= r + dr < m])
    return PriorGraph(adj, layout=layout, side=m)


def hex_grid(m: int) -> PriorGraph:
    """m x m hexagonal lattice in axial coordinates."""
    return _grid(m, HEX_STEPS, "hex")


def rect_grid(m: int) -> PriorGraph:
    """m x m rectangular lattice with 4-neighborhoods."""
    return _grid(m, RECT_STEPS, "rect")


def make_grid(layout: str, m: int) -> PriorGraph:
    if layout == "hex":
        return hex_grid(m)
    if layout == "rect":
        return rect_grid(m)
    raise ValueError(f"unknown grid layout {layout!r}")


@dataclass(frozen=True)
class KernelSchedule:
    """Gaussian neighborhood kernel whose width shrinks geometrically over the epochs."""

    epochs: int
    sigma_initial: float
    sigma_final: float = 0.5
    kernel_kind: str = "gaussian"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.sigma_initial >= self.sigma_final > 0:
            raise ValueError("need sigma_initial >= sigma_final > 0")
        if self.kernel_kind != "gaussian":
            raise ValueError(f"unsupported kernel {self.kernel_kind!r}")

    @classmethod
    def default_for(cls, graph: PriorGraph, epochs: int = 100, sigma_initial: float | None = None,
                    sigma_final: float = 0.5) -> "KernelSchedule":
        if sigma_initial is None:
            sigma_initial = max(graph.diameter / 2.0, sigma_final)
        return cls(epochs, float(sigma_initial), float(sigma_final))

    def sigma(self, epoch: int) -> float:
        self._check_epoch(epoch)
        if self.epochs == 1:
            return self.sigma_initial
        t = (epoch - 1) / (self.epochs - 1)
        return self.sigma_initial * (self.sigma_final / self.sigma_initial) ** t

    def _check_epoch(self, epoch: int) -> None:
        if not 1 <= epoch <= self.epochs:
            raise ValueError(f"epoch {epoch} outside 1..{self.epochs}")

    def values(self, epoch: int, max_distance: int) -> np.ndarray:
        """Kernel at graph distances 0..max_distance for the given epoch."""
        sigma = self.sigma(epoch)
        s = np.arange(max_distance + 1, dtype=np.float64)
        return np.exp(-(s * s) / (2.0 * sigma * sigma))

    def table(self, max_distance: int) -> np.ndarray:
        """(epochs, max_distance + 1) array of kernel values, row l-1 for epoch l."""
        return np.stack([self.values(l, max_distance) for l in range(1, self.epochs + 1)])


def kernel_value(schedule: KernelSchedule, epoch: int, s: float) -> float:
    if s < 0:
        raise ValueError("graph distance must be nonnegative")
    sigma = schedule.sigma(epoch)
    # same numpy exp as values() so single lookups and tables agree bit for bit
    return float(np.exp(-(s * s) / (2.0 * sigma * sigma)))


@dataclass(frozen=True)
class NeighborhoodTable:
    """h[u, j] = K(g(u, j)) for one epoch.

    ``kvalues[r]`` is the kernel at graph distance r; weighted sums are
    evaluated ring by ring from these values so that every scheme produces
    the same floating-point result.
    """

    epoch: int
    kvalues: np.ndarray
    gdist: np.ndarray = field(repr=False)

    @property
    def h(self) -> np.ndarray:
        return self.kvalues[self.gdist]

    @classmethod
    def flat(cls, graph: PriorGraph) -> "NeighborhoodTable":
        return cls(0, np.ones(graph.diameter + 1), graph.gdist)


def neighborhood_table(schedule: KernelSchedule, graph: PriorGraph, epoch: int) -> NeighborhoodTable:
    return NeighborhoodTable(epoch, schedule.values(epoch, graph.diameter), graph.gdist)
