"""Single-step entry points into the engine, one per algorithmic operation.

These wrap the compiled kernels with plain-array inputs so each step can be
checked in isolation. Partial-sum tables here are indexed ``D[u, k]``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..dissimilarity import DissimilarityMatrix
from ..topology import NeighborhoodTable, PriorGraph
from . import kernels as K


def _ints(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def _graph_bits(graph: PriorGraph):
    return (np.ascontiguousarray(graph.orders), np.ascontiguousarray(graph.ring_starts),
            graph.gdist.max(axis=1).astype(np.int64))


def affect_one(i: int, prototypes, matrix: DissimilarityMatrix, graph: PriorGraph) -> int:
    protos = _ints(prototypes)
    orders, ring_starts, ecc = _graph_bits(graph)
    m = protos.shape[0]
    return int(K.affect_one(matrix.values[i], protos, orders, ring_starts, ecc,
                            np.empty(m, dtype=np.int64), np.empty(m)))


def affectation_phase(prev_assignments, prototypes, matrix: DissimilarityMatrix, graph: PriorGraph):
    """Returns ``(assignments, nb_switch, changed, clusters)``.

    ``prev_assignments`` may hold -1 for observations never assigned. Clusters
    list the model's prototype first when it is a member, then increasing index.
    """
    protos = _ints(prototypes)
    prev = _ints(prev_assignments)
    n, m = matrix.n, protos.shape[0]
    orders, ring_starts, ecc = _graph_bits(graph)
    assign = np.empty(n, dtype=np.int64)
    changed = np.zeros(m, dtype=np.bool_)
    moved = np.empty(n, dtype=np.int64)
    nb_switch = K.affectation(matrix.values, protos, prev, assign, orders, ring_starts, ecc, changed, moved)
    members = np.empty(n, dtype=np.int64)
    starts = np.zeros(m + 1, dtype=np.int64)
    K.build_clusters(assign, protos, members, starts)
    clusters = [members[starts[u]:starts[u + 1]].copy() for u in range(m)]
    return assign, int(nb_switch), changed, clusters


def compute_D_full(assignments, matrix: DissimilarityMatrix, m: int) -> np.ndarray:
    """D[u, k] = sum of d(x_i, x_k) over observations i assigned to u."""
    assign = _ints(assignments)
    Dt = np.zeros((matrix.n, m))
    K.compute_partials(matrix.values, assign, Dt)
    return np.ascontiguousarray(Dt.T)


def update_D_incremental(D: np.ndarray, moves: Sequence[tuple[int, int, int]], matrix: DissimilarityMatrix):
    """Apply ``(i, old, new)`` moves to a copy of D; returns ``(D, additions)``."""
    if any(old == new for _, old, new in moves):
        raise ValueError("a move must change the cluster")
    Dt = np.ascontiguousarray(np.asarray(D, dtype=np.float64).T)
    n = matrix.n
    moved = _ints([i for i, _, _ in moves])
    prev = np.full(n, -1, dtype=np.int64)
    cur = np.full(n, -1, dtype=np.int64)
    # Each observation moves at most once per epoch; apply in the given order.
    adds = 0
    for idx, (i, old, new) in enumerate(moves):
        prev[i], cur[i] = old, new
        adds += K.individual_update(matrix.values, moved[idx:idx + 1], 1, prev, cur, Dt)
    return np.ascontiguousarray(Dt.T), int(adds)


def s_direct(j: int, k: int, assignments, matrix: DissimilarityMatrix, h: NeighborhoodTable) -> float:
    """S(j, k) straight from the data: weighted sum over every observation."""
    return float(K.s_direct_one(matrix.values, _ints(assignments), _ints(h.gdist), h.kvalues, j, k,
                                np.empty(h.kvalues.shape[0])))


def s_from_partials(j: int, k: int, D: np.ndarray, h: NeighborhoodTable) -> float:
    """S(j, k) from the M partial sums of column k."""
    Dt = np.ascontiguousarray(np.asarray(D, dtype=np.float64).T)
    return float(K.s_partial_one(Dt, _ints(h.gdist), h.kvalues, j, k, np.empty(h.kvalues.shape[0])))


def repr_brute_force(j: int, assignments, matrix: DissimilarityMatrix, h: NeighborhoodTable) -> int:
    assign = _ints(assignments)
    ring_of = _ints(h.gdist[assign, j])
    return int(K.repr_brute_one(matrix.values, ring_of, h.kvalues, np.empty(h.kvalues.shape[0])))


def repr_partial_sums(j: int, D: np.ndarray, h: NeighborhoodTable) -> int:
    Dt = np.ascontiguousarray(np.asarray(D, dtype=np.float64).T)
    return int(K.repr_partial_one(Dt, _ints(h.gdist[j]), h.kvalues, np.empty(h.kvalues.shape[0]), False))


def repr_early_stopping(j: int, D: np.ndarray, h: NeighborhoodTable, order, clusters: Sequence[Sequence[int]],
                        warm_start: int | None = None, return_work: bool = False):
    """Ordered early-stopping search for model j.

    ``order`` is the model evaluation order for j (closest first) and
    ``clusters`` the current clusters. When ``warm_start`` is given it is moved
    to the front of its cluster. With ``return_work`` the result is
    ``(k, fully_evaluated_candidates, terms_accumulated)``.
    """
    Dt = np.ascontiguousarray(np.asarray(D, dtype=np.float64).T)
    order = _ints(order)
    gdist = np.asarray(h.gdist)
    ring = gdist[order, j]
    ecc_j = int(ring.max())
    rstart = _ints(np.searchsorted(ring, np.arange(ecc_j + 2), side="left"))
    lists = [list(c) for c in clusters]
    if warm_start is not None:
        for c in lists:
            if warm_start in c:
                c.remove(warm_start)
                c.insert(0, warm_start)
                break
    members = _ints([i for c in lists for i in c])
    starts = _ints(np.concatenate([[0], np.cumsum([len(c) for c in lists])]))
    counters = np.zeros(2, dtype=np.int64)
    k = int(K.repr_earlystop_one(Dt, h.kvalues, order, rstart, ecc_j, members, starts, np.inf, False, counters))
    if return_work:
        return k, int(counters[0]), int(counters[1])
    return k
