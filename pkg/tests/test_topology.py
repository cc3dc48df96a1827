import math

import numpy as np
import pytest

from fastdsom.topology import (
    KernelSchedule,
    NeighborhoodTable,
    PriorGraph,
    hex_grid,
    kernel_value,
    neighborhood_table,
    rect_grid,
)


def floyd_warshall(graph):
    m = graph.m_models
    dist = np.full((m, m), np.inf)
    np.fill_diagonal(dist, 0)
    for u, nbrs in enumerate(graph.adjacency):
        for v in nbrs:
            dist[u, v] = 1
    for k in range(m):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    return dist


def test_hex_single_vertex():
    g = hex_grid(1)
    assert g.m_models == 1 and g.gdist.tolist() == [[0]]


def test_hex_two_by_two():
    g = hex_grid(2)
    # index = r * m + q: (0,0)=0, (1,0)=1, (0,1)=2, (1,1)=3
    assert g.gdist[0, 3] == 2
    assert g.gdist[1, 2] == 1
    assert g.adjacency[0] == [1, 2]


@pytest.mark.parametrize("m", [2, 3, 5])
def test_rect_diameter(m):
    assert rect_grid(m).diameter == 2 * (m - 1)


def test_rect_examples():
    assert rect_grid(2).gdist[0, 3] == 2
    assert rect_grid(3).gdist[0, 8] == 4


@pytest.mark.parametrize("maker", [hex_grid, rect_grid])
@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_bfs_matches_floyd_warshall(maker, m):
    g = maker(m)
    assert np.array_equal(g.gdist, floyd_warshall(g))
    assert np.array_equal(g.gdist, g.gdist.T)
    assert np.all(np.diagonal(g.gdist) == 0)
    gd = g.gdist
    assert np.all(gd[:, :, None] <= gd[:, None, :] + gd.T[None, :, :])


def test_invalid_sizes():
    with pytest.raises(ValueError):
        hex_grid(0)
    with pytest.raises(ValueError):
        rect_grid(0)


def test_disconnected_graph_rejected():
    with pytest.raises(ValueError, match="connected"):
        PriorGraph.from_edges(3, [(0, 1)])


class TestOrders:
    @pytest.mark.parametrize("maker", [hex_grid, rect_grid])
    def test_bijection_starting_at_self(self, maker):
        g = maker(4)
        for j in range(g.m_models):
            order = g.representation_order(j)
            assert order[0] == j
            assert sorted(order.tolist()) == list(range(g.m_models))
            dists = g.gdist[order, j]
            assert np.all(np.diff(dists) >= 0)

    def test_rect_corner(self):
        g = rect_grid(3)
        order = g.representation_order(0).tolist()
        assert sorted(order[1:3]) == [1, 3]
        assert order == [0, 1, 3, 2, 4, 6, 5, 7, 8]

    def test_deterministic(self):
        assert np.array_equal(hex_grid(5).orders, hex_grid(5).orders)

    def test_ring_starts(self):
        g = hex_grid(3)
        for j in range(g.m_models):
            order, rs = g.orders[j], g.ring_starts[j]
            for r in range(g.diameter + 1):
                assert np.all(g.gdist[order[rs[r]:rs[r + 1]], j] == r)


class TestKernel:
    def test_zero_distance_is_one(self):
        sched = KernelSchedule(10, 3.0, 0.5)
        for l in range(1, 11):
            assert kernel_value(sched, l, 0) == 1.0

    def test_closed_form(self):
        sched = KernelSchedule(5, 2.0, 0.5)
        assert kernel_value(sched, 1, 2) == pytest.approx(math.exp(-0.5), rel=1e-15)
        assert kernel_value(sched, 1, 2) == pytest.approx(0.6065306597126334, rel=1e-15)

    def test_schedule_ends(self):
        sched = KernelSchedule(100, 4.0, 0.5)
        assert sched.sigma(1) == 4.0
        assert sched.sigma(100) == pytest.approx(0.5, rel=1e-14)
        assert KernelSchedule(1, 2.0, 0.5).sigma(1) == 2.0

    def test_monotone(self):
        sched = KernelSchedule(10, 3.0, 0.5)
        for l in (1, 5, 10):
            values = [kernel_value(sched, l, s) for s in range(6)]
            assert all(a > b for a, b in zip(values, values[1:]))

    def test_bad_epoch(self):
        with pytest.raises(ValueError):
            kernel_value(KernelSchedule(10, 3.0), 11, 1)
        with pytest.raises(ValueError):
            kernel_value(KernelSchedule(10, 3.0), 0, 1)

    def test_bad_schedule(self):
        with pytest.raises(ValueError):
            KernelSchedule(10, 0.4, 0.5)
        with pytest.raises(ValueError):
            KernelSchedule(0, 1.0, 0.5)

    def test_default_width(self):
        g = hex_grid(7)
        assert KernelSchedule.default_for(g).sigma_initial == g.diameter / 2
        assert KernelSchedule.default_for(hex_grid(1)).sigma_initial == 0.5


class TestNeighborhoodTable:
    def test_table_properties(self):
        g = hex_grid(4)
        sched = KernelSchedule.default_for(g, epochs=20)
        prev = None
        for l in range(1, 21):
            h = neighborhood_table(sched, g, l).h
            assert np.all(np.diagonal(h) == 1.0)
            assert np.array_equal(h, h.T)
            # diameter 6 with sigma >= 0.5 stays far from underflow
            assert np.all(h > 0)
            for u in range(g.m_models):
                for j in range(g.m_models):
                    assert h[u, j] == kernel_value(sched, l, g.gdist[u, j])
            if prev is not None:
                off = g.gdist >= 1
                assert np.all(h[off] <= prev[off])
            prev = h

    def test_non_increasing_along_order(self):
        g = rect_grid(4)
        sched = KernelSchedule.default_for(g, epochs=10)
        for l in (1, 10):
            h = neighborhood_table(sched, g, l).h
            for j in range(g.m_models):
                along = h[g.orders[j], j]
                assert np.all(np.diff(along) <= 0)

    def test_flat(self):
        assert np.all(NeighborhoodTable.flat(hex_grid(3)).h == 1.0)
