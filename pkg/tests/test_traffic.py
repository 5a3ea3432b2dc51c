import numpy as np
import pytest

import _helpers as H
import _oracles as O
from vanetkit.traffic import (InfeasibleAllocationError, NoPathError,
                              allocate, build_problem, dijkstra)


def weighted(g, weights_by_edge):
    g.weights = np.array([weights_by_edge[(int(i), int(j))] for i, j in g.edges])
    return g


def random_weighted_graph(rng, n, p_edge=0.45):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.uniform() < p_edge]
    g = H.topology_graph(n, edges)
    g.weights = rng.uniform(0.2, 5.0, g.m)
    return g


class TestDijkstra:
    def test_source_equals_target(self):
        g = H.path_graph(3)
        g.weights = np.ones(2)
        assert dijkstra(g, 1, 1) == ([1], 0.0)

    def test_triangle_detour_wins(self):
        g = H.topology_graph(3, [(0, 2), (0, 1), (1, 2)])
        g = weighted(g, {(0, 2): 5.0, (0, 1): 2.0, (1, 2): 2.0})
        path, cost = dijkstra(g, 0, 2)
        assert path == [0, 1, 2]
        assert cost == pytest.approx(4.0)

    def test_unreachable(self):
        g = H.topology_graph(4, [(0, 1)])
        g.weights = np.ones(1)
        with pytest.raises(NoPathError):
            dijkstra(g, 0, 3)

    def test_requires_weights(self):
        with pytest.raises(RuntimeError):
            dijkstra(H.path_graph(3), 0, 2)

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(61)
        checked = 0
        for _ in range(40):
            n = int(rng.integers(3, 9))
            g = random_weighted_graph(rng, n)
            wmap = {(int(i), int(j)): float(w)
                    for (i, j), w in zip(g.edges, g.weights)}
            weight = lambda u, v: wmap[(u, v) if u < v else (v, u)]
            s, t = rng.choice(n, size=2, replace=False)
            want = O.dijkstra_bruteforce(g.adjacency, weight, int(s), int(t))
            if want is None:
                with pytest.raises(NoPathError):
                    dijkstra(g, int(s), int(t))
                continue
            path, cost = dijkstra(g, int(s), int(t))
            assert cost == pytest.approx(want[1], abs=1e-9)
            assert path == want[0]
            checked += 1
        assert checked >= 20

    def test_ties_break_to_fewer_hops_then_lexicographic(self):
        # 0-3 direct (cost 2) vs 0-1-3 and 0-2-3 (cost 1+1): direct has
        # fewer hops at equal cost; removing it, 0-1-3 beats 0-2-3
        g = H.topology_graph(4, [(0, 3), (0, 1), (1, 3), (0, 2), (2, 3)])
        g = weighted(g, {(0, 3): 2.0, (0, 1): 1.0, (1, 3): 1.0,
                         (0, 2): 1.0, (2, 3): 1.0})
        path, cost = dijkstra(g, 0, 3)
        assert path == [0, 3] and cost == pytest.approx(2.0)
        g2 = H.topology_graph(4, [(0, 1), (1, 3), (0, 2), (2, 3)])
        g2 = weighted(g2, {(0, 1): 1.0, (1, 3): 1.0, (0, 2): 1.0, (2, 3): 1.0})
        path2, _ = dijkstra(g2, 0, 3)
        assert path2 == [0, 1, 3]


class TestBuildProblem:
    def test_single_commodity(self):
        g = H.topology_graph(2, [(0, 1)])
        g.weights = np.array([7.0])
        p = build_problem(g, [0], 1, demand=3.0, capacity=5.0)
        assert p.incidence.tolist() == [[1.0]]
        assert p.costs.tolist() == [7.0]
        assert p.paths == [[0, 1]]

    def test_shared_bottleneck_row(self):
        # sources 0 and 1 both funnel through edge (2, 3)
        g = H.topology_graph(4, [(0, 2), (1, 2), (2, 3)])
        g = weighted(g, {(0, 2): 1.0, (1, 2): 1.0, (2, 3): 1.0})
        p = build_problem(g, [0, 1], 3, demand=1.0, capacity=9.0)
        row = p.incidence[p.edge_list.index((2, 3))]
        assert row.tolist() == [1.0, 1.0]

    def test_incidence_matches_path_scan(self):
        rng = np.random.default_rng(62)
        for _ in range(30):
            n = int(rng.integers(4, 11))
            g = random_weighted_graph(rng, n, p_edge=0.6)
            dest = int(rng.integers(n))
            cands = [v for v in range(n) if v != dest]
            rng.shuffle(cands)
            srcs = cands[:int(rng.integers(1, min(4, len(cands)) + 1))]
            try:
                p = build_problem(g, srcs, dest, demand=2.0, capacity=4.0)
            except NoPathError:
                continue
            for i, path in enumerate(p.paths):
                assert path[0] == srcs[i] and path[-1] == dest
                on_path = {(min(u, v), max(u, v)) for u, v in zip(path, path[1:])}
                for k, e in enumerate(p.edge_list):
                    assert p.incidence[k, i] == (1.0 if e in on_path else 0.0)
                # cost equals the sum of weights along the path
                wmap = {(int(a), int(b)): float(w)
                        for (a, b), w in zip(g.edges, g.weights)}
                want = sum(wmap[e] for e in on_path)
                assert p.costs[i] == pytest.approx(want, abs=1e-9)

    def test_unreachable_source_named(self):
        g = H.topology_graph(4, [(0, 1)])
        g.weights = np.ones(1)
        with pytest.raises(NoPathError, match="source 3"):
            build_problem(g, [0, 3], 1, demand=1.0, capacity=1.0)


def two_path_instance():
    # disjoint 2-hop routes with total impedance 1 and 2
    g = H.topology_graph(4, [(0, 3), (1, 3)])
    g = weighted(g, {(0, 3): 1.0, (1, 3): 2.0})
    return build_problem(g, [0, 1], 3, demand=10.0, capacity=6.0)


class TestAllocate:
    def test_single_commodity_fills_demand(self):
        g = H.topology_graph(2, [(0, 1)])
        g.weights = np.array([7.0])
        p = build_problem(g, [0], 1, demand=3.0, capacity=5.0)
        alloc = allocate(p)
        assert alloc.x == pytest.approx([3.0], abs=1e-9)
        assert alloc.cost == pytest.approx(21.0, abs=1e-8)

    def test_two_disjoint_paths_hand_lp(self):
        alloc = allocate(two_path_instance())
        assert alloc.x == pytest.approx([6.0, 4.0], abs=1e-9)
        assert alloc.cost == pytest.approx(14.0, abs=1e-9)

    def test_barrier_agrees_with_simplex(self):
        p = two_path_instance()
        exact = allocate(p, method="simplex")
        approx = allocate(p, method="barrier", eps_gap=1e-3)
        assert abs(approx.cost - exact.cost) <= approx.report.gap_bound + 1e-6

    def test_matches_lp_oracle_on_random_instances(self):
        rng = np.random.default_rng(63)
        done = 0
        while done < 40:
            n = int(rng.integers(1, 5))
            e = int(rng.integers(1, 7))
            inc = (rng.uniform(0, 1, (e, n)) < 0.5).astype(float)
            inc[rng.integers(e), rng.integers(n)] = 1.0
            costs = rng.uniform(0.5, 4.0, n)
            x0 = rng.uniform(0.4, 2.0, n)
            q = float(0.8 * x0.sum())
            cap = float(np.max(inc @ x0) * 1.4 + 0.3)
            from vanetkit.traffic import TrafficProblem
            p = TrafficProblem(sources=list(range(n)), dest=n, demand=q,
                               capacity=cap, paths=[[i, n] for i in range(n)],
                               edge_list=[(i, n) for i in range(e)],
                               incidence=inc, costs=costs)
            alloc = allocate(p)
            a_full = np.vstack([-np.ones((1, n)), inc])
            b_full = np.concatenate([[-q], np.full(e, cap)])
            want = O.lp_vertex_enumeration(
                costs, a_full, b_full, np.zeros(n), np.full(n, q + cap + 5.0))
            assert want is not None
            assert alloc.cost == pytest.approx(want, abs=1e-8)
            done += 1

    def test_demand_met_exactly_at_optimum(self):
        rng = np.random.default_rng(64)
        for _ in range(20):
            p = two_path_instance()
            scale = float(rng.uniform(0.5, 3.0))
            p.costs = p.costs * scale
            alloc = allocate(p)
            assert float(alloc.x.sum()) == pytest.approx(p.demand, abs=1e-8)

    def test_cost_scales_linearly_argmin_invariant(self):
        p = two_path_instance()
        base = allocate(p)
        p.costs = p.costs * 3.0
        scaled = allocate(p)
        assert scaled.cost == pytest.approx(3.0 * base.cost, rel=1e-9)
        assert scaled.x == pytest.approx(base.x, abs=1e-8)

    def test_edge_loads_respect_capacity(self):
        alloc = allocate(two_path_instance())
        for load in alloc.edge_loads.values():
            assert load <= 6.0 + 1e-8

    def test_infeasible_raises_with_report(self):
        g = H.topology_graph(2, [(0, 1)])
        g.weights = np.array([1.0])
        p = build_problem(g, [0], 1, demand=10.0, capacity=1.0)
        with pytest.raises(InfeasibleAllocationError) as exc:
            allocate(p)
        assert exc.value.report.status == "infeasible"
        with pytest.raises(InfeasibleAllocationError):
            allocate(p, method="barrier")
