"""Vehicle-to-vehicle traffic allocation.

Each source vehicle ships its share of a total demand Q to one
destination along its minimum-impedance Dijkstra path; paths are fixed,
so the allocation problem is a linear program over the per-commodity
quantities: minimize total path-impedance cost subject to the demand
being met and a uniform per-link capacity.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .graph import VanetGraph
from .optim import BarrierProblem, LinearProgram, SolveReport, barrier_solve, solve_lp


class NoPathError(ValueError):
    """Destination unreachable from a source."""


class InfeasibleAllocationError(RuntimeError):
    """Demand cannot be met under the link capacities."""

    def __init__(self, report: SolveReport):
        super().__init__("allocation infeasible: demand exceeds routable capacity")
        self.report = report


@dataclass
class TrafficProblem:
    sources: list[int]
    dest: int
    demand: float
    capacity: float
    paths: list[list[int]]        # node sequences, one per commodity
    edge_list: list[tuple[int, int]]  # union of edges used by any path
    incidence: np.ndarray         # {0,1}^(E x n): edge e used by commodity i
    costs: np.ndarray             # per-commodity path impedance sums


def dijkstra(g: VanetGraph, s: int, t: int) -> tuple[list[int], float]:
    """Minimum-impedance path from s to t.

    Ties break first on hop count, then on the lexicographically
    smallest node sequence, making routes reproducible across runs.
    Requires positive edge weights on ``g``.
    """
    if g.weights is None:
        raise RuntimeError("graph has no edge weights; run weight_edges first")
    if s == t:
        return [s], 0.0
    # heap keys (cost, hops, path) settle each node with its lexicographically
    # smallest optimal path; key order is preserved under path extension
    heap: list[tuple[float, int, tuple[int, ...]]] = [(0.0, 0, (s,))]
    settled = set()
    while heap:
        cost, hops, path = heapq.heappop(heap)
        node = path[-1]
        if node in settled:
            continue
        settled.add(node)
        if node == t:
            return list(path), cost
        for nbr in g.adjacency[node]:
            if nbr not in settled:
                w = g.edge_weight(node, nbr)
                heapq.heappush(heap, (cost + w, hops + 1, path + (nbr,)))
    raise NoPathError(f"node {t} unreachable from {s}")


def build_problem(g: VanetGraph, sources: list[int], dest: int,
                  demand: float, capacity: float) -> TrafficProblem:
    """Route every commodity, then assemble the incidence matrix and cost
    vector over the union of edges actually used (unused edges can never
    bind, so they are dropped)."""
    if demand <= 0:
        raise ValueError("demand must be positive")
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    paths: list[list[int]] = []
    costs: list[float] = []
    for s in sources:
        try:
            path, cost = dijkstra(g, s, dest)
        except NoPathError:
            raise NoPathError(f"source {s} cannot reach destination {dest}") from None
        paths.append(path)
        costs.append(cost)
    used: set[tuple[int, int]] = set()
    for path in paths:
        for u, v in zip(path, path[1:]):
            used.add((u, v) if u < v else (v, u))
    edge_list = sorted(used)
    edge_idx = {e: k for k, e in enumerate(edge_list)}
    inc = np.zeros((len(edge_list), len(sources)))
    for i, path in enumerate(paths):
        for u, v in zip(path, path[1:]):
            inc[edge_idx[(u, v) if u < v else (v, u)], i] = 1.0
    return TrafficProblem(sources=list(sources), dest=dest, demand=demand,
                          capacity=capacity, paths=paths, edge_list=edge_list,
                          incidence=inc, costs=np.array(costs))


@dataclass
class Allocation:
    x: np.ndarray
    cost: float
    edge_loads: dict[tuple[int, int], float]
    report: SolveReport


def _loads(p: TrafficProblem, x: np.ndarray) -> dict[tuple[int, int], float]:
    per_edge = p.incidence @ x
    return {e: float(per_edge[k]) for k, e in enumerate(p.edge_list)}


def allocate(p: TrafficProblem, method: str = "simplex",
             eps_gap: float = 1e-6) -> Allocation:
    """Optimal traffic split: min costsᵀx, x >= 0, 1ᵀx >= Q, loads <= c.

    ``method`` picks the exact simplex reference or the log-barrier
    solver (whose report carries the (n+E+1)/t gap certificate).
    """
    n = len(p.sources)
    if method == "simplex":
        a_ub = np.vstack([-np.ones((1, n)), p.incidence])
        b_ub = np.concatenate([[-p.demand], np.full(len(p.edge_list), p.capacity)])
        report = solve_lp(LinearProgram(c=p.costs, a_ub=a_ub, b_ub=b_ub))
    elif method == "barrier":
        bp = BarrierProblem(r_w=p.costs, a=p.incidence, q=p.demand, cap=p.capacity)
        report = barrier_solve(bp, eps_gap=eps_gap)
    else:
        raise ValueError(f"unknown method {method!r}")
    if report.status == "infeasible":
        raise InfeasibleAllocationError(report)
    if report.status != "optimal" or report.x is None:
        raise RuntimeError(f"allocation solve failed: {report.status}")
    x = np.asarray(report.x, dtype=float)
    return Allocation(x=x, cost=float(p.costs @ x),
                      edge_loads=_loads(p, x), report=report)
