"""Information-source selection on the hybrid communication model.

A packet from source s to a uniformly random destination transits
intermediate vehicles of hop-count shortest paths.  The conditional
transit probabilities form a matrix A[i, s]; the worst impedance-scaled
transit load max_i R_i (A p)_i caps the sustainable packet rate, and
choosing the source distribution p to minimize that load is a small
linear program.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import VanetGraph
from .optim import LinearProgram, SolveReport, solve_lp


class DegenerateGraphError(ValueError):
    """Fewer than 3 nodes: no transit structure exists."""


@dataclass
class SourceProblem:
    """Transit matrix, per-vehicle impedances and the throughput scale.

    ``node_ids`` maps matrix rows/columns back to graph node indices;
    when the graph was disconnected the problem covers only the largest
    component.
    """

    a: np.ndarray          # a[i, s] = P(packet from s transits i)
    impedances: np.ndarray  # diagonal of R, > 0
    scale: float = 1.0      # throughput constant C; rescales capacity only
    node_ids: list[int] | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.impedances = np.asarray(self.impedances, dtype=float)
        n = self.a.shape[0]
        if self.a.shape != (n, n) or self.impedances.shape != (n,):
            raise ValueError("matrix/impedance shape mismatch")
        if np.any(self.impedances <= 0):
            raise ValueError("vehicle impedances must be positive")


@dataclass
class SourceSolution:
    p: np.ndarray
    lam: float            # optimal worst transit load
    capacity: float       # scale / lam, inf when lam == 0
    report: SolveReport

    @property
    def infinite_capacity(self) -> bool:
        return not math.isfinite(self.capacity)


def _transit_column(g: VanetGraph, s: int) -> np.ndarray:
    """Pair dependencies delta_s(i) = sum over targets of n_st^i / g_st,
    accumulated Brandes-style over the shortest-path DAG of s."""
    n = g.n
    dist = np.full(n, -1, dtype=np.int64)
    sigma = np.zeros(n)
    preds: list[list[int]] = [[] for _ in range(n)]
    dist[s] = 0
    sigma[s] = 1.0
    order: list[int] = []
    queue = deque([s])
    while queue:
        v = queue.popleft()
        order.append(v)
        dv1 = dist[v] + 1
        for w in g.adjacency[v]:
            if dist[w] < 0:
                dist[w] = dv1
                queue.append(w)
            if dist[w] == dv1:
                sigma[w] += sigma[v]
                preds[w].append(v)
    delta = np.zeros(n)
    for w in reversed(order):
        coeff = (1.0 + delta[w]) / sigma[w]
        for v in preds[w]:
            delta[v] += sigma[v] * coeff
    delta[s] = 0.0
    return delta


def pass_matrix(g: VanetGraph) -> np.ndarray:
    """Conditional transit probabilities p(i|s) on hop-count shortest paths.

    Entry [i, s] is (1/(N-1)) * sum over targets t (t != s, t != i) of
    the fraction of shortest s-t paths through i; the diagonal is 0.  On
    a disconnected graph the matrix covers the largest component only
    (rows/columns follow its sorted node ids) and a warning is issued.
    """
    if g.n < 3:
        raise DegenerateGraphError("transit probabilities need at least 3 nodes")
    comp = g.largest_component()
    if len(comp) < g.n:
        warnings.warn("graph is disconnected; using the largest component "
                      f"({len(comp)} of {g.n} nodes)")
        g = g.subgraph(comp)
        if g.n < 3:
            raise DegenerateGraphError("largest component has fewer than 3 nodes")
    n = g.n
    a = np.zeros((n, n))
    for s in range(n):
        a[:, s] = _transit_column(g, s)
    return a / (n - 1.0)


def pass_probability(a: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Unconditional transit probabilities q = A p for source distribution p."""
    return np.asarray(a, dtype=float) @ np.asarray(p, dtype=float)


def capacity(a: np.ndarray, p: np.ndarray, impedances: np.ndarray,
             scale: float = 1.0) -> float:
    """Network capacity scale / max_i R_i q_i.

    A zero maximum (no vehicle ever transits, e.g. a complete graph)
    yields float('inf'): unbounded rate rather than an error.
    """
    worst = float(np.max(impedances * pass_probability(a, p)))
    if worst <= 0.0:
        return float("inf")
    return scale / worst


def build_source_problem(g: VanetGraph, impedances: np.ndarray,
                         scale: float = 1.0) -> SourceProblem:
    """Assemble the selection problem, restricting impedances alongside the
    transit matrix when the graph is disconnected."""
    comp = g.largest_component()
    a = pass_matrix(g)
    nodes = comp if len(comp) < g.n else list(range(g.n))
    imp = np.asarray(impedances, dtype=float)[nodes]
    return SourceProblem(a=a, impedances=imp, scale=scale, node_ids=nodes)


def optimize_sources(prob: SourceProblem) -> SourceSolution:
    """Min-max source distribution via the exact LP.

    Variables (p, L): minimize L subject to R A p <= L 1, 1ᵀp = 1,
    p >= 0.  L* == 0 means no distribution mass ever transits anything,
    reported as infinite capacity.
    """
    n = prob.a.shape[0]
    ra = prob.impedances[:, None] * prob.a
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.hstack([ra, -np.ones((n, 1))])
    b_ub = np.zeros(n)
    a_eq = np.concatenate([np.ones(n), [0.0]]).reshape(1, -1)
    rep = solve_lp(LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub,
                                 a_eq=a_eq, b_eq=np.ones(1)))
    if rep.status != "optimal" or rep.x is None:
        raise RuntimeError(f"source selection LP failed: {rep.status}")
    p = np.asarray(rep.x[:n], dtype=float)
    lam = float(rep.x[-1])
    cap = float("inf") if lam <= 1e-12 else prob.scale / lam
    return SourceSolution(p=p, lam=lam, capacity=cap, report=rep)
