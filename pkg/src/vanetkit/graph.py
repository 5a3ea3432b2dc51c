"""Weighted undirected vehicular graph construction.

Nodes are vehicles from a snapshot; an edge exists whenever two vehicles
are within communication range r (inclusive).  Edge weights are the link
communication impedance combining topology load (degree x betweenness),
urban path loss, a short-range SNR benefit and a cell-handover penalty.
Per-vehicle impedance for the infrastructure model reuses the same
topology term plus an uplink-throughput term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .trace import VehicleSnapshot

__all__ = [
    "ImpedanceParams", "ThroughputParams", "VanetGraph", "NotAnEdgeError",
    "path_loss", "handover_count", "build_graph", "link_impedance",
    "edge_impedances", "weight_edges", "throughput", "vehicle_impedance",
]


class NotAnEdgeError(KeyError):
    """Queried node pair is not an edge of the graph."""


@dataclass(frozen=True)
class ImpedanceParams:
    """Scalar knobs of the link/vehicle impedance and cell geometry.

    The weighting coefficients and exponents are topology-characterized
    parameters; no normative values exist, the defaults below are the
    package's documented choice.  ``theta_m`` is the energy-noise-ratio
    reference in meters, so theta_m / d is dimensionless.  ``floor_r``
    keeps every edge weight strictly positive: the short-range benefit
    term can otherwise push an impedance to or below zero, which the
    shortest-path and LP layers cannot accept.
    """

    alpha: float = 1.0       # topology (degree x betweenness) weight
    beta: float = 0.01       # path-loss / throughput weight
    mu: float = 0.1          # short-range energy-noise benefit weight
    zeta: float = 0.5        # handover penalty weight
    upsilon: float = 1.0     # topology exponent
    psi: float = 1.0         # path-loss / throughput exponent
    xi: float = 1.0          # energy-noise exponent
    theta_m: float = 100.0   # energy-noise ratio scale, meters
    r: float = 500.0         # max communication range, meters
    r_c: float = 500.0       # cellular radius, meters
    f_c: float = 2000.0      # carrier frequency, MHz
    floor_r: float = 1e-6    # minimum admissible impedance

    def __post_init__(self):
        if self.r <= 0 or self.r_c <= 0 or self.f_c <= 0:
            raise ValueError("r, r_c and f_c must be positive")
        if min(self.alpha, self.beta, self.mu, self.zeta) < 0:
            raise ValueError("weight coefficients must be nonnegative")
        if self.floor_r <= 0:
            raise ValueError("floor_r must be positive")

    def with_(self, **kw) -> "ImpedanceParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class ThroughputParams:
    """Uplink rate model parameters (channel-estimation and energy-transfer
    time fractions plus a link budget)."""

    tau: float = 0.05          # channel estimation time fraction
    varsigma: float = 0.05     # wireless energy transfer time fraction
    p_tx_dbm: float = 23.0
    noise_dbm: float = -104.0
    shadow_sigma_db: float = 0.0  # optional log-normal shadowing, dB

    def __post_init__(self):
        if self.tau < 0 or self.varsigma < 0:
            raise ValueError("tau and varsigma must be nonnegative")
        if self.tau + self.varsigma >= 1.0:
            raise ValueError("tau + varsigma must be < 1")


def path_loss(d_km, f_c_mhz):
    """Urban line-of-sight path loss in dB: 42.6 + 26 log10(d) + 20 log10(f_c).

    d in kilometers, f_c in MHz.  Accepts scalars or numpy arrays.
    """
    d_km = np.asarray(d_km, dtype=float)
    f = np.asarray(f_c_mhz, dtype=float)
    if np.any(d_km <= 0) or np.any(f <= 0):
        raise ValueError("path_loss requires d > 0 and f_c > 0")
    out = 42.6 + 26.0 * np.log10(d_km) + 20.0 * np.log10(f)
    return float(out) if out.ndim == 0 else out


def _signed_power(base, exponent):
    """sign(base) * |base|**exponent; equals base**exponent for base >= 0.

    Path loss is negative for very short ranges at low carrier
    frequencies; a fractional exponent on a negative float would leave
    the reals, so powers act on the magnitude and keep the sign.
    """
    base = np.asarray(base, dtype=float)
    out = np.sign(base) * np.abs(base) ** exponent
    return float(out) if out.ndim == 0 else out


def _grid_crossings(a, b, s):
    """Number of integer multiples of s strictly inside the open interval (a, b)."""
    lo = np.minimum(a, b) / s
    hi = np.maximum(a, b) / s
    k_min = np.floor(lo) + 1.0
    k_max = np.ceil(hi) - 1.0
    return np.maximum(0.0, k_max - k_min + 1.0)


def handover_count(p_i, p_j, r_c: float) -> int:
    """Cell-boundary crossings along the open segment p_i -> p_j.

    Cells are squares of side sqrt(pi) * r_c anchored at the planar
    origin (the equal-area square surrogate for a disk of radius r_c;
    gaps and exact cell shapes are ignored).  A boundary met only at an
    endpoint, or run along exactly, is not a crossing.
    """
    if r_c <= 0:
        raise ValueError("r_c must be positive")
    s = math.sqrt(math.pi) * r_c
    xi, yi = p_i
    xj, yj = p_j
    return int(_grid_crossings(xi, xj, s) + _grid_crossings(yi, yj, s))


def handover_counts(pos_a: np.ndarray, pos_b: np.ndarray, r_c: float) -> np.ndarray:
    """Vectorized :func:`handover_count` over aligned endpoint arrays (m, 2)."""
    if r_c <= 0:
        raise ValueError("r_c must be positive")
    s = math.sqrt(math.pi) * r_c
    nx = _grid_crossings(pos_a[:, 0], pos_b[:, 0], s)
    ny = _grid_crossings(pos_a[:, 1], pos_b[:, 1], s)
    return (nx + ny).astype(np.int64)


class VanetGraph:
    """Undirected geometric graph with per-edge impedance weights.

    Node ids are 0..n-1 in sorted vehicle-id order.  Edges are stored
    once as (i, j) with i < j.  ``betweenness`` and ``weights`` start
    unset: impedance needs betweenness, so construction is two-pass.
    A completed instance is treated as immutable and may be shared
    across threads.
    """

    def __init__(self, ids: list[str], positions: np.ndarray,
                 edges: np.ndarray, dist: np.ndarray):
        self.ids = list(ids)
        self.positions = np.asarray(positions, dtype=float)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.dist = np.asarray(dist, dtype=float)
        self.n = len(self.ids)
        self.adjacency: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            self.adjacency[i].append(int(j))
            self.adjacency[j].append(int(i))
        for nbrs in self.adjacency:
            nbrs.sort()
        self.degrees = np.array([len(a) for a in self.adjacency], dtype=np.int64)
        self._edge_index = {(int(i), int(j)): e
                            for e, (i, j) in enumerate(self.edges)}
        self.betweenness: np.ndarray | None = None
        self.weights: np.ndarray | None = None      # per-edge impedance R_ij
        self.handovers: np.ndarray | None = None    # per-edge n_s

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> list[int]:
        return self.adjacency[i]

    def edge_id(self, i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        try:
            return self._edge_index[key]
        except KeyError:
            raise NotAnEdgeError(f"({i}, {j}) is not an edge") from None

    def has_edge(self, i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        return key in self._edge_index

    def edge_weight(self, i: int, j: int) -> float:
        if self.weights is None:
            raise RuntimeError("edge weights not assigned yet")
        return float(self.weights[self.edge_id(i, j)])

    def edge_dist(self, i: int, j: int) -> float:
        return float(self.dist[self.edge_id(i, j)])

    def largest_component(self) -> list[int]:
        """Sorted node ids of the largest connected component (ties to the
        component containing the smallest node id)."""
        seen = [False] * self.n
        best: list[int] = []
        for start in range(self.n):
            if seen[start]:
                continue
            comp = [start]
            seen[start] = True
            stack = [start]
            while stack:
                u = stack.pop()
                for v in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        comp.append(v)
                        stack.append(v)
            if len(comp) > len(best):
                best = comp
        return sorted(best)

    def subgraph(self, nodes: list[int]) -> "VanetGraph":
        """Node-induced subgraph; carries weights/handovers over, drops
        betweenness (it is not restriction-invariant)."""
        nodes = sorted(nodes)
        remap = {old: new for new, old in enumerate(nodes)}
        keep = [e for e, (i, j) in enumerate(self.edges)
                if int(i) in remap and int(j) in remap]
        edges = np.array([(remap[int(i)], remap[int(j)])
                          for i, j in self.edges[keep]], dtype=np.int64).reshape(-1, 2)
        sub = VanetGraph([self.ids[i] for i in nodes],
                         self.positions[nodes], edges, self.dist[keep])
        if self.weights is not None:
            sub.weights = self.weights[keep]
        if self.handovers is not None:
            sub.handovers = self.handovers[keep]
        return sub


def build_graph(snapshot: VehicleSnapshot, params: ImpedanceParams) -> VanetGraph:
    """Geometric graph over the snapshot: edge iff distance <= params.r.

    Pairs are found with a uniform cell grid of size r (each point is
    compared only against its 3x3 cell neighborhood), so construction is
    near-linear for city-scale snapshots.  Weights stay unset here.
    """
    if not snapshot.positions:
        raise ValueError("empty snapshot")
    ids = sorted(snapshot.positions)
    pos = np.array([snapshot.positions[v] for v in ids], dtype=float)
    n = len(ids)
    r = params.r

    cells: dict[tuple[int, int], list[int]] = {}
    cx = np.floor(pos[:, 0] / r).astype(np.int64)
    cy = np.floor(pos[:, 1] / r).astype(np.int64)
    for idx in range(n):
        cells.setdefault((int(cx[idx]), int(cy[idx])), []).append(idx)

    ei: list[np.ndarray] = []
    ej: list[np.ndarray] = []
    ed: list[np.ndarray] = []
    r2 = r * r
    for (gx, gy), members in cells.items():
        a = np.array(members, dtype=np.int64)
        # candidates: own cell plus the 8 surrounding cells
        cand: list[int] = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                cand.extend(cells.get((gx + dx, gy + dy), ()))
        b = np.array(cand, dtype=np.int64)
        diff = pos[a][:, None, :] - pos[b][None, :, :]
        d2 = np.einsum("abk,abk->ab", diff, diff)
        ii, jj = np.nonzero(d2 <= r2)
        src = a[ii]
        dst = b[jj]
        keep = src < dst  # each unordered pair once, no self loops
        if np.any(keep):
            ei.append(src[keep])
            ej.append(dst[keep])
            ed.append(np.sqrt(d2[ii[keep], jj[keep]]))

    if ei:
        src = np.concatenate(ei)
        dst = np.concatenate(ej)
        dists = np.concatenate(ed)
        order = np.lexsort((dst, src))
        edges = np.stack([src[order], dst[order]], axis=1)
        dists = dists[order]
    else:
        edges = np.empty((0, 2), dtype=np.int64)
        dists = np.empty(0, dtype=float)
    return VanetGraph(ids, pos, edges, dists)


def _edge_impedance_raw(kb_sum, d_m, n_s, p: ImpedanceParams):
    """Unclamped link impedance; shared by the scalar op and the bulk pass."""
    lu = path_loss(np.asarray(d_m, dtype=float) / 1000.0, p.f_c)
    val = (p.alpha * _signed_power(kb_sum, p.upsilon)
           + p.beta * _signed_power(lu, p.psi)
           - p.mu * _signed_power(p.theta_m / np.asarray(d_m, dtype=float), p.xi)
           + p.zeta * np.asarray(n_s, dtype=float))
    return val


def link_impedance(g: VanetGraph, i: int, j: int, params: ImpedanceParams) -> float:
    """Impedance of edge (i, j), clamped below at params.floor_r.

    Requires degrees and betweenness on ``g``.  Beyond range there is no
    edge at all (the infinite-impedance case never materializes).
    """
    e = g.edge_id(i, j)
    if g.betweenness is None:
        raise RuntimeError("betweenness not computed; run metrics.betweenness first")
    kb = (g.degrees[i] * g.betweenness[i] + g.degrees[j] * g.betweenness[j])
    n_s = handover_count(g.positions[i], g.positions[j], params.r_c)
    raw = _edge_impedance_raw(kb, g.dist[e], n_s, params)
    return float(max(params.floor_r, raw))


def edge_impedances(g: VanetGraph, params: ImpedanceParams,
                    n_jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge (handover counts, clamped impedances) without touching ``g``.

    Betweenness is computed on demand when alpha > 0 (with alpha == 0 the
    topology term vanishes and the pass is skipped).
    """
    if g.m == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=float)
    if params.alpha == 0.0:
        kb = np.zeros(g.n)
    else:
        b = g.betweenness
        if b is None:
            from . import metrics
            b = metrics.betweenness(g, n_jobs=n_jobs)
        kb = g.degrees * b
    i = g.edges[:, 0]
    j = g.edges[:, 1]
    ns = handover_counts(g.positions[i], g.positions[j], params.r_c)
    raw = _edge_impedance_raw(kb[i] + kb[j], g.dist, ns, params)
    return ns, np.maximum(params.floor_r, raw)


def weight_edges(g: VanetGraph, params: ImpedanceParams,
                 n_jobs: int = 1) -> VanetGraph:
    """Second construction pass: fill per-edge handover counts and weights
    (and betweenness, if it was needed and missing).  Mutates and returns ``g``.
    """
    if params.alpha != 0.0 and g.betweenness is None and g.m > 0:
        from . import metrics
        g.betweenness = metrics.betweenness(g, n_jobs=n_jobs)
    g.handovers, g.weights = edge_impedances(g, params, n_jobs=n_jobs)
    return g


def throughput(tp: ThroughputParams, d_km: float, f_c_mhz: float,
               rng: np.random.Generator | None = None) -> float:
    """Achievable uplink rate (1 - tau - varsigma) * log2(1 + gamma).

    gamma is the SINR from the deterministic link budget
    p_tx - L_u(d, f_c) - noise (dB); when ``shadow_sigma_db`` > 0 and an
    rng is supplied, one log-normal shadowing draw perturbs the budget.
    """
    loss_db = path_loss(d_km, f_c_mhz)
    if tp.shadow_sigma_db > 0 and rng is not None:
        loss_db += rng.normal(0.0, tp.shadow_sigma_db)
    gamma = 10.0 ** ((tp.p_tx_dbm - loss_db - tp.noise_dbm) / 10.0)
    return (1.0 - tp.tau - tp.varsigma) * math.log2(1.0 + gamma)


def vehicle_impedance(g: VanetGraph, i: int, rt: float,
                      params: ImpedanceParams) -> float:
    """Per-vehicle impedance alpha*(k_i B_i)^upsilon + beta*rt^psi."""
    if g.betweenness is None:
        raise RuntimeError("betweenness not computed; run metrics.betweenness first")
    kb = g.degrees[i] * g.betweenness[i]
    return float(params.alpha * _signed_power(kb, params.upsilon)
                 + params.beta * _signed_power(rt, params.psi))


def vehicle_impedances(g: VanetGraph, rt, params: ImpedanceParams) -> np.ndarray:
    """Vectorized :func:`vehicle_impedance`; ``rt`` scalar or per-node array."""
    if g.betweenness is None:
        raise RuntimeError("betweenness not computed; run metrics.betweenness first")
    kb = g.degrees * g.betweenness
    rt = np.broadcast_to(np.asarray(rt, dtype=float), (g.n,))
    return (params.alpha * _signed_power(kb, params.upsilon)
            + params.beta * _signed_power(rt, params.psi))


def graph_to_json(g: VanetGraph) -> str:
    doc = {
        "ids": g.ids,
        "positions": [[float(x), float(y)] for x, y in g.positions],
        "edges": [[int(i), int(j)] for i, j in g.edges],
        "dist": [float(d) for d in g.dist],
        "handovers": None if g.handovers is None else [int(h) for h in g.handovers],
        "weights": None if g.weights is None else [float(w) for w in g.weights],
        "betweenness": None if g.betweenness is None
                       else [float(b) for b in g.betweenness],
    }
    return json.dumps(doc, sort_keys=True)


def graph_from_json(text: str) -> VanetGraph:
    doc = json.loads(text)
    g = VanetGraph(doc["ids"], np.array(doc["positions"], dtype=float),
                   np.array(doc["edges"], dtype=np.int64).reshape(-1, 2),
                   np.array(doc["dist"], dtype=float))
    if doc.get("handovers") is not None:
        g.handovers = np.array(doc["handovers"], dtype=np.int64)
    if doc.get("weights") is not None:
        g.weights = np.array(doc["weights"], dtype=float)
    if doc.get("betweenness") is not None:
        g.betweenness = np.array(doc["betweenness"], dtype=float)
    return g


def edges_to_csv(g: VanetGraph) -> str:
    """Edge list CSV ``i,j,d_ij,n_s,R_ij`` (n_s/R blank until assigned)."""
    lines = ["i,j,d_ij,n_s,R_ij"]
    for e, (i, j) in enumerate(g.edges):
        ns = "" if g.handovers is None else str(int(g.handovers[e]))
        w = "" if g.weights is None else repr(float(g.weights[e]))
        lines.append(f"{int(i)},{int(j)},{float(g.dist[e])!r},{ns},{w}")
    return "\n".join(lines) + "\n"
