"""Command-line pipeline: generate or ingest traces, build weighted
graphs, compute network metrics, place stations, allocate traffic,
select sources, and run the carrier-frequency / cell-radius sweeps.

Every command writes plain CSV/JSON into --out; plotting is external.
Outputs are byte-identical under a fixed seed and config.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import clustering, metrics, sources, trace, traffic
from .graph import (ImpedanceParams, ThroughputParams, build_graph,
                    edge_impedances, edges_to_csv, graph_from_json,
                    graph_to_json, handover_counts, throughput,
                    vehicle_impedances, weight_edges)
from .trace import BoundingBox
from .traffic import InfeasibleAllocationError, NoPathError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2

DEFAULT_BBOX = (116.25, 116.55, 39.8, 40.05)


@dataclass
class RunConfig:
    """Flat bag of every knob; config file values override these defaults
    and command-line flags override both."""

    seed: int = 0
    out: str = "out"
    jobs: int = 1
    # bounding box (degrees)
    bbox_lon_min: float = DEFAULT_BBOX[0]
    bbox_lon_max: float = DEFAULT_BBOX[1]
    bbox_lat_min: float = DEFAULT_BBOX[2]
    bbox_lat_max: float = DEFAULT_BBOX[3]
    # synthetic generator
    n: int = 2000
    clusters: int = 5
    background_frac: float = 0.1
    sigma_frac: float = 0.01
    # snapshot extraction
    at: float = 0.0
    window: float = 60.0
    # impedance parameters (non-normative defaults)
    alpha: float = 1.0
    beta: float = 0.01
    mu: float = 0.1
    zeta: float = 0.5
    upsilon: float = 1.0
    psi: float = 1.0
    xi: float = 1.0
    theta_m: float = 100.0
    r: float = 500.0
    r_c: float = 500.0
    f_c: float = 2000.0
    floor_r: float = 1e-6
    # throughput model
    tau: float = 0.05
    varsigma: float = 0.05
    p_tx_dbm: float = 23.0
    noise_dbm: float = -104.0
    shadow_sigma_db: float = 0.0
    uplink_d_m: float = 0.0  # 0: use r_c / 2
    # clustering
    k: int = 5
    epsilon: float = 0.5
    seed_index: int = -1  # -1: min-impedance seed
    # allocation
    demand: float = 10.0
    capacity: float = 6.0
    method: str = "simplex"
    eps_gap: float = 1e-6
    # source selection
    scale: float = 1.0
    # metrics
    k_min: int = 1
    # sweeps
    f_c_list: tuple = (500.0, 1000.0, 1500.0, 2000.0, 2500.0)
    r_list: tuple = (200.0, 400.0, 600.0, 800.0, 1000.0)
    r_c_list: tuple = (125.0, 250.0, 500.0, 1000.0, 2000.0)

    def bbox(self) -> BoundingBox:
        return BoundingBox(self.bbox_lon_min, self.bbox_lon_max,
                           self.bbox_lat_min, self.bbox_lat_max)

    def impedance_params(self, **overrides) -> ImpedanceParams:
        base = dict(alpha=self.alpha, beta=self.beta, mu=self.mu, zeta=self.zeta,
                    upsilon=self.upsilon, psi=self.psi, xi=self.xi,
                    theta_m=self.theta_m, r=self.r, r_c=self.r_c, f_c=self.f_c,
                    floor_r=self.floor_r)
        base.update(overrides)
        return ImpedanceParams(**base)

    def throughput_params(self) -> ThroughputParams:
        return ThroughputParams(tau=self.tau, varsigma=self.varsigma,
                                p_tx_dbm=self.p_tx_dbm, noise_dbm=self.noise_dbm,
                                shadow_sigma_db=self.shadow_sigma_db)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def load_config(path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if path:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        for key, val in doc.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            if isinstance(val, list):
                val = tuple(float(v) for v in val)
            setattr(cfg, key, val)
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    return cfg


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _float_list(text: str) -> tuple:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


# ---------------------------------------------------------------- commands

def generate_synthetic(n: int, clusters: int, seed: int, bbox: BoundingBox,
                       background_frac: float = 0.1,
                       sigma_frac: float = 0.01) -> str:
    """Synthetic trace: Gaussian downtown hot spots over a uniform
    background, one record per vehicle at t=0, in trace CSV format."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if clusters < 1:
        raise ValueError("clusters must be >= 1")
    rng = np.random.default_rng(seed)
    dlon = bbox.lon_max - bbox.lon_min
    dlat = bbox.lat_max - bbox.lat_min
    sigma = sigma_frac * min(dlon, dlat)
    centers = np.stack([
        rng.uniform(bbox.lon_min + 0.2 * dlon, bbox.lon_max - 0.2 * dlon, clusters),
        rng.uniform(bbox.lat_min + 0.2 * dlat, bbox.lat_max - 0.2 * dlat, clusters),
    ], axis=1)
    width = len(str(n - 1))
    lines = []
    for i in range(n):
        if rng.uniform() < background_frac:
            lon = rng.uniform(bbox.lon_min, bbox.lon_max)
            lat = rng.uniform(bbox.lat_min, bbox.lat_max)
        else:
            c = centers[rng.integers(clusters)]
            lon = float(np.clip(rng.normal(c[0], sigma), bbox.lon_min, bbox.lon_max))
            lat = float(np.clip(rng.normal(c[1], sigma), bbox.lat_min, bbox.lat_max))
        lines.append(f"v{i:0{width}d},0.0,{lon!r},{lat!r}")
    return "\n".join(lines) + "\n"


def cmd_gen(cfg: RunConfig) -> int:
    text = generate_synthetic(cfg.n, cfg.clusters, cfg.seed, cfg.bbox(),
                              cfg.background_frac, cfg.sigma_frac)
    _write(Path(cfg.out) / "trace.csv", text)
    return EXIT_OK


def cmd_ingest(cfg: RunConfig, trace_path: str) -> int:
    records, malformed = trace.scan_trace(trace_path, cfg.bbox())
    if malformed:
        print(f"warning: skipped {malformed} malformed line(s)", file=sys.stderr)
    if not records:
        raise trace.EmptyDatasetError(f"{trace_path}: no valid record in box")
    snap = trace.snapshot(records, cfg.at, cfg.window)
    _write(Path(cfg.out) / "snapshot.csv", trace.snapshot_to_csv(snap))
    _write(Path(cfg.out) / "snapshot.json", trace.snapshot_to_json(snap))
    print(f"snapshot: {len(snap)} vehicles at t={cfg.at}")
    return EXIT_OK


def _load_snapshot(path: str) -> trace.VehicleSnapshot:
    return trace.snapshot_from_json(Path(path).read_text(encoding="utf-8"))


def _load_graph(path: str):
    return graph_from_json(Path(path).read_text(encoding="utf-8"))


def cmd_graph(cfg: RunConfig, snapshot_path: str) -> int:
    snap = _load_snapshot(snapshot_path)
    params = cfg.impedance_params()
    g = build_graph(snap, params)
    weight_edges(g, params, n_jobs=cfg.jobs)
    _write(Path(cfg.out) / "graph.json", graph_to_json(g) + "\n")
    _write(Path(cfg.out) / "edges.csv", edges_to_csv(g))
    print(f"graph: {g.n} nodes, {g.m} edges")
    return EXIT_OK


def cmd_metrics(cfg: RunConfig, graph_path: str) -> int:
    g = _load_graph(graph_path)
    if g.betweenness is None:
        g.betweenness = metrics.betweenness(g, n_jobs=cfg.jobs)
    cc = metrics.clustering_coefficients(g)
    cc2 = metrics.two_neighbor_clusterings(g)
    lines = ["id,k,C,C2,B"]
    for i, vid in enumerate(g.ids):
        lines.append(f"{vid},{int(g.degrees[i])},{float(cc[i])!r},"
                     f"{float(cc2[i])!r},{float(g.betweenness[i])!r}")
    _write(Path(cfg.out) / "metrics.csv", "\n".join(lines) + "\n")
    summ = metrics.summary(g, cfg.k_min)
    _write(Path(cfg.out) / "summary.json",
           json.dumps(summ, sort_keys=True, indent=1) + "\n")
    print(f"metrics: C_bar={summ['C_bar']:.4f} l_bar={summ['l_bar']}")
    return EXIT_OK


def _vehicle_impedances(cfg: RunConfig, g) -> np.ndarray:
    """Per-vehicle impedance under the uplink model; the station distance
    defaults to half the cell radius (stations are not placed yet)."""
    params = cfg.impedance_params()
    if g.betweenness is None and params.alpha != 0.0 and g.n >= 3:
        g.betweenness = metrics.betweenness(g, n_jobs=cfg.jobs)
    if g.betweenness is None:
        g.betweenness = np.zeros(g.n)
    d_m = cfg.uplink_d_m if cfg.uplink_d_m > 0 else cfg.r_c / 2.0
    rt = throughput(cfg.throughput_params(), d_m / 1000.0, cfg.f_c)
    return vehicle_impedances(g, rt, params)


def cmd_cluster(cfg: RunConfig, graph_path: str) -> int:
    g = _load_graph(graph_path)
    imp = _vehicle_impedances(cfg, g)
    conf = clustering.ClusterConfig(
        k=cfg.k, epsilon=cfg.epsilon,
        seed_index=None if cfg.seed_index < 0 else cfg.seed_index)
    res = clustering.cluster(g.positions, imp, conf)
    lines = ["vehicle_id,x,y,label"]
    for i, vid in enumerate(g.ids):
        x, y = g.positions[i]
        lines.append(f"{vid},{float(x)!r},{float(y)!r},{int(res.labels[i])}")
    _write(Path(cfg.out) / "clusters.csv", "\n".join(lines) + "\n")
    doc = {"k": cfg.k, "epsilon": cfg.epsilon,
           "centers": [g.ids[c] for c in res.centers],
           "center_indices": res.centers, "radius": res.radius}
    _write(Path(cfg.out) / "clusters.json",
           json.dumps(doc, sort_keys=True, indent=1) + "\n")
    print(f"cluster: k={cfg.k} radius={res.radius:.3f}")
    return EXIT_OK


def cmd_allocate(cfg: RunConfig, graph_path: str, src_ids: str, dest_id: str) -> int:
    g = _load_graph(graph_path)
    index = {vid: i for i, vid in enumerate(g.ids)}
    try:
        src = [index[tok] for tok in src_ids.split(",") if tok]
        dest = index[dest_id]
    except KeyError as exc:
        raise ValueError(f"unknown vehicle id {exc.args[0]!r}") from None
    prob = traffic.build_problem(g, src, dest, cfg.demand, cfg.capacity)
    alloc = traffic.allocate(prob, method=cfg.method, eps_gap=cfg.eps_gap)
    lines = ["commodity,source,x_i,path"]
    for i, s in enumerate(prob.sources):
        path = "->".join(g.ids[v] for v in prob.paths[i])
        lines.append(f"{i},{g.ids[s]},{float(alloc.x[i])!r},{path}")
    _write(Path(cfg.out) / "allocation.csv", "\n".join(lines) + "\n")
    loads = ["u,v,load,capacity"]
    for (u, v), load in sorted(alloc.edge_loads.items()):
        loads.append(f"{g.ids[u]},{g.ids[v]},{load!r},{cfg.capacity!r}")
    _write(Path(cfg.out) / "edge_loads.csv", "\n".join(loads) + "\n")
    doc = json.loads(alloc.report.to_json())
    doc["cost"] = alloc.cost
    _write(Path(cfg.out) / "allocation.json",
           json.dumps(doc, sort_keys=True, indent=1) + "\n")
    print(f"allocate: cost={alloc.cost!r} status={alloc.report.status}")
    return EXIT_OK


def cmd_sources(cfg: RunConfig, graph_path: str) -> int:
    g = _load_graph(graph_path)
    imp = _vehicle_impedances(cfg, g)
    prob = sources.build_source_problem(g, imp, cfg.scale)
    sol = sources.optimize_sources(prob)
    nodes = prob.node_ids if prob.node_ids is not None else list(range(g.n))
    by_p = sorted(range(len(nodes)), key=lambda i: (-sol.p[i], g.ids[nodes[i]]))
    lines = ["vehicle_id,p"]
    for i in by_p:
        lines.append(f"{g.ids[nodes[i]]},{float(sol.p[i])!r}")
    _write(Path(cfg.out) / "source_distribution.csv", "\n".join(lines) + "\n")
    by_r = sorted(range(len(nodes)), key=lambda i: (-imp[nodes[i]], g.ids[nodes[i]]))
    rlines = ["vehicle_id,R"]
    for i in by_r:
        rlines.append(f"{g.ids[nodes[i]]},{float(imp[nodes[i]])!r}")
    _write(Path(cfg.out) / "vehicle_impedance.csv", "\n".join(rlines) + "\n")
    doc = {"lambda": sol.lam,
           "capacity": None if sol.infinite_capacity else sol.capacity,
           "infinite_capacity": sol.infinite_capacity,
           "p": {g.ids[nodes[i]]: float(sol.p[i]) for i in range(len(nodes))},
           "status": sol.report.status}
    _write(Path(cfg.out) / "sources.json",
           json.dumps(doc, sort_keys=True, indent=1) + "\n")
    cap = "inf" if sol.infinite_capacity else f"{sol.capacity!r}"
    print(f"sources: lambda={sol.lam!r} capacity={cap}")
    return EXIT_OK


def _sweep_pool(cfg: RunConfig, points, worker):
    """Evaluate sweep grid points (possibly in parallel) but keep results
    in deterministic grid order."""
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(worker, points))
    return [worker(p) for p in points]


def cmd_sweep_impedance(cfg: RunConfig, snapshot_path: str) -> int:
    if not cfg.f_c_list or not cfg.r_list:
        raise ValueError("sweep lists must be non-empty")
    snap = _load_snapshot(snapshot_path)
    graphs = {}
    for r in cfg.r_list:
        graphs[r] = build_graph(snap, cfg.impedance_params(r=r, alpha=0.0))

    def worker(point):
        r, f_c = point
        # node importance neglected for this figure: alpha = 0
        params = cfg.impedance_params(r=r, f_c=f_c, alpha=0.0)
        g = graphs[r]
        if g.m == 0:
            return (f_c, r, None, 0)
        _, weights = edge_impedances(g, params)
        return (f_c, r, float(np.mean(weights)), g.m)

    points = [(r, f_c) for r in cfg.r_list for f_c in cfg.f_c_list]
    rows = _sweep_pool(cfg, points, worker)
    lines = ["f_c_mhz,r_m,mean_R,edges"]
    for f_c, r, mean_r, m in rows:
        val = "" if mean_r is None else repr(mean_r)
        lines.append(f"{f_c!r},{r!r},{val},{m}")
    _write(Path(cfg.out) / "sweep_impedance.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_sweep_handover(cfg: RunConfig, snapshot_path: str) -> int:
    if not cfg.r_c_list or not cfg.r_list:
        raise ValueError("sweep lists must be non-empty")
    snap = _load_snapshot(snapshot_path)
    graphs = {}
    for r in cfg.r_list:
        graphs[r] = build_graph(snap, cfg.impedance_params(r=r, alpha=0.0))

    def worker(point):
        r, r_c = point
        g = graphs[r]
        if g.m == 0:
            return (r_c, r, None, 0)
        counts = handover_counts(g.positions[g.edges[:, 0]],
                                 g.positions[g.edges[:, 1]], r_c)
        return (r_c, r, float(np.mean(counts)), g.m)

    points = [(r, r_c) for r in cfg.r_list for r_c in cfg.r_c_list]
    rows = _sweep_pool(cfg, points, worker)
    lines = ["r_c_m,r_m,mean_ns,edges"]
    for r_c, r, mean_ns, m in rows:
        val = "" if mean_ns is None else repr(mean_ns)
        lines.append(f"{r_c!r},{r!r},{val},{m}")
    _write(Path(cfg.out) / "sweep_handover.csv", "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- wiring

def _add_common(sub, *names):
    opts = {
        "seed": dict(type=int, help="RNG seed"),
        "jobs": dict(type=int, help="worker threads for parallel stages"),
        "n": dict(type=int, help="number of vehicles"),
        "clusters": dict(type=int, help="number of Gaussian hot spots"),
        "background_frac": dict(type=float),
        "sigma_frac": dict(type=float),
        "at": dict(type=float, help="snapshot instant (epoch seconds)"),
        "window": dict(type=float, help="snapshot half-window seconds"),
        "alpha": dict(type=float), "beta": dict(type=float),
        "mu": dict(type=float), "zeta": dict(type=float),
        "upsilon": dict(type=float), "psi": dict(type=float),
        "xi": dict(type=float), "theta_m": dict(type=float),
        "r": dict(type=float, help="communication range, m"),
        "r_c": dict(type=float, help="cell radius, m"),
        "f_c": dict(type=float, help="carrier frequency, MHz"),
        "floor_r": dict(type=float),
        "tau": dict(type=float), "varsigma": dict(type=float),
        "p_tx_dbm": dict(type=float), "noise_dbm": dict(type=float),
        "shadow_sigma_db": dict(type=float), "uplink_d_m": dict(type=float),
        "k": dict(type=int, help="number of stations"),
        "epsilon": dict(type=float, help="impedance/geometry blend in [0,1]"),
        "seed_index": dict(type=int, help="initial center (-1: min impedance)"),
        "demand": dict(type=float, help="total task quantity Q"),
        "capacity": dict(type=float, help="per-link capacity c"),
        "method": dict(type=str, choices=["simplex", "barrier"]),
        "eps_gap": dict(type=float),
        "scale": dict(type=float, help="throughput constant C"),
        "k_min": dict(type=int, help="power-law fit lower cutoff"),
        "f_c_list": dict(type=_float_list), "r_list": dict(type=_float_list),
        "r_c_list": dict(type=_float_list),
    }
    for name in names:
        sub.add_argument("--" + name.replace("_", "-"), dest=name,
                         default=None, **opts[name])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vanetkit",
        description="impedance-weighted vehicular communication graph toolkit")
    ap.add_argument("--config", default=None, help="flat TOML config file")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--seed", dest="seed", type=int, default=None)
    sp = ap.add_subparsers(dest="command", required=True)

    p = sp.add_parser("gen", help="generate a synthetic trace")
    _add_common(p, "n", "clusters", "background_frac", "sigma_frac")

    p = sp.add_parser("ingest", help="parse a trace and extract a snapshot")
    p.add_argument("--trace", required=True)
    _add_common(p, "at", "window")

    p = sp.add_parser("graph", help="build the weighted graph from a snapshot")
    p.add_argument("--snapshot", required=True)
    _add_common(p, "jobs", "alpha", "beta", "mu", "zeta", "upsilon", "psi",
                "xi", "theta_m", "r", "r_c", "f_c", "floor_r")

    p = sp.add_parser("metrics", help="complex-network statistics")
    p.add_argument("--graph", required=True)
    _add_common(p, "jobs", "k_min")

    p = sp.add_parser("cluster", help="base-station clustering")
    p.add_argument("--graph", required=True)
    _add_common(p, "jobs", "k", "epsilon", "seed_index", "r_c", "f_c",
                "uplink_d_m", "tau", "varsigma", "p_tx_dbm", "noise_dbm",
                "alpha", "beta", "upsilon", "psi")

    p = sp.add_parser("allocate", help="V2V traffic allocation")
    p.add_argument("--graph", required=True)
    p.add_argument("--sources", required=True, help="comma-separated vehicle ids")
    p.add_argument("--dest", required=True)
    _add_common(p, "demand", "capacity", "method", "eps_gap")

    p = sp.add_parser("sources", help="information-source selection")
    p.add_argument("--graph", required=True)
    _add_common(p, "jobs", "scale", "r_c", "f_c", "uplink_d_m", "tau",
                "varsigma", "p_tx_dbm", "noise_dbm", "alpha", "beta",
                "upsilon", "psi")

    p = sp.add_parser("sweep-impedance", help="mean impedance vs carrier frequency")
    p.add_argument("--snapshot", required=True)
    _add_common(p, "jobs", "f_c_list", "r_list", "beta", "mu", "zeta",
                "psi", "xi", "theta_m", "r_c", "floor_r")

    p = sp.add_parser("sweep-handover", help="mean handovers vs cell radius")
    p.add_argument("--snapshot", required=True)
    _add_common(p, "jobs", "r_c_list", "r_list")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items()
                 if k in _FIELD_TYPES and v is not None}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "ingest":
            return cmd_ingest(cfg, args.trace)
        if args.command == "graph":
            return cmd_graph(cfg, args.snapshot)
        if args.command == "metrics":
            return cmd_metrics(cfg, args.graph)
        if args.command == "cluster":
            return cmd_cluster(cfg, args.graph)
        if args.command == "allocate":
            return cmd_allocate(cfg, args.graph, args.sources, args.dest)
        if args.command == "sources":
            return cmd_sources(cfg, args.graph)
        if args.command == "sweep-impedance":
            return cmd_sweep_impedance(cfg, args.snapshot)
        if args.command == "sweep-handover":
            return cmd_sweep_handover(cfg, args.snapshot)
        raise ValueError(f"unknown command {args.command}")
    except (InfeasibleAllocationError,) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, ValueError, KeyError, NoPathError,
            trace.EmptyDatasetError, trace.EmptySnapshotError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
