"""Impedance-weighted communication graphs for vehicular networks.

Pipeline: GPS traces -> planar snapshots -> geometric graphs with
impedance edge weights -> complex-network metrics -> base-station
clustering, V2V traffic allocation and information-source selection.
"""

from .clustering import ClusterConfig, ClusterResult, cluster
from .graph import (ImpedanceParams, ThroughputParams, VanetGraph,
                    build_graph, handover_count, link_impedance, path_loss,
                    throughput, vehicle_impedance, weight_edges)
from .metrics import (average_path_length, betweenness, clustering_coefficient,
                      degree_distribution, powerlaw_fit, two_neighbor_clustering)
from .optim import BarrierProblem, LinearProgram, SolveReport, barrier_solve, solve_lp
from .sources import SourceProblem, SourceSolution, capacity, optimize_sources, pass_matrix
from .trace import BoundingBox, GpsRecord, VehicleSnapshot, parse_trace, project, snapshot
from .traffic import Allocation, TrafficProblem, allocate, build_problem, dijkstra

__version__ = "0.1.0"
