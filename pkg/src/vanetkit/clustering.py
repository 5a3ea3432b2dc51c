"""Base-station placement by farthest-first clustering.

Distances blend vehicle impedance and planar geometry:
D_ij = eps * (R_i + R_j) + (1 - eps) * d_ij.  Centers are picked
greedily (each new center maximizes its distance to the closest
existing center), then every vehicle joins its nearest center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClusterConfig:
    k: int
    epsilon: float = 0.5
    seed_index: int | None = None  # None: start from the min-impedance node

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass
class ClusterResult:
    centers: list[int]      # node indices, in selection order
    labels: np.ndarray      # per-node index into ``centers``
    radius: float           # max generalized distance of a member to its center


def generalized_distance(i: int, j: int, impedances: np.ndarray,
                         positions: np.ndarray, epsilon: float) -> float:
    d = float(np.hypot(*(positions[i] - positions[j])))
    return epsilon * float(impedances[i] + impedances[j]) + (1.0 - epsilon) * d


def _distances_to(center: int, impedances: np.ndarray, positions: np.ndarray,
                  epsilon: float) -> np.ndarray:
    d = np.hypot(positions[:, 0] - positions[center, 0],
                 positions[:, 1] - positions[center, 1])
    return epsilon * (impedances + impedances[center]) + (1.0 - epsilon) * d


def select_centers(positions: np.ndarray, impedances: np.ndarray,
                   config: ClusterConfig) -> list[int]:
    """Greedy farthest-first center selection.

    c1 is the seed; each next center maximizes the distance to its
    nearest already-selected center.  Ties break to the smallest node
    index, and already-selected centers never re-enter the candidate
    pool (self-distance under D is not meaningful).
    """
    n = len(positions)
    if config.k > n:
        raise ValueError(f"k={config.k} exceeds node count {n}")
    seed = config.seed_index
    if seed is None:
        seed = int(np.argmin(impedances))  # argmin takes the smallest index on ties
    if not 0 <= seed < n:
        raise ValueError(f"seed_index {seed} out of range")
    centers = [seed]
    # min distance from each node to the selected center set
    nearest = _distances_to(seed, impedances, positions, config.epsilon)
    nearest[seed] = -np.inf
    while len(centers) < config.k:
        nxt = int(np.argmax(nearest))
        centers.append(nxt)
        cand = _distances_to(nxt, impedances, positions, config.epsilon)
        nearest = np.minimum(nearest, cand)
        nearest[nxt] = -np.inf
    return centers


def assign(positions: np.ndarray, centers: list[int], impedances: np.ndarray,
           epsilon: float) -> np.ndarray:
    """Label every node with its nearest center (earliest center wins ties);
    centers always label themselves."""
    if not centers:
        raise ValueError("no centers")
    dmat = np.stack([_distances_to(c, impedances, positions, epsilon)
                     for c in centers], axis=1)
    labels = np.argmin(dmat, axis=1)  # argmin returns the earliest on ties
    for idx, c in enumerate(centers):
        labels[c] = idx
    return labels.astype(np.int64)


def cluster(positions: np.ndarray, impedances: np.ndarray,
            config: ClusterConfig) -> ClusterResult:
    positions = np.asarray(positions, dtype=float)
    impedances = np.asarray(impedances, dtype=float)
    centers = select_centers(positions, impedances, config)
    labels = assign(positions, centers, impedances, config.epsilon)
    center_set = set(centers)
    radius = 0.0
    for i in range(len(positions)):
        if i in center_set:
            continue
        radius = max(radius, generalized_distance(
            i, centers[labels[i]], impedances, positions, config.epsilon))
    return ClusterResult(centers=centers, labels=labels, radius=radius)
