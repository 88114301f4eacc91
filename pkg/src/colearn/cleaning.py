"""Removal of local-optimum bias by pairwise resampling.

Points that sit close together in query space ``(x0, x1)`` but carry
different costs come from different local optima. Repeatedly picking a
random point and dropping the more expensive of it and its nearest
neighbour (when that neighbour is within ``d``) keeps the lower envelope of
the cost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .datagen import Dataset, DatasetEntry


@dataclass(frozen=True)
class CleanConfig:
    d: float = 0.05
    k_max: int = 5000
    seed: int = 0
    exhaustive: bool = False

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")


def query_distance(a: DatasetEntry, b: DatasetEntry) -> float:
    qa = np.array([*a.x0, *a.x1], dtype=float)
    qb = np.array([*b.x0, *b.x1], dtype=float)
    return float(np.sqrt(np.sum((qa - qb) ** 2)))


class _AliveIndex:
    """Fixed-radius neighbour lists over query points, with tombstoned removals.

    Points never move, so every pair closer than ``d`` is found once up front
    and each row is kept sorted by ``(distance, index)``.
    """

    def __init__(self, points: np.ndarray, d: float):
        n = len(points)
        self.alive = np.ones(n, dtype=bool)
        pairs = cKDTree(points).query_pairs(d, output_type="ndarray")
        if len(pairs):
            dist = np.sqrt(np.sum((points[pairs[:, 0]] - points[pairs[:, 1]]) ** 2, axis=1))
            pairs, dist = pairs[dist < d], dist[dist < d]
        else:
            dist = np.empty(0)
        src = np.concatenate([pairs[:, 0], pairs[:, 1]])
        dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
        dd = np.concatenate([dist, dist])
        order = np.lexsort((dst, dd, src))
        self.nbr = dst[order]
        self.nbr_dist = dd[order]
        self.indptr = np.searchsorted(src[order], np.arange(n + 1))
        # dense list of alive ids for O(1) uniform draws
        self.ids = np.arange(n)
        self.pos = np.arange(n)
        self.n_alive = n

    def remove(self, i: int):
        self.alive[i] = False
        p = self.pos[i]
        last = self.ids[self.n_alive - 1]
        self.ids[p] = last
        self.pos[last] = p
        self.n_alive -= 1

    def random_alive(self, rng: np.random.Generator) -> int:
        return int(self.ids[rng.integers(self.n_alive)])

    def nearest_within(self, i: int):
        """Nearest alive neighbour of point ``i`` closer than ``d``, ties to the lower index.

        Returns ``(j, dist)`` or ``(None, inf)``.
        """
        a, b = self.indptr[i], self.indptr[i + 1]
        if a == b:
            return None, np.inf
        row = self.nbr[a:b]
        live = self.alive[row]
        k = int(live.argmax())
        if not live[k]:
            return None, np.inf
        return int(row[k]), float(self.nbr_dist[a + k])


def _higher_cost(i: int, j: int, cost: np.ndarray) -> tuple[int, int]:
    """Return ``(loser, winner)``; equal costs drop the larger index."""
    if cost[i] > cost[j] or (cost[i] == cost[j] and i > j):
        return i, j
    return j, i


def clean_indices(queries, cost, cfg: CleanConfig, log: list | None = None) -> np.ndarray:
    """Indices of the entries that survive cleaning, in ascending order.

    If ``log`` is given, each removal is appended as ``(removed, kept)``.
    """
    queries = np.asarray(queries, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if len(cost) == 0:
        raise ValueError("cannot clean an empty dataset")
    index = _AliveIndex(queries, cfg.d)
    if cfg.exhaustive:
        _clean_exhaustive(index, cost, log)
    else:
        _clean_stochastic(index, cost, cfg, log)
    return np.flatnonzero(index.alive)


def _clean_stochastic(index: _AliveIndex, cost, cfg: CleanConfig, log):
    rng = np.random.default_rng(cfg.seed)
    misses = 0
    while misses < cfg.k_max and index.n_alive > 1:
        i = index.random_alive(rng)
        j, _ = index.nearest_within(i)
        if j is None:
            misses += 1
            continue
        misses = 0
        loser, winner = _higher_cost(i, j, cost)
        index.remove(loser)
        if log is not None:
            log.append((loser, winner))


def _clean_exhaustive(index: _AliveIndex, cost, log):
    removed = True
    while removed:
        removed = False
        for i in range(len(cost)):
            while index.alive[i]:
                j, _ = index.nearest_within(i)
                if j is None:
                    break
                loser, winner = _higher_cost(i, j, cost)
                index.remove(loser)
                removed = True
                if log is not None:
                    log.append((loser, winner))


def clean_dataset(raw: Dataset, cfg: CleanConfig) -> Dataset:
    keep = clean_indices(raw.queries, raw.cost, cfg)
    return raw.take(keep)
