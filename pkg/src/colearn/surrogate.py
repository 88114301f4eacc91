"""k-nearest-neighbour cost-to-go, steering and validity models.

All three models share one k-d tree over the 4-d query vectors
``(theta0, omega0, theta1, omega1)`` of the cleaned dataset. Neighbour sets
are ordered by distance with ties going to the lower entry index, so
predictions are deterministic.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .datagen import Dataset, SteeringParams

COST_FLOOR = 1e-5
COST_CEILING = 1e5


def _as_queries(x0, x1) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    x0, x1 = np.broadcast_arrays(x0.reshape(-1, 2), x1.reshape(-1, 2))
    return np.hstack([x0, x1])


def knn_brute_force(points: np.ndarray, queries: np.ndarray, k: int):
    """Linear-scan k-NN with lower-index tie-breaking. Reference for the index."""
    queries = np.atleast_2d(queries)
    out_d = np.empty((len(queries), k))
    out_i = np.empty((len(queries), k), dtype=np.int64)
    ids = np.arange(len(points))
    for r, q in enumerate(queries):
        dist = np.sqrt(np.sum((points - q) ** 2, axis=1))
        order = np.lexsort((ids, dist))[:k]
        out_d[r], out_i[r] = dist[order], order
    return out_d, out_i


class SurrogateModel:
    """Frozen k-NN models over a cleaned dataset.

    Use :func:`build_index` to construct one.
    """

    def __init__(self, data: Dataset, k: int = 3, validity_threshold: float | None = None,
                 cost_floor: float = COST_FLOOR, cost_ceiling: float = COST_CEILING,
                 dt: float = 0.01, percentile: float = 99.5, scale: float = 1.5):
        if len(data) == 0:
            raise ValueError("cannot build a model on an empty dataset")
        if not 1 <= k <= len(data):
            raise ValueError(f"k={k} must lie in [1, {len(data)}]")
        self.data = data
        self.k = k
        self.cost_floor = cost_floor
        self.cost_ceiling = cost_ceiling
        self.dt = dt
        self.points = data.queries
        self.points.setflags(write=False)
        self.tree = cKDTree(self.points)
        self.max_displacement = float(np.hypot(*(data.x1 - data.x0).T).max())
        if validity_threshold is None:
            validity_threshold = calibrate_threshold(self, percentile, scale)
        self.validity_threshold = float(validity_threshold)
        self.param_bounds = _param_bounds(data.params, dt)

    def __len__(self) -> int:
        return len(self.data)

    # -- neighbour search ---------------------------------------------------

    def neighbours(self, queries, k: int | None = None, slack: int = 4, upper_bound: float = np.inf):
        """k nearest entries for each row of ``queries`` (shape ``(m, 4)``).

        Returns ``(dist, idx)`` each of shape ``(m, k)``. Candidates come from
        the k-d tree; distances are recomputed directly and ties broken by
        index so the answer matches :func:`knn_brute_force`. Neighbours
        farther than ``upper_bound`` are reported as ``(inf, -1)``.
        """
        k = self.k if k is None else k
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        n = len(self.points)
        kk = min(k + slack, n)
        # widen slightly: the tree's bound is exclusive and its distances may differ by an ulp
        _, cand = self.tree.query(queries, k=kk, distance_upper_bound=upper_bound * (1 + 1e-9))
        cand = cand.reshape(len(queries), kk)
        missing = cand == n
        cand = np.where(missing, n, cand)
        dist = np.sqrt(np.sum((self.points[np.minimum(cand, n - 1)] - queries[:, None, :]) ** 2, axis=2))
        dist[missing | (dist > upper_bound)] = np.inf
        order = _rowwise_lexsort(dist, cand)
        dist = np.take_along_axis(dist, order, axis=1)
        cand = np.take_along_axis(cand, order, axis=1)
        if kk < n:
            # the candidate list may have cut through a run of equal distances
            kth = dist[:, k - 1]
            tight = np.isfinite(kth) & (dist[:, kk - 1] <= kth * (1 + 1e-12))
            for r in np.flatnonzero(tight):
                ball = np.asarray(self.tree.query_ball_point(queries[r], kth[r] * (1 + 1e-9) + 1e-300))
                bd = np.sqrt(np.sum((self.points[ball] - queries[r]) ** 2, axis=1))
                o = np.lexsort((ball, bd))[:kk]
                dist[r], cand[r] = bd[o], ball[o]
        dist, cand = dist[:, :k], cand[:, :k]
        cand[~np.isfinite(dist)] = -1
        return dist, cand

    # -- predictions (batched) ---------------------------------------------

    def predict_cost_batch(self, queries) -> np.ndarray:
        _, idx = self.neighbours(queries)
        return np.clip(self.data.cost[idx].mean(axis=1), self.cost_floor, self.cost_ceiling)

    def predict_steering_batch(self, queries) -> np.ndarray:
        _, idx = self.neighbours(queries)
        p = self.data.params[idx].mean(axis=1)
        p[:, 2] = np.maximum(p[:, 2], self.dt)
        return p

    def is_valid_batch(self, queries) -> np.ndarray:
        return self.evaluate(queries)[0]

    def evaluate(self, queries):
        """Validity flags and saturated cost predictions from one bounded search.

        Cost is only computed for valid rows; invalid rows get NaN.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        valid = np.zeros(len(queries), dtype=bool)
        cost = np.full(len(queries), np.nan)
        # every entry has |x1 - x0| <= max_displacement, so a query whose own
        # displacement exceeds it by more than sqrt(2)*threshold has no neighbour in range
        disp = np.hypot(queries[:, 2] - queries[:, 0], queries[:, 3] - queries[:, 1])
        near = np.flatnonzero(disp <= self.max_displacement + np.sqrt(2.0) * self.validity_threshold)
        if near.size == 0:
            return valid, cost
        dist, idx = self.neighbours(queries[near], upper_bound=self.validity_threshold)
        ok = dist.sum(axis=1) <= self.validity_threshold
        rows = near[ok]
        valid[rows] = True
        if rows.size:
            c = self.data.cost[idx[ok]].mean(axis=1)
            cost[rows] = np.clip(c, self.cost_floor, self.cost_ceiling)
        return valid, cost

    # -- single-query API ---------------------------------------------------

    def predict_cost(self, x0, x1) -> float:
        return float(self.predict_cost_batch(_as_queries(x0, x1))[0])

    def predict_steering(self, x0, x1) -> SteeringParams:
        p = self.predict_steering_batch(_as_queries(x0, x1))[0]
        return SteeringParams(float(p[0]), float(p[1]), float(p[2]))

    def is_valid(self, x0, x1) -> bool:
        return bool(self.is_valid_batch(_as_queries(x0, x1))[0])


def _rowwise_lexsort(dist: np.ndarray, cand: np.ndarray) -> np.ndarray:
    # sort each row by distance, then by index
    order = np.argsort(cand, axis=1, kind="stable")
    d_sorted = np.take_along_axis(dist, order, axis=1)
    second = np.argsort(d_sorted, axis=1, kind="stable")
    return np.take_along_axis(order, second, axis=1)


def _param_bounds(params: np.ndarray, dt: float, pad: float = 0.05) -> np.ndarray:
    """Empirical parameter domain widened by ``pad`` of its width, shape ``(3, 2)``."""
    lo = params.min(axis=0)
    hi = params.max(axis=0)
    span = hi - lo
    bounds = np.column_stack([lo - pad * span, hi + pad * span])
    bounds[2, 0] = max(bounds[2, 0], dt)
    return bounds


def calibrate_threshold(model: SurrogateModel, percentile: float = 99.5, scale: float = 1.5) -> float:
    """Validity threshold from leave-one-out summed k-NN distances of the training set."""
    dist, _ = model.tree.query(model.points, k=min(model.k + 1, len(model.points)))
    dist = np.atleast_2d(dist)
    # column 0 is the point itself (or an exact duplicate, which is equally valid)
    summed = dist[:, 1:].sum(axis=1) if dist.shape[1] > 1 else np.zeros(len(dist))
    return float(np.percentile(summed, percentile) * scale)


def build_index(data: Dataset, k: int = 3, validity_threshold: float | None = None,
                percentile: float = 99.5, scale: float = 1.5, dt: float = 0.01) -> SurrogateModel:
    """Build the surrogate, calibrating the validity threshold if none is given."""
    return SurrogateModel(data, k, validity_threshold, dt=dt, percentile=percentile, scale=scale)
