import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colearn.cleaning import CleanConfig, clean_dataset
from colearn.datagen import Dataset, GenConfig, generate_dataset
from colearn.harness import split_by_simulation
from colearn.surrogate import COST_CEILING, COST_FLOOR, build_index, knn_brute_force


def _toy(costs, params=None, spread=0.01):
    n = len(costs)
    x0 = np.column_stack([np.arange(n) * spread, np.zeros(n)])
    x1 = x0 + 0.5
    params = np.tile([0.0, 1.0, 0.1], (n, 1)) if params is None else np.asarray(params, float)
    return Dataset(x0, x1, np.asarray(costs, float), params, np.arange(n))


def test_three_entries_average():
    ds = _toy([1.0, 2.0, 3.0], [[0, 1, 0.1], [1, 2, 0.2], [2, 6, 0.3]])
    m = build_index(ds, k=3, validity_threshold=1.0)
    for q in ([(0, 0), (0.5, 0.5)], [(5, 5), (-1, 2)]):
        assert m.predict_cost(*q) == pytest.approx(2.0)
        p = m.predict_steering(*q)
        assert (p.lam_theta0, p.lam_omega0, p.t_f) == pytest.approx((1.0, 3.0, 0.2))


def test_cost_saturation():
    m = build_index(_toy([1e-7] * 3), k=3, validity_threshold=1.0)
    assert m.predict_cost((0, 0), (0.5, 0.5)) == COST_FLOOR
    m = build_index(_toy([1e7] * 3), k=3, validity_threshold=1.0)
    assert m.predict_cost((0, 0), (0.5, 0.5)) == COST_CEILING


def test_steering_time_floor():
    m = build_index(_toy([1.0], [[0, 0, 0.001]]), k=1, validity_threshold=1.0, dt=0.01)
    assert m.predict_steering((0, 0), (0.5, 0.5)).t_f == 0.01


def test_exact_recall(small_clean):
    m = build_index(small_clean, k=1)
    for i in np.random.default_rng(0).choice(len(small_clean), 200, replace=False):
        e = small_clean[i]
        assert m.predict_cost(e.x0, e.x1) == max(e.cost, COST_FLOOR)
        p = m.predict_steering(e.x0, e.x1)
        assert (p.lam_theta0, p.lam_omega0, p.t_f) == (e.params.lam_theta0, e.params.lam_omega0,
                                                        max(e.params.t_f, 0.01))
        assert m.is_valid(e.x0, e.x1)


def test_index_matches_linear_scan(small_model, rng):
    pts = small_model.points
    # half random, half perturbed copies of stored queries
    q = np.vstack([
        np.column_stack([rng.uniform(-4.7, 1.6, 500), rng.uniform(-3, 3, 500),
                         rng.uniform(-4.7, 1.6, 500), rng.uniform(-3, 3, 500)]),
        pts[rng.integers(len(pts), size=500)] + rng.normal(0, 0.01, (500, 4)),
    ])
    d, i = small_model.neighbours(q)
    db, ib = knn_brute_force(pts, q, small_model.k)
    assert np.array_equal(i, ib)
    assert np.allclose(d, db, rtol=0, atol=1e-12)


def test_index_tie_breaking_matches_linear_scan(rng):
    # a lattice gives many equidistant neighbours
    g = np.arange(4) * 0.5
    grid = np.array(np.meshgrid(g, g, g, g)).reshape(4, -1).T
    n = len(grid)
    ds = Dataset(grid[:, :2].copy(), grid[:, 2:].copy(), np.ones(n), np.tile([0, 1, 0.1], (n, 1)))
    m = build_index(ds, k=3, validity_threshold=10.0)
    q = np.vstack([grid[rng.integers(n, size=200)] + 0.25, rng.choice(g, (200, 4))])
    _, i = m.neighbours(q)
    _, ib = knn_brute_force(grid, q, 3)
    assert np.array_equal(i, ib)


def test_evaluate_matches_unbounded_definition(small_model, rng):
    x0 = np.column_stack([rng.uniform(-4.7, 1.6, 600), rng.uniform(-3, 3, 600)])
    x1 = x0 + rng.normal(0, 0.8, (600, 2))
    q = np.hstack([x0, x1])
    valid, cost = small_model.evaluate(q)
    db, ib = knn_brute_force(small_model.points, q, small_model.k)
    expect = db.sum(axis=1) <= small_model.validity_threshold
    assert np.array_equal(valid, expect)
    assert valid.any() and not valid.all()
    assert np.allclose(cost[valid], small_model.predict_cost_batch(q[valid]), rtol=0, atol=0)
    assert np.all(np.isnan(cost[~valid]))


def test_predictions_within_neighbour_range(small_model, rng):
    x0 = np.column_stack([rng.uniform(-4.7, 1.6, 300), rng.uniform(-3, 3, 300)])
    q = np.hstack([x0, x0 + rng.normal(0, 0.5, (300, 2))])
    _, idx = small_model.neighbours(q)
    c = small_model.predict_cost_batch(q)
    p = small_model.predict_steering_batch(q)
    data = small_model.data
    lo, hi = data.cost[idx].min(axis=1), data.cost[idx].max(axis=1)
    assert np.all((c >= np.maximum(lo, COST_FLOOR) - 1e-12) & (c <= hi + 1e-12))
    plo, phi = data.params[idx].min(axis=1), data.params[idx].max(axis=1)
    phi[:, 2] = np.maximum(phi[:, 2], 0.01)
    assert np.all((p >= plo - 1e-12) & (p <= phi + 1e-12))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e9, 1e9), min_size=1, max_size=8))
def test_cost_bounded_for_any_stored_costs(costs):
    m = build_index(_toy(costs), k=1, validity_threshold=1.0)
    for i in range(len(costs)):
        c = m.predict_cost((i * 0.01, 0), (i * 0.01 + 0.5, 0.5))
        assert COST_FLOOR <= c <= COST_CEILING


def test_validity_examples(small_model):
    e = small_model.data[0]
    assert small_model.is_valid(e.x0, e.x1)
    # displacement 10 is far beyond the 1.5 cap of every entry
    assert not small_model.is_valid((0, 0), (6, 8))
    assert not small_model.is_valid((-1, 0), (-1, 10))


def test_threshold_passes_training_queries(small_model):
    frac = small_model.is_valid_batch(small_model.points).mean()
    assert frac >= 0.99


def test_validity_monotone(small_model, rng):
    x0 = np.column_stack([rng.uniform(-4.7, 1.6, 400), rng.uniform(-3, 3, 400)])
    q = np.hstack([x0, x0 + rng.normal(0, 1.0, (400, 2))])
    d, _ = small_model.neighbours(q)
    v = small_model.is_valid_batch(q)
    bad = np.flatnonzero(~v)
    checked = 0
    for a in bad:
        dominated = np.all(d >= d[a], axis=1)
        assert not v[dominated].any()
        checked += dominated.sum()
    assert checked > len(bad)


def test_build_errors():
    with pytest.raises(ValueError):
        build_index(_toy([1.0, 2.0]), k=3)
    empty = Dataset(np.empty((0, 2)), np.empty((0, 2)), np.empty(0), np.empty((0, 3)))
    with pytest.raises(ValueError):
        build_index(empty)


def test_points_are_read_only(small_model):
    with pytest.raises(ValueError):
        small_model.points[0, 0] = 1.0


def test_param_bounds_cover_data(small_model):
    b = small_model.param_bounds
    p = small_model.data.params
    assert np.all(b[:, 0] <= p.min(axis=0)) and np.all(p.max(axis=0) <= b[:, 1])
    assert b[2, 0] >= 0.01


def test_held_out_cost_error():
    ds = clean_dataset(generate_dataset(GenConfig(n_sims=10000, seed=21)), CleanConfig(seed=21))
    train, held = split_by_simulation(ds, 0.05, seed=0)
    m = build_index(train)
    err = np.abs(m.predict_cost_batch(held.queries) - held.cost)
    assert np.mean(err) <= 0.2
    assert not math.isnan(np.mean(err))
