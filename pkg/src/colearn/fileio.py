"""CSV formats for datasets, trees and paths.

Floats are written with ``repr`` so every value reads back bit-identical.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .dynamics import integrate
from .planner import Tree

DATASET_HEADER = ["theta0", "omega0", "theta1", "omega1", "cost",
                  "lam_theta0", "lam_omega0", "t_f", "sim_id"]
TREE_HEADER = ["node_id", "parent_id", "theta", "omega", "edge_cost",
               "lam_theta0", "lam_omega0", "t_f"]
DENSE_HEADER = ["node_id", "t", "theta", "omega"]


class FormatError(ValueError):
    pass


def write_dataset(ds: Dataset, path) -> None:
    cols = np.column_stack([ds.x0, ds.x1, ds.cost, ds.params])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(DATASET_HEADER) + "\n")
        for row, sid in zip(cols.tolist(), ds.sim_id.tolist()):
            fh.write(",".join(map(repr, row)) + f",{sid}\n")


def read_dataset(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != DATASET_HEADER:
            raise FormatError(f"{path}: unexpected header {header}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float)
    if data.size == 0:
        data = np.empty((0, len(DATASET_HEADER)))
    if data.shape[1] != len(DATASET_HEADER):
        raise FormatError(f"{path}: expected {len(DATASET_HEADER)} columns, got {data.shape[1]}")
    return Dataset(
        x0=data[:, 0:2].copy(),
        x1=data[:, 2:4].copy(),
        cost=data[:, 4].copy(),
        params=data[:, 5:8].copy(),
        sim_id=data[:, 8].astype(np.int64),
    )


def _node_row(i, node):
    p = node.edge_params
    params = ["", "", ""] if p is None else [repr(p.lam_theta0), repr(p.lam_omega0), repr(p.t_f)]
    parent = "" if node.parent is None else str(node.parent)
    return [str(i), parent, repr(node.state[0]), repr(node.state[1]), repr(node.edge_cost), *params]


def write_tree(tree: Tree, path, ids=None) -> None:
    """Edge list with one row per node; the root has an empty parent."""
    ids = range(len(tree)) if ids is None else ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TREE_HEADER)
        for i in ids:
            w.writerow(_node_row(i, tree[i]))


def read_tree_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TREE_HEADER:
            raise FormatError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def write_dense_edges(tree: Tree, path, dt: float = 0.01, w: float = 1.0, ids=None) -> None:
    """Integrated samples along every edge, for drawing curved edges."""
    ids = range(len(tree)) if ids is None else ids
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(DENSE_HEADER)
        for i in ids:
            node = tree[i]
            if node.parent is None:
                continue
            p = node.edge_params
            traj = integrate(tree[node.parent].state, p.costate, p.t_f, dt, w)
            for t, (th, om) in zip(traj.times.tolist(), traj.states.tolist()):
                out.writerow([i, repr(t), repr(th), repr(om)])


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
