"""Swing-up benchmark: epochs of generate -> clean -> fit -> plan, plus metrics.

Each epoch regenerates and recleans its own dataset, holds out a fraction of
the simulations to measure steering accuracy, and runs a batch of seeded
plans. Per-run records are the source of truth; the summary report is a pure
function of them.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .cleaning import clean_dataset
from .config import ExperimentConfig
from .datagen import Dataset, SteeringParams, generate_dataset
from .dynamics import integrate_batch
from .fileio import ensure_dir, write_dense_edges, write_tree
from .planner import PlannerConfig, PlanResult, grow_tree, plan, quantize
from .surrogate import SurrogateModel, build_index

log = logging.getLogger(__name__)


def derive_seed(*keys: int) -> int:
    """Stable 32-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def split_by_simulation(ds: Dataset, fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Hold out whole simulations so no trajectory feeds both sides."""
    sims = np.unique(ds.sim_id)
    n_out = int(math.ceil(fraction * len(sims))) if fraction > 0 else 0
    n_out = min(n_out, len(sims) - 1)
    rng = np.random.default_rng(seed)
    held = np.sort(rng.choice(sims, size=n_out, replace=False)) if n_out > 0 else np.empty(0, dtype=sims.dtype)
    mask = np.isin(ds.sim_id, held)
    return ds.take(np.flatnonzero(~mask)), ds.take(np.flatnonzero(mask))


def steering_errors(model: SurrogateModel, held_out: Dataset, dt: float = 0.01, w: float = 1.0) -> np.ndarray:
    """Squared distance between each held-out endpoint and where the predicted steering lands."""
    if len(held_out) == 0:
        return np.empty(0)
    params = model.predict_steering_batch(held_out.queries)
    x_end, _, ok = integrate_batch(held_out.x0, params[:, :2], params[:, 2], dt, w)
    err = np.sum((x_end - held_out.x1) ** 2, axis=1)
    err[~ok] = np.inf
    return err


def steering_error(model: SurrogateModel, held_out: Dataset, dt: float = 0.01, w: float = 1.0) -> float:
    """Median squared endpoint error of unperturbed steering predictions."""
    err = steering_errors(model, held_out, dt, w)
    return float(np.median(err)) if err.size else math.nan


def baseline_plan(cfg: PlannerConfig, param_bounds) -> PlanResult:
    """RRT with Euclidean nearest-node selection and uniformly random steering.

    ``param_bounds`` is the ``(3, 2)`` parameter domain to draw from.
    """
    bounds = np.asarray(param_bounds, dtype=float)

    def select(tree, target, stats):
        d2 = np.sum((tree.states - np.asarray(target)) ** 2, axis=1)
        return int(np.argmin(d2)), None

    def steer(tree, node_id, target, is_goal, rng):
        draw = rng.uniform(bounds[:, 0], bounds[:, 1])
        lt = quantize(draw[0], cfg.quantum, *bounds[0])
        lw = quantize(draw[1], cfg.quantum, *bounds[1])
        tf = max(quantize(draw[2], cfg.quantum, *bounds[2]), cfg.dt)
        return SteeringParams(lt, lw, tf)

    return grow_tree(cfg, select, steer)


@dataclass
class RunRecord:
    epoch: int
    run: int
    seed: int
    success: bool
    n_nodes: int
    iterations: int
    skipped: int
    wall_time: float
    path_nodes: int
    path_cost: float
    jhat_min: float
    jhat_max: float
    error: str = ""


@dataclass
class EpochRecord:
    epoch: int
    raw_entries: int
    clean_entries: int
    train_entries: int
    held_out_entries: int
    validity_threshold: float
    steering_error: float
    gen_time: float
    clean_time: float


def _quartiles(values) -> dict:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"q1": None, "median": None, "q3": None, "n": 0}
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return {"q1": float(q1), "median": float(med), "q3": float(q3), "n": int(values.size)}


def summarize(runs: list[RunRecord], epochs: list[EpochRecord]) -> dict:
    """Metrics report from stored records; deterministic in its inputs."""

    def block(rs, es):
        ok = [r for r in rs if r.success]
        return {
            "runs": len(rs),
            "success_rate": (len(ok) / len(rs)) if rs else None,
            "nodes": _quartiles([r.n_nodes for r in rs]),
            "nodes_std": float(np.std([r.n_nodes for r in rs])) if rs else None,
            "plan_time_success": _quartiles([r.wall_time for r in ok]),
            "steering_error_median": float(np.median([e.steering_error for e in es])) if es else None,
            "offline_time": _quartiles([e.gen_time + e.clean_time for e in es]),
        }

    report = {"pooled": block(runs, epochs), "epochs": []}
    for e in epochs:
        entry = block([r for r in runs if r.epoch == e.epoch], [e])
        entry.update(epoch=e.epoch, clean_entries=e.clean_entries, validity_threshold=e.validity_threshold)
        report["epochs"].append(entry)
    return report


def _record_from_result(epoch, run, seed, res: PlanResult) -> RunRecord:
    path_cost = res.tree[res.goal_node].cost_to_come if res.success else math.nan
    return RunRecord(
        epoch=epoch, run=run, seed=seed, success=res.success, n_nodes=res.n_nodes,
        iterations=res.iterations_used, skipped=res.skipped_iterations, wall_time=res.wall_time,
        path_nodes=len(res.path), path_cost=path_cost,
        jhat_min=res.consulted_cost_range[0], jhat_max=res.consulted_cost_range[1],
    )


def build_epoch(cfg: ExperimentConfig, epoch: int):
    """Generate, clean, split and fit the models for one epoch."""
    gen_cfg = replace(cfg.gen, seed=derive_seed(cfg.seed, epoch, 0))
    clean_cfg = replace(cfg.clean, seed=derive_seed(cfg.seed, epoch, 1))
    t0 = time.perf_counter()
    raw = generate_dataset(gen_cfg)
    t1 = time.perf_counter()
    cleaned = clean_dataset(raw, clean_cfg)
    t2 = time.perf_counter()
    train, held = split_by_simulation(cleaned, cfg.held_out_fraction, derive_seed(cfg.seed, epoch, 2))
    model = build_index(train, cfg.surrogate.k, percentile=cfg.surrogate.validity_percentile,
                        scale=cfg.surrogate.validity_scale, dt=cfg.gen.dt)
    err = steering_error(model, held, cfg.gen.dt, cfg.gen.w)
    rec = EpochRecord(
        epoch=epoch, raw_entries=len(raw), clean_entries=len(cleaned), train_entries=len(train),
        held_out_entries=len(held), validity_threshold=model.validity_threshold,
        steering_error=err, gen_time=t1 - t0, clean_time=t2 - t1,
    )
    return model, rec


def run_epoch_plans(cfg: ExperimentConfig, model: SurrogateModel, epoch: int, out_dir=None) -> list[RunRecord]:
    records = []
    dumped = False
    for run in range(cfg.runs_per_epoch):
        seed = derive_seed(cfg.seed, epoch, 3, run)
        pcfg = replace(cfg.planner, seed=seed)
        try:
            res = plan(pcfg, model)
        except Exception as exc:  # recorded, not fatal
            log.exception("epoch %d run %d failed", epoch, run)
            records.append(RunRecord(epoch, run, seed, False, 0, 0, 0, 0.0, 0, math.nan,
                                     math.nan, math.nan, error=f"{type(exc).__name__}: {exc}"))
            continue
        records.append(_record_from_result(epoch, run, seed, res))
        if out_dir is not None and res.success and not dumped:
            write_tree(res.tree, out_dir / f"tree_epoch{epoch}.csv")
            write_tree(res.tree, out_dir / f"path_epoch{epoch}.csv", ids=res.path)
            write_dense_edges(res.tree, out_dir / f"tree_epoch{epoch}_dense.csv", pcfg.dt, pcfg.w)
            dumped = True
    return records


def write_records(path, records) -> None:
    if not records:
        Path(path).write_text("")
        return
    names = [f.name for f in fields(records[0])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, n) for n in names)])


def read_records(path, cls) -> list:
    out = []
    types = {f.name: f.type for f in fields(cls)}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                t = types[k]
                if t in ("bool", bool):
                    kw[k] = v == "True"
                elif t in ("int", int):
                    kw[k] = int(v)
                elif t in ("float", float):
                    kw[k] = float(v)
                else:
                    kw[k] = v
            out.append(cls(**kw))
    return out


def run_experiment(cfg: ExperimentConfig, out_dir=None, progress=None) -> dict:
    """Run every epoch and return the metrics report.

    With ``out_dir`` set, writes ``runs.csv`` (one row per plan, also the
    per-epoch boxplot data), ``epochs.csv``, ``report.json`` and, per epoch,
    the tree and path of the first successful run.
    """
    out = ensure_dir(out_dir) if out_dir is not None else None
    runs: list[RunRecord] = []
    epochs: list[EpochRecord] = []
    for epoch in range(cfg.n_epochs):
        model, erec = build_epoch(cfg, epoch)
        epochs.append(erec)
        log.info("epoch %d: %d clean entries, steering error %.4f", epoch, erec.clean_entries, erec.steering_error)
        runs.extend(run_epoch_plans(cfg, model, epoch, out))
        if progress is not None:
            progress(epoch, erec, runs)
    report = summarize(runs, epochs)
    if out is not None:
        write_records(out / "runs.csv", runs)
        write_records(out / "epochs.csv", epochs)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def report_from_files(out_dir) -> dict:
    out = Path(out_dir)
    return summarize(read_records(out / "runs.csv", RunRecord), read_records(out / "epochs.csv", EpochRecord))

