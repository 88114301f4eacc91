"""Command line entry point: ``colearn generate|clean|plan|bench|inspect``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cleaning import CleanConfig, clean_dataset
from .config import ExperimentConfig, eval_number, load_config
from .datagen import generate_dataset
from .fileio import ensure_dir, read_dataset, write_dataset, write_dense_edges, write_tree
from .harness import run_experiment
from .planner import plan
from .surrogate import build_index

log = logging.getLogger("colearn")


def _pair(text: str) -> tuple[float, float]:
    parts = [eval_number(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'theta,omega', got {text!r}")
    return float(parts[0]), float(parts[1])


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_generate(args) -> dict:
    cfg = _config(args)
    gen = cfg.gen if args.seed is None else replace(cfg.gen, seed=args.seed)
    if args.n_sims is not None:
        gen = replace(gen, n_sims=args.n_sims)
    ds = generate_dataset(gen)
    write_dataset(ds, args.out)
    return {"entries": len(ds), "simulations": gen.n_sims, "out": str(args.out)}


def cmd_clean(args) -> dict:
    raw = read_dataset(args.inp)
    cfg = CleanConfig(d=args.d, k_max=args.k_max, seed=args.seed or 0, exhaustive=args.exhaustive)
    cleaned = clean_dataset(raw, cfg)
    write_dataset(cleaned, args.out)
    return {"entries_in": len(raw), "entries_out": len(cleaned), "out": str(args.out)}


def cmd_plan(args) -> dict:
    cfg = _config(args)
    pcfg = cfg.planner
    overrides = {}
    if args.start is not None:
        overrides["x_init"] = args.start
    if args.goal is not None:
        overrides["x_goal"] = args.goal
    if args.seed is not None:
        overrides["seed"] = args.seed
    pcfg = replace(pcfg, **overrides)
    model = build_index(read_dataset(args.dataset), cfg.surrogate.k,
                        percentile=cfg.surrogate.validity_percentile,
                        scale=cfg.surrogate.validity_scale, dt=pcfg.dt)
    res = plan(pcfg, model)
    out = ensure_dir(args.out)
    write_tree(res.tree, out / "tree.csv")
    write_tree(res.tree, out / "path.csv", ids=res.path)
    if args.dense:
        write_dense_edges(res.tree, out / "tree_dense.csv", pcfg.dt, pcfg.w)
    return {"success": res.success, "nodes": res.n_nodes, "iterations": res.iterations_used,
            "path_nodes": len(res.path), "wall_time": res.wall_time, "out": str(out)}


def cmd_bench(args) -> dict:
    cfg = _config(args)
    if args.epochs is not None:
        cfg = replace(cfg, n_epochs=args.epochs)
    if args.runs is not None:
        cfg = replace(cfg, runs_per_epoch=args.runs)
    report = run_experiment(cfg, args.out)
    return report["pooled"]


def cmd_inspect(args) -> dict:
    ds = read_dataset(args.dataset)
    info = {
        "entries": len(ds),
        "simulations": int(np.unique(ds.sim_id).size),
        "cost": [float(ds.cost.min()), float(np.median(ds.cost)), float(ds.cost.max())],
        "param_min": ds.params.min(axis=0).tolist(),
        "param_max": ds.params.max(axis=0).tolist(),
        "max_displacement": float(np.hypot(*(ds.x1 - ds.x0).T).max()),
    }
    if args.k and len(ds) >= args.k:
        info["validity_threshold"] = build_index(ds, args.k).validity_threshold
    return info


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="colearn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample and integrate optimal trajectories")
    g.add_argument("--config", type=Path)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--n-sims", type=int)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("clean", help="remove local-optimum bias from a dataset")
    c.add_argument("--in", dest="inp", type=Path, required=True)
    c.add_argument("--out", type=Path, required=True)
    c.add_argument("--d", type=float, default=0.05)
    c.add_argument("--k-max", type=int, default=5000)
    c.add_argument("--seed", type=int)
    c.add_argument("--exhaustive", action="store_true")
    c.set_defaults(func=cmd_clean)

    pl = sub.add_parser("plan", help="run one learned-RRT plan on a cleaned dataset")
    pl.add_argument("--dataset", type=Path, required=True)
    pl.add_argument("--config", type=Path)
    pl.add_argument("--start", type=_pair)
    pl.add_argument("--goal", type=_pair)
    pl.add_argument("--seed", type=int)
    pl.add_argument("--out", type=Path, required=True, help="output directory")
    pl.add_argument("--dense", action="store_true", help="also write integrated edge samples")
    pl.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="run the multi-epoch swing-up benchmark")
    b.add_argument("--config", type=Path)
    b.add_argument("--out", type=Path, required=True, help="output directory")
    b.add_argument("--seed", type=int)
    b.add_argument("--epochs", type=int)
    b.add_argument("--runs", type=int)
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("inspect", help="print dataset statistics")
    i.add_argument("--dataset", type=Path, required=True)
    i.add_argument("--k", type=int, default=3)
    i.set_defaults(func=cmd_inspect)
    return p


def _glue_negative_values(argv):
    # let "--start -3.14,0" through: argparse would take "-3.14,0" for an option
    out = []
    it = iter(argv)
    for a in it:
        if a in ("--start", "--goal"):
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    argv = _glue_negative_values(sys.argv[1:] if argv is None else list(argv))
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        result = args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(result, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
