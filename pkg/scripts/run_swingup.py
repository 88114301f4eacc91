#!/usr/bin/env python3
"""Generate, clean and fit one dataset, then plan a single swing-up.

Writes the dataset, the tree edge list, the highlighted path and the dense
edge samples (the data behind a tree plot) to the output directory.

    python3 scripts/run_swingup.py --out results/swingup --seed 3
"""
import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from colearn.cleaning import clean_dataset
from colearn.config import ExperimentConfig, load_config
from colearn.datagen import generate_dataset
from colearn.fileio import ensure_dir, write_dataset, write_dense_edges, write_tree
from colearn.planner import extract_path, plan
from colearn.surrogate import build_index


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path, default=Path(__file__).with_name("swingup.cfg"))
    ap.add_argument("--out", type=Path, default=Path("results/swingup"))
    ap.add_argument("--seed", type=int, default=0, help="planner seed")
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config.exists() else ExperimentConfig()
    out = ensure_dir(args.out)

    t0 = time.perf_counter()
    raw = generate_dataset(cfg.gen)
    t1 = time.perf_counter()
    data = clean_dataset(raw, cfg.clean)
    t2 = time.perf_counter()
    print(f"generated {len(raw)} entries in {t1 - t0:.1f} s, {len(data)} left after cleaning ({t2 - t1:.1f} s)")
    write_dataset(data, out / "dataset.csv")

    model = build_index(data, cfg.surrogate.k, percentile=cfg.surrogate.validity_percentile,
                        scale=cfg.surrogate.validity_scale, dt=cfg.gen.dt)
    pcfg = replace(cfg.planner, seed=args.seed)
    res = plan(pcfg, model)
    write_tree(res.tree, out / "tree.csv")
    write_dense_edges(res.tree, out / "tree_dense.csv", pcfg.dt, pcfg.w)
    summary = {"success": res.success, "nodes": res.n_nodes, "iterations": res.iterations_used,
               "wall_time": res.wall_time, "validity_threshold": model.validity_threshold}
    if res.success:
        write_tree(res.tree, out / "path.csv", ids=res.path)
        path = extract_path(res.tree, res.goal_node)
        summary["path_nodes"] = len(path)
        summary["final_state"] = list(path[-1][0])
        summary["path_cost"] = res.tree[res.goal_node].cost_to_come
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
