#!/usr/bin/env python3
"""Multi-epoch swing-up benchmark.

Each epoch regenerates and recleans its data, measures steering error on
held-out simulations and runs a batch of seeded plans. ``runs.csv`` holds
one row per plan (boxplot data by epoch), ``epochs.csv`` the offline
statistics and ``report.json`` the summary.

    python3 scripts/bench_epochs.py --out results/bench              # 10 x 300 runs
    python3 scripts/bench_epochs.py --out results/quick --epochs 3 --runs 50
"""
import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from colearn.config import ExperimentConfig, load_config
from colearn.harness import run_experiment


def progress(epoch, erec, runs):
    mine = [r for r in runs if r.epoch == epoch]
    ok = [r for r in mine if r.success]
    med_t = np.median([r.wall_time for r in ok]) if ok else float("nan")
    print(f"epoch {epoch}: {erec.clean_entries} entries, steering error {erec.steering_error:.4f}, "
          f"offline {erec.gen_time + erec.clean_time:.1f} s | success {len(ok)}/{len(mine)}, "
          f"median nodes {np.median([r.n_nodes for r in mine]):.0f}, median time {med_t:.2f} s", flush=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path, default=Path(__file__).with_name("swingup.cfg"))
    ap.add_argument("--out", type=Path, default=Path("results/bench"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--runs", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    cfg = load_config(args.config) if args.config.exists() else ExperimentConfig()
    for name, value in (("seed", args.seed), ("n_epochs", args.epochs), ("runs_per_epoch", args.runs)):
        if value is not None:
            cfg = replace(cfg, **{name: value})
    report = run_experiment(cfg, args.out, progress=progress)
    print(json.dumps(report["pooled"], indent=2))


if __name__ == "__main__":
    main()
