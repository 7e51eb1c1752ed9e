#!/usr/bin/env python3
"""Batch-size floor experiment for the evaluation algorithm.

Runs the same off-policy instance at several batch sizes and writes one
artifact directory per size (out/floor/M_<size>/...), ready for the
floor-vs-M figure.

    python scripts/linear_floor.py --out out/floor --seeds 20
"""

import argparse
import json
from pathlib import Path

from ttsa.harness import ExperimentConfig, run_experiment


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out/floor")
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--iterations", type=int, default=500)
    parser.add_argument("--batch-sizes", default="250,500,1000,2000,4000")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    base = {
        "algorithm": "linear-tdc",
        "mdp": {"name": "random-garnet", "states": 10, "actions": 2,
                "branching": 3, "seed": 0, "gamma": 0.5, "reward_scale": 0.5},
        "behavior_policy": {"kind": "uniform"},
        "target_policy": {"kind": "tilted", "weight": 0.7},
        "features": {"kind": "random", "d": 4, "seed": 1},
        "seeds": list(range(args.seeds)),
    }
    for m in (int(x) for x in args.batch_sizes.split(",")):
        doc = dict(base)
        doc["stepsizes"] = {"alpha": 2.0, "beta": 4.0, "batch_size": m,
                            "iterations": args.iterations}
        doc["out_dir"] = str(Path(args.out) / f"M_{m}")
        summary = run_experiment(ExperimentConfig.from_dict(doc), jobs=args.jobs)
        print(f"M={m}: final error {summary['seed_mean']['final_theta_err_sq']:.3e}")
    print(json.dumps({"out": args.out}, indent=2))


if __name__ == "__main__":
    main()
