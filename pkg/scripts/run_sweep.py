"""Reproduce the convergence-rate sweep on both example systems.

    python scripts/run_sweep.py --out results/sweep --threads 4

Writes per-run CSVs and summary.json under <out>/example{1,2}/ and prints the
fitted log-log slopes and the monitored-norm maxima.
"""

import argparse
import sys
from pathlib import Path

from lqr_ac import harness

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", default="results/sweep")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--runs", type=int, help="override runs_per_t")
    parser.add_argument("--examples", nargs="+", default=["example1", "example2"])
    args = parser.parse_args()

    status = 0
    for name in args.examples:
        spec = harness.load_experiment(CONFIGS / f"sweep_{name}.json")
        if args.runs:
            spec.runs_per_t = args.runs
        result = harness.run_sweep(spec, out_dir=Path(args.out) / name, threads=args.threads)
        print(f"== {name}")
        for T in spec.t_list:
            print(f"  T={T:5d}  critic {result.mean_critic.get(T, float('nan')):.4e}"
                  f"  actor {result.mean_actor.get(T, float('nan')):.4e}  failed {result.failed[T]}")
        print(f"  slopes: critic {result.slope_critic:.3f}  actor {result.slope_actor:.3f}")
        print("  maxima: " + "  ".join(f"{k}={v:.3f}" for k, v in result.maxima().items()))
        status |= int(sum(result.failed.values()) > 0)
    return status


if __name__ == "__main__":
    sys.exit(main())
