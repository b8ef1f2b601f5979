"""Single long training run per example; CSV learning curves for plotting.

    python scripts/run_learning_curve.py --T 4000 --out results/curves

Prints the critic error and actor gap at a few checkpoints so the log-linear
decay and the later plateau can be read off without a plot.
"""

import argparse
from pathlib import Path

from lqr_ac import harness
from lqr_ac.model import EXAMPLES
from lqr_ac.sampler import SampleConfig
from lqr_ac.trainer import TrainConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--T", type=int, default=4000)
    parser.add_argument("--stepsize", type=float, help="constant alpha = beta (default 4/T)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/curves")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    step = args.stepsize or 4.0 / args.T
    for name, build in EXAMPLES.items():
        cfg = TrainConfig(T=args.T, alpha=step, beta=step, sample=SampleConfig(), seed=args.seed)
        result = harness.run_single(build(), cfg, csv_path=out / f"{name}.csv")
        print(f"== {name} -> {out / f'{name}.csv'}")
        marks = sorted({max(1, int(args.T * f)) for f in (0.01, 0.1, 0.25, 0.5, 0.75, 1.0)})
        for row in result.log:
            if row.t in marks:
                print(f"  t={row.t:5d}  critic_err_sq={row.critic_err_sq:.3e}  actor_gap={row.actor_gap:.3e}")
        if result.error is not None:
            print(f"  aborted: {result.error}")


if __name__ == "__main__":
    main()
