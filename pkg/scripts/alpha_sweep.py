"""Loss table of CE + alpha * KL over a synthetic logit batch.

The counterfactual logits are the factual ones damped towards zero plus
noise, mimicking a model that keeps some signal after the actor is erased.
"""
import argparse
import sys

import numpy as np

from occlusim.car_math import DEFAULT_ALPHAS, alpha_sweep
from occlusim.report import rows_to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--batch", type=int, default=256)
    ap.add_argument("--classes", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epsilon", type=float, default=0.0)
    ap.add_argument("--mode", choices=["standard", "printed"], default="standard")
    ap.add_argument("--alphas", default=",".join(f"{a:g}" for a in DEFAULT_ALPHAS))
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    labels = rng.integers(0, args.classes, args.batch)
    p = rng.normal(0, 1, (args.batch, args.classes))
    p[np.arange(args.batch), labels] += 3.0
    c = 0.4 * p + rng.normal(0, 0.5, p.shape)
    alphas = [float(a) for a in args.alphas.split(",")]
    rows = alpha_sweep(p, c, [int(v) for v in labels], alphas, args.epsilon, args.mode)
    sys.stdout.write(rows_to_csv(rows, ["alpha", "ce", "kl", "loss"]))


if __name__ == "__main__":
    main()
