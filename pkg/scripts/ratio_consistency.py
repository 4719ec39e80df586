"""Relative MSE of a fitted Pearson ratio against exp(x - 0.5) as the sample
size grows. Fits N(1,1) against N(0,1) and evaluates on a grid over [-2, 3].

    python3 scripts/ratio_consistency.py --sizes 500 2000 8000 --seeds 5
"""
import argparse
import json

import numpy as np

from ratio_forge.data import Gaussian, analytic_ratio, sample
from ratio_forge.fgen import parse_divergence
from ratio_forge.ratio import fit_ratio, ratio_forward


def relative_mse(n, seed, gen, steps):
    p, q = Gaussian((1.0,), (1.0,)), Gaussian((0.0,), (1.0,))
    rng = np.random.default_rng(seed)
    model, _ = fit_ratio(sample(p, n, rng), sample(q, n, rng), gen, rng, steps=steps,
                         batch=256, lr=1e-3, scale=20.0, hidden=(32, 32))
    grid = np.linspace(-2.0, 3.0, 201)[:, None]
    truth = analytic_ratio(p, q, grid)
    return float(np.mean((ratio_forward(model, grid) - truth) ** 2) / np.mean(truth ** 2))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--divergence", default="pearson")
    args = ap.parse_args()
    gen = parse_divergence(args.divergence)
    out = {}
    for n in args.sizes:
        vals = [relative_mse(n, s, gen, args.steps) for s in range(args.seeds)]
        out[n] = {"mean": float(np.mean(vals)), "per_seed": vals}
        print(f"n={n:6d}  relative MSE {out[n]['mean']:.4f}")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
