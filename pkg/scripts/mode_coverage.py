"""Count ring modes covered by the generator after training, per seed.

A mode is covered when at least 2% of 5000 samples land within 3 stds of
its center.
"""
import argparse

import numpy as np

from ratio_forge.data import parse_dataset, ring_centers
from ratio_forge.gan import TrainConfig, generator_forward, mode_coverage, sample_noise, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--divergence", default="pearson")
    ap.add_argument("--gstep", default="f", choices=("f", "fprime", "conjugate"))
    ap.add_argument("--dataset", default="ring:8:2.0:0.02")
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--lr", type=float, default=5e-5)
    ap.add_argument("--hidden", default="64,64")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    hidden = tuple(int(v) for v in args.hidden.split(","))
    target = parse_dataset(args.dataset)
    centers = ring_centers(target)
    counts = []
    for seed in args.seeds:
        cfg = TrainConfig(divergence=args.divergence, gstep_variant=args.gstep, dataset=args.dataset,
                          steps=args.steps, lr=args.lr, hidden=hidden, seed=seed,
                          snapshot_every=0, snapshot_size=0)
        res = train(cfg)
        x = generator_forward(res.generator, sample_noise(5000, cfg.noise_dim, np.random.default_rng(seed)))
        nearest = np.linalg.norm(x[:, None] - centers[None], axis=2).min(axis=1)
        counts.append(mode_coverage(x, target))
        print(f"seed {seed}: modes {counts[-1]}, median radius {np.median(np.linalg.norm(x, axis=1)):.3f}, "
              f"median distance to nearest center {np.median(nearest):.3f}, halted={res.halted}")
    print(f"mean modes covered: {np.mean(counts):.2f}")


if __name__ == "__main__":
    main()
