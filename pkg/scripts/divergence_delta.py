"""Train on the 8-mode ring and summarize the paired G-step divergence delta
(plug-in divergence before minus after each logged G-step, same noise).

Writes the per-record deltas as CSV so an external plotter can draw the
histogram.
"""
import argparse
import csv

import numpy as np

from ratio_forge.gan import FLAG_OK, TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--divergence", default="pearson")
    ap.add_argument("--gstep", default="f", choices=("f", "fprime", "conjugate"))
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--out", default="deltas.csv")
    args = ap.parse_args()
    rows = []
    for seed in args.seeds:
        cfg = TrainConfig(divergence=args.divergence, gstep_variant=args.gstep, steps=args.steps,
                          seed=seed, snapshot_every=0, snapshot_size=0)
        res = train(cfg)
        deltas = np.array([r.div_delta for r in res.records if r.flag == FLAG_OK])
        print(f"seed {seed}: {len(deltas)} records, positive fraction {np.mean(deltas > 0):.3f}, "
              f"median {np.median(deltas):.3g}, halted={res.halted}")
        rows.extend((seed, r.step, r.div_delta) for r in res.records)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "step", "div_delta"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
