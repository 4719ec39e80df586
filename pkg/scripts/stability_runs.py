"""Run the four-divergence stability comparison on the ring and report
whether each run completes or stops with a flag."""
import argparse

from ratio_forge.gan import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=40000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--divergences", nargs="+", default=["pearson", "kl", "rkl", "power:0.5"])
    ap.add_argument("--relative-alpha", type=float, default=0.0)
    args = ap.parse_args()
    for div in args.divergences:
        cfg = TrainConfig(divergence=div, steps=args.steps, seed=args.seed,
                          relative_alpha=args.relative_alpha, snapshot_every=0, snapshot_size=0)
        res = train(cfg)
        last = res.records[-1] if res.records else None
        status = "no records" if last is None else f"last step {last.step}, flag {last.flag}"
        print(f"{div:>10}: {status}")


if __name__ == "__main__":
    main()
