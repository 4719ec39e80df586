"""Command-line entry point: ``ratio-forge {train,estimate-ratio,estimate-divergence}``.

Exit codes: 0 ok, 2 usage error, 3 training halted on a stability event.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .data import (
    DiscretePair,
    Empirical,
    Gaussian,
    analytic_kl_gaussians,
    analytic_ratio,
    brute_force_divergence,
    parse_dataset,
    read_points_csv,
    sample,
    write_points_csv,
)
from .fgen import parse_divergence
from .gan import LOG_FIELDS, TrainConfig, train
from .ratio import (
    estimate_divergence_plugin,
    estimate_divergence_variational,
    fit_ratio,
    ratio_forward,
)

EXIT_OK, EXIT_USAGE, EXIT_HALT = 0, 2, 3
SEED_ENV = "RATIO_FORGE_SEED"


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _divergence(text):
    try:
        parse_divergence(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text.strip().lower()


def _hidden(text):
    try:
        sizes = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad layer widths {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("layer widths must be positive")
    return sizes


def _fmt(x) -> str:
    return f"{x:.17g}"


def write_log_header(fh):
    fh.write(",".join(LOG_FIELDS) + "\n")


def write_log_row(fh, rec):
    fh.write(",".join([str(rec.step), _fmt(rec.mean_r_real), _fmt(rec.mean_r_fake),
                       _fmt(rec.dstep_loss), _fmt(rec.gstep_loss), _fmt(rec.div_delta), rec.flag]) + "\n")


def run_id(config: TrainConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha1(blob).hexdigest()[:12]


def load_manifest_config(path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    return TrainConfig(**manifest["config"])


# subcommands -----------------------------------------------------------------

def cmd_train(args) -> int:
    if args.manifest:
        config = load_manifest_config(args.manifest)
    else:
        seed = args.seed if args.seed is not None else _default_seed()
        try:
            parse_dataset(args.dataset)
        except (ValueError, OSError) as exc:
            raise UsageError(str(exc)) from None
        try:
            config = TrainConfig(
                divergence=args.divergence, gstep_variant=args.gstep, steps=args.steps,
                batch=args.batch, lr=args.lr, ratio_scale=args.ratio_scale,
                relative_alpha=args.relative_alpha, seed=seed, dataset=args.dataset,
                log_every=args.log_every, hidden=args.hidden, snapshot_every=args.snapshot_every,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    out = args.out
    os.makedirs(out, exist_ok=True)
    started = time.time()
    log_path = os.path.join(out, "log.csv")
    with open(log_path, "w", encoding="utf-8", newline="") as fh:
        write_log_header(fh)

        def stream(rec):
            write_log_row(fh, rec)
            fh.flush()

        result = train(config, on_record=stream)
    sample_files = []
    for step, points in sorted(result.snapshots.items()):
        name = f"samples_{step}.csv"
        write_points_csv(os.path.join(out, name), points)
        sample_files.append(name)
    finished = time.time()
    manifest = {
        "run_id": run_id(config),
        "version": __version__,
        "config": config.to_dict(),
        "artifacts": {"log": "log.csv", "samples": sample_files},
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished_at": datetime.fromtimestamp(finished, timezone.utc).isoformat(),
        "elapsed_seconds": round(finished - started, 3),
        "halted": result.halted,
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    if result.halted:
        last = result.records[-1]
        print(f"training halted at step {last.step} ({last.flag})", file=sys.stderr)
        return EXIT_HALT
    return EXIT_OK


def _load_pair(args, rng):
    try:
        p_spec, q_spec = parse_dataset(args.p), parse_dataset(args.q)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    if p_spec.dim != q_spec.dim:
        raise UsageError(f"dimension mismatch: p has dim {p_spec.dim}, q has dim {q_spec.dim}")
    xp = p_spec.points if isinstance(p_spec, Empirical) else sample(p_spec, args.n, rng)
    xq = q_spec.points if isinstance(q_spec, Empirical) else sample(q_spec, args.n, rng)
    return p_spec, q_spec, xp, xq


def _fit(args, xp, xq, rng):
    gen = parse_divergence(args.divergence)
    model, _ = fit_ratio(xp, xq, gen, rng, steps=args.steps, batch=args.batch, lr=args.lr,
                         scale=args.ratio_scale, hidden=args.hidden,
                         relative_alpha=args.relative_alpha)
    return gen, model


def _analytic(spec) -> bool:
    return not isinstance(spec, Empirical)


def _grid(text, dim):
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"bad --grid {text!r}; expected LO:HI:N") from None
    if dim != 1:
        raise UsageError("--grid only applies to 1-D data")
    return np.linspace(lo, hi, n)[:, None]


def cmd_estimate_ratio(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    rng = np.random.default_rng(seed)
    p_spec, q_spec, xp, xq = _load_pair(args, rng)
    dim = xp.shape[1]
    if args.grid is not None or dim == 1:
        points = _grid(args.grid or "-2:3:201", dim)
    else:
        points = sample(q_spec, 1000, rng)
    gen, model = _fit(args, xp, xq, rng)
    est = ratio_forward(model, points)
    summary = {
        "divergence": gen.name,
        "mean_ratio": float(np.mean(ratio_forward(model, xq))),
        "n_p": int(len(xp)),
        "n_q": int(len(xq)),
    }
    columns = [f"x{i}" for i in range(dim)] + ["r_hat"]
    table = [points, est[:, None]]
    if _analytic(p_spec) and _analytic(q_spec):
        truth = analytic_ratio(p_spec, q_spec, points)
        summary["mse"] = float(np.mean((est - truth) ** 2))
        summary["relative_mse"] = float(np.mean((est - truth) ** 2) / np.mean(truth ** 2))
        columns.append("r_true")
        table.append(truth[:, None])
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "ratio.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(columns) + "\n")
            for row in np.hstack(table):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8", newline="") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    print(json.dumps(summary))
    return EXIT_OK


def _discrete_estimates(args):
    try:
        p = read_points_csv(args.p)
        q = read_points_csv(args.q)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    if p.shape != q.shape or p.shape[1] != 1:
        raise UsageError("discrete pmfs must be single-column CSVs of equal length")
    try:
        pair = DiscretePair(p[:, 0], q[:, 0])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    gen = parse_divergence(args.divergence)
    table = pair.ratio
    support = np.arange(pair.k)[:, None]

    def lookup(idx):
        return table[np.asarray(idx, dtype=int)[:, 0]]

    return {
        "divergence": gen.name,
        "plugin": estimate_divergence_plugin(gen, lookup, support, weights=pair.q),
        "variational": estimate_divergence_variational(gen, lookup, support, support,
                                                       real_weights=pair.p, fake_weights=pair.q),
        "exact": brute_force_divergence(pair, gen),
    }


def cmd_estimate_divergence(args) -> int:
    if args.discrete:
        result = _discrete_estimates(args)
    else:
        seed = args.seed if args.seed is not None else _default_seed()
        rng = np.random.default_rng(seed)
        p_spec, q_spec, xp, xq = _load_pair(args, rng)
        gen, model = _fit(args, xp, xq, rng)
        result = {
            "divergence": gen.name,
            "plugin": estimate_divergence_plugin(gen, model, xq),
            "variational": estimate_divergence_variational(gen, model, xp, xq),
        }
        if isinstance(p_spec, Gaussian) and isinstance(q_spec, Gaussian) and gen.name == "kl":
            result["analytic_kl"] = analytic_kl_gaussians(p_spec, q_spec)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "divergence.json"), "w", encoding="utf-8", newline="") as fh:
            json.dump(result, fh, indent=2)
            fh.write("\n")
    print(json.dumps(result))
    return EXIT_OK


# parser ----------------------------------------------------------------------

def _add_estimation_flags(sp):
    sp.add_argument("--p", required=True, help="dataset spec or headerless CSV for the numerator")
    sp.add_argument("--q", required=True, help="dataset spec or headerless CSV for the denominator")
    sp.add_argument("--divergence", type=_divergence, default="pearson")
    sp.add_argument("--steps", type=int, default=4000)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--n", type=int, default=2000, help="samples per side for analytic specs")
    sp.add_argument("--batch", type=int, default=256)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--ratio-scale", type=float, default=20.0)
    sp.add_argument("--relative-alpha", type=float, default=0.0)
    sp.add_argument("--hidden", type=_hidden, default=(32, 32))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratio-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run b-GAN training on a synthetic dataset")
    t.add_argument("--divergence", type=_divergence, default="pearson")
    t.add_argument("--gstep", choices=("f", "fprime", "conjugate"), default="f")
    t.add_argument("--dataset", default="ring:8:2.0:0.02")
    t.add_argument("--steps", type=int, default=20000)
    t.add_argument("--batch", type=int, default=64)
    t.add_argument("--lr", type=float, default=5e-5)
    t.add_argument("--ratio-scale", type=float, default=2.0)
    t.add_argument("--relative-alpha", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", required=True)
    t.add_argument("--log-every", type=int, default=100)
    t.add_argument("--snapshot-every", type=int, default=1000)
    t.add_argument("--hidden", type=_hidden, default=(64, 64))
    t.add_argument("--manifest", default=None, help="re-run the config stored in a manifest.json")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("estimate-ratio", help="fit a density ratio p/q from samples")
    _add_estimation_flags(r)
    r.add_argument("--grid", default=None, help="LO:HI:N evaluation grid for 1-D data")
    r.set_defaults(func=cmd_estimate_ratio)

    d = sub.add_parser("estimate-divergence", help="two-step f-divergence estimate")
    _add_estimation_flags(d)
    d.add_argument("--discrete", action="store_true",
                   help="--p/--q are pmf CSVs (one probability per row); use the exact ratio table")
    d.set_defaults(func=cmd_estimate_divergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"{parser.prog}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
