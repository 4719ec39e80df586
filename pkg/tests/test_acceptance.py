"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line
(collected into the pytest terminal summary) before asserting."""
import subprocess
import sys
import time

import numpy as np
import pytest

from ratio_forge import fgen
from ratio_forge.data import (
    Gaussian,
    analytic_kl_gaussians,
    analytic_ratio,
    brute_force_divergence,
    parse_dataset,
    random_discrete_pair,
    sample,
)
from ratio_forge.fgen import KL, PEARSON, REVERSED_KL, power
from ratio_forge.gan import (
    FLAG_OK,
    GeneratorModel,
    TrainConfig,
    build_generator,
    generator_forward,
    gstep_gradients,
    gstep_loss,
    mode_coverage,
    sample_noise,
    train,
)
from ratio_forge.ratio import (
    RatioModel,
    build_ratio_model,
    dstep_gradients,
    dstep_loss,
    estimate_divergence_plugin,
    estimate_divergence_variational,
    fit_ratio,
    ratio_forward,
)

from .conftest import ACCEPTANCE_LINES
from .oracles import fd_param_grads, max_rel_err, moment_matching_gradient

GENS = [KL, PEARSON, REVERSED_KL, power(0.5)]
P1, Q0 = Gaussian((1.0,), (1.0,)), Gaussian((0.0,), (1.0,))
RING = "ring:8:2.0:0.02"


def report(num, title, ok, detail, elapsed=None):
    timing = f" [{elapsed:.1f}s]" if elapsed is not None else ""
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} {title} ({detail}){timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _table(values):
    values = np.asarray(values, dtype=float)
    return lambda idx: values[np.asarray(idx)[:, 0].astype(int)]


def test_criterion_01_variational_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(100)
    support = np.arange(5)[:, None]
    worst_eq, worst_gap_ok = 0.0, True
    for _ in range(20):
        pair = random_discrete_pair(5, rng)
        for gen in GENS:
            exact = brute_force_divergence(pair, gen)
            at_truth = estimate_divergence_variational(gen, _table(pair.ratio), support, support,
                                                       pair.p, pair.q)
            worst_eq = max(worst_eq, abs(at_truth - exact))
            for _ in range(100):
                r_tilde = pair.ratio * np.exp(rng.normal(scale=0.3, size=5))
                val = estimate_divergence_variational(gen, _table(r_tilde), support, support,
                                                      pair.p, pair.q)
                worst_gap_ok &= val < exact
    elapsed = time.perf_counter() - t0
    ok = worst_eq < 1e-12 and worst_gap_ok and elapsed < 1.0
    report(1, "variational value peaks at the exact ratio",
           ok, f"max |diff| {worst_eq:.2e}, perturbed all smaller: {worst_gap_ok}", elapsed)


def test_criterion_02_conjugate_identity():
    t0 = time.perf_counter()
    r = np.linspace(0.01, 10.0, 1000)
    worst = 0.0
    for gen in GENS:
        direct = r * fgen.f_prime(gen, r) - fgen.f_value(gen, r)
        worst = max(worst, float(np.max(np.abs(direct - fgen.conjugate_of_prime(gen, r)))))
    elapsed = time.perf_counter() - t0
    report(2, "r f'(r) - f(r) equals the conjugate closed form",
           worst < 1e-12 and elapsed < 1.0, f"max err {worst:.2e}", elapsed)


def _biased(net, rng):
    for layer in net.layers:
        layer.bias[:] = rng.normal(scale=0.2, size=layer.bias.shape)


def test_criterion_03_gradient_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for gen in GENS:
        model = build_ratio_model(2, gen, rng, hidden=(8, 8))
        _biased(model.net, rng)
        real, fake = rng.normal(1, 1, size=(7, 2)), rng.normal(0, 1, size=(9, 2))
        _, grads, _, _ = dstep_gradients(model, real, fake)

        def d_loss(net):
            m = RatioModel(net, gen)
            return dstep_loss(gen, ratio_forward(m, real), ratio_forward(m, fake))

        for an, fd in zip(grads.arrays(), fd_param_grads(d_loss, model.net)):
            worst = max(worst, max_rel_err(an, fd, floor=1e-5))

        generator = build_generator(2, 2, rng, hidden=(8, 8))
        _biased(generator.net, rng)
        z = sample_noise(9, 2, rng)
        for variant in ("f", "fprime", "conjugate"):
            _, g_grads = gstep_gradients(generator, model, z, variant)

            def g_loss(net):
                x = generator_forward(GeneratorModel(net), z)
                return gstep_loss(gen, variant, ratio_forward(model, x))

            for an, fd in zip(g_grads.arrays(), fd_param_grads(g_loss, generator.net)):
                worst = max(worst, max_rel_err(an, fd, floor=1e-5))
    elapsed = time.perf_counter() - t0
    report(3, "D-step and G-step gradients match finite differences",
           worst < 1e-4 and elapsed < 30.0, f"max rel err {worst:.2e}", elapsed)


def test_criterion_04_moment_matching():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for gen in GENS:
        for _ in range(3):
            model = build_ratio_model(2, gen, rng, hidden=(16, 16))
            real, fake = rng.normal(1, 1, size=(32, 2)), rng.normal(0, 1, size=(24, 2))
            _, grads, _, _ = dstep_gradients(model, real, fake)
            ref = moment_matching_gradient(gen, model.net, real, fake)
            worst = max(worst, max(float(np.max(np.abs(a - b))) for a, b in zip(grads.arrays(), ref)))
    elapsed = time.perf_counter() - t0
    report(4, "D-step gradient equals the moment-matching form",
           worst < 1e-8 and elapsed < 5.0, f"max abs diff {worst:.2e}", elapsed)


RATIO_FIT = dict(steps=4000, batch=256, lr=1e-3, scale=20.0, hidden=(32, 32))


def _relative_mse(n, seed):
    rng = np.random.default_rng(seed)
    xp, xq = sample(P1, n, rng), sample(Q0, n, rng)
    model, _ = fit_ratio(xp, xq, PEARSON, rng, **RATIO_FIT)
    grid = np.linspace(-2.0, 3.0, 201)[:, None]
    truth = analytic_ratio(P1, Q0, grid)
    return float(np.mean((ratio_forward(model, grid) - truth) ** 2) / np.mean(truth ** 2))


@pytest.mark.slow
def test_criterion_05_ratio_consistency():
    t0 = time.perf_counter()
    means = {n: float(np.mean([_relative_mse(n, s) for s in range(5)])) for n in (500, 2000, 8000)}
    elapsed = time.perf_counter() - t0
    monotone = means[500] > means[2000] > means[8000]
    ok = monotone and means[8000] < 0.05 and elapsed < 120
    detail = ", ".join(f"n={n}: {v:.4f}" for n, v in means.items())
    report(5, "fitted ratio converges to exp(x - 0.5)", ok, f"relative MSE {detail}", elapsed)


@pytest.mark.slow
def test_criterion_06_kl_estimate():
    t0 = time.perf_counter()
    plug, var = [], []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        xp, xq = sample(P1, 2000, rng), sample(Q0, 2000, rng)
        model, _ = fit_ratio(xp, xq, KL, rng, **RATIO_FIT)
        plug.append(estimate_divergence_plugin(KL, model, xq))
        var.append(estimate_divergence_variational(KL, model, xp, xq))
    elapsed = time.perf_counter() - t0
    truth = analytic_kl_gaussians(P1, Q0)
    mp, mv = float(np.mean(plug)), float(np.mean(var))
    ok = abs(mp - truth) < 0.1 and abs(mv - truth) < 0.1 and elapsed < 120
    report(6, "two-step KL estimate near 0.5", ok, f"plug-in {mp:.4f}, variational {mv:.4f}", elapsed)


def _ring_config(seed, steps=20_000):
    return TrainConfig(divergence="pearson", dataset=RING, steps=steps, batch=64, lr=5e-5,
                       seed=seed, snapshot_every=0, snapshot_size=0)


@pytest.fixture(scope="module")
def ring_runs():
    t0 = time.perf_counter()
    runs = {seed: train(_ring_config(seed)) for seed in range(3)}
    return runs, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_07_divergence_delta(ring_runs):
    runs, elapsed = ring_runs
    fracs = []
    for res in runs.values():
        deltas = np.array([r.div_delta for r in res.records if r.flag == FLAG_OK])
        fracs.append(float(np.mean(deltas > 0)))
    ok = all(f > 0.6 for f in fracs)
    report(7, "G-step lowers the paired plug-in divergence",
           ok, "positive fraction per seed " + ", ".join(f"{f:.3f}" for f in fracs), elapsed)


@pytest.mark.slow
def test_criterion_08_stability():
    t0 = time.perf_counter()
    pearson = train(_ring_config(0, steps=40_000))
    kl_rel = train(TrainConfig(divergence="kl", relative_alpha=0.2, dataset=RING, steps=40_000,
                               batch=64, lr=5e-5, seed=0, snapshot_every=0, snapshot_size=0))
    elapsed = time.perf_counter() - t0
    p_ok = not pearson.halted and pearson.records[-1].step == 40_000
    k_ok = not kl_rel.halted and kl_rel.records[-1].step == 40_000
    report(8, "Pearson and relative-KL runs finish 40k steps unflagged", p_ok and k_ok,
           f"pearson last step {pearson.records[-1].step} flag {pearson.records[-1].flag}; "
           f"kl+relative last step {kl_rel.records[-1].step} flag {kl_rel.records[-1].flag}", elapsed)


@pytest.mark.slow
def test_criterion_09_mode_coverage(ring_runs):
    runs, elapsed = ring_runs
    target = parse_dataset(RING)
    covered = []
    for seed, res in runs.items():
        z = sample_noise(5000, 2, np.random.default_rng(1000 + seed))
        covered.append(mode_coverage(generator_forward(res.generator, z), target))
    mean = float(np.mean(covered))
    report(9, "generator covers at least 7 of 8 ring modes", mean >= 7 and elapsed < 600,
           f"modes covered per seed {covered}, mean {mean:.2f}", elapsed)


def test_criterion_10_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    logs = []
    for name in ("a", "b"):
        out = tmp_path / name
        cmd = [sys.executable, "-m", "ratio_forge", "train", "--steps", "1000", "--seed", "11",
               "--log-every", "50", "--out", str(out)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        logs.append((out / "log.csv").read_bytes())
    elapsed = time.perf_counter() - t0
    rows = len(logs[0].splitlines()) - 1
    report(10, "repeated train invocation gives a byte-identical log.csv", logs[0] == logs[1],
           f"{len(logs[0])} bytes, {rows} records", elapsed)
