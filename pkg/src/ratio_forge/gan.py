"""Generator step and the alternating b-GAN training loop.

Each iteration makes one D-step (Bregman ratio fit) and one G-step
(minimize the plug-in divergence mean f(r(G(z))) through the frozen ratio
network). Both steps share the same noise batch.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fgen
from .data import Mixture, parse_dataset, ring_centers, sample
from .fgen import FGen, parse_divergence
from .net import (
    LINEAR,
    TANH,
    AdamState,
    MlpParams,
    adam_init,
    adam_step,
    grad_norm,
    init_mlp,
    leaky_relu,
    mlp_backward,
    mlp_forward,
)
from .ratio import (
    RatioModel,
    build_ratio_model,
    dstep_gradients,
    estimate_divergence_plugin,
    ratio_forward,
    ratio_with_tape,
    relative_mixture_sample,
)

GSTEP_VARIANTS = ("f", "fprime", "conjugate")
FLAG_OK, FLAG_NAN, FLAG_HALT = "ok", "nan", "halt"
STALL_GRAD_NORM = 1e-12
STALL_PATIENCE = 100


@dataclass
class GeneratorModel:
    net: MlpParams

    @property
    def noise_dim(self) -> int:
        return self.net.in_dim

    @property
    def data_dim(self) -> int:
        return self.net.out_dim


def build_generator(noise_dim, data_dim, rng, hidden=(64, 64), slope=0.2,
                    output="linear") -> GeneratorModel:
    out_act = {"linear": LINEAR, "tanh": TANH}[output]
    return GeneratorModel(init_mlp([noise_dim, *hidden, data_dim], leaky_relu(slope), out_act, rng))


def sample_noise(n, noise_dim, rng) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n, noise_dim))


def generator_forward(model: GeneratorModel, z) -> np.ndarray:
    return mlp_forward(model.net, z)[0]


def _gstep_per_sample(gen: FGen, variant: str, r):
    if variant == "f":
        return fgen.f_value(gen, r)
    if variant == "fprime":
        return -fgen.f_prime(gen, r)
    if variant == "conjugate":
        return -fgen.conjugate_of_prime(gen, r)
    raise ValueError(f"unknown G-step variant {variant!r}")


def gstep_objective_derivative(gen: FGen, variant: str, r):
    """d/dr of the per-sample G-step objective: f'(r), -f''(r) or -r f''(r)."""
    if variant == "f":
        return fgen.f_prime(gen, r)
    if variant == "fprime":
        return -fgen.f_second(gen, r)
    if variant == "conjugate":
        return -np.asarray(r) * fgen.f_second(gen, r)
    raise ValueError(f"unknown G-step variant {variant!r}")


def gstep_loss(gen: FGen, variant: str, r_values) -> float:
    r_values = np.asarray(r_values, dtype=np.float64)
    if r_values.size == 0:
        raise ValueError("empty batch")
    return float(np.mean(_gstep_per_sample(gen, variant, r_values)))


def gstep_gradients(gen_model: GeneratorModel, ratio_model: RatioModel, z, variant="f"):
    """Return ``(loss, generator_grads)``; the ratio network only relays gradients."""
    x, g_tape = mlp_forward(gen_model.net, z)
    r, r_tape = ratio_with_tape(ratio_model, x)
    loss = gstep_loss(ratio_model.gen, variant, r)
    up = gstep_objective_derivative(ratio_model.gen, variant, r) / len(r)
    _, dx = mlp_backward(ratio_model.net, r_tape, up[:, None])
    grads, _ = mlp_backward(gen_model.net, g_tape, dx)
    return loss, grads


@dataclass
class TrainConfig:
    divergence: str = "pearson"
    gstep_variant: str = "f"
    steps: int = 20000
    batch: int = 64
    lr: float = 5e-5
    ratio_scale: float = 2.0
    relative_alpha: float = 0.0
    seed: int = 0
    dataset: str = "ring:8:2.0:0.02"
    log_every: int = 100
    noise_dim: int = 2
    hidden: tuple = (64, 64)
    slope: float = 0.2
    snapshot_every: int = 1000
    snapshot_size: int = 1000

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not self.ratio_scale > 0:
            raise ValueError("ratio scale must be > 0")
        if not 0.0 <= self.relative_alpha < 1.0:
            raise ValueError("relative_alpha must lie in [0, 1)")
        if self.gstep_variant not in GSTEP_VARIANTS:
            raise ValueError(f"gstep variant must be one of {GSTEP_VARIANTS}")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        parse_divergence(self.divergence)

    @property
    def gen(self) -> FGen:
        return parse_divergence(self.divergence)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def gstep_update(gen_model: GeneratorModel, ratio_model: RatioModel, state: AdamState, z,
                 config: TrainConfig):
    """One Adam step on the generator; the ratio model is left untouched.

    Non-finite loss or gradients leave generator and state unchanged and
    return a NaN loss.
    """
    try:
        loss, grads = gstep_gradients(gen_model, ratio_model, z, config.gstep_variant)
        if not math.isfinite(loss):
            raise FloatingPointError("non-finite G-step loss")
        state, net = adam_step(state, gen_model.net, grads)
    except FloatingPointError:
        return gen_model, state, float("nan")
    return GeneratorModel(net), state, loss


@dataclass
class TrainLogRecord:
    step: int
    mean_r_real: float
    mean_r_fake: float
    dstep_loss: float
    gstep_loss: float
    div_delta: float
    flag: str = FLAG_OK


LOG_FIELDS = ("step", "mean_r_real", "mean_r_fake", "dstep_loss", "gstep_loss", "div_delta", "flag")


@dataclass
class TrainResult:
    records: list[TrainLogRecord]
    generator: GeneratorModel
    ratio: RatioModel
    snapshots: dict = field(default_factory=dict)

    @property
    def halted(self) -> bool:
        return bool(self.records) and self.records[-1].flag != FLAG_OK


def train(config: TrainConfig, rng=None, on_record=None) -> TrainResult:
    """Run the alternating D-step / G-step loop.

    ``rng`` defaults to a generator seeded from ``config.seed``. Records are
    emitted every ``log_every`` steps; ``on_record`` (if given) sees each one
    as it is produced. A NaN/Inf loss, or a D-step gradient norm under
    1e-12 for 100 consecutive steps, stops the run with a flagged record.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    target = parse_dataset(config.dataset)
    gen = config.gen
    dim = target.dim
    ratio = build_ratio_model(dim, gen, rng, scale=config.ratio_scale, hidden=config.hidden,
                              slope=config.slope, relative_alpha=config.relative_alpha)
    generator = build_generator(config.noise_dim, dim, rng, hidden=config.hidden, slope=config.slope)
    d_state = adam_init(ratio.net, lr=config.lr)
    g_state = adam_init(generator.net, lr=config.lr)
    snap_z = sample_noise(config.snapshot_size, config.noise_dim, rng) if config.snapshot_size else None

    records: list[TrainLogRecord] = []
    snapshots = {}
    stalled = 0

    def emit(rec):
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    def fake_sampler(n):
        return generator_forward(generator, sample_noise(n, config.noise_dim, rng))

    for step in range(1, config.steps + 1):
        real = sample(target, config.batch, rng)
        z = sample_noise(config.batch, config.noise_dim, rng)
        log_now = step % config.log_every == 0 or step == config.steps
        flag = FLAG_OK
        r_real = r_fake = np.array([np.nan])
        d_loss = g_loss = delta = float("nan")
        try:
            fake = generator_forward(generator, z)
            if config.relative_alpha > 0:
                denom = relative_mixture_sample(lambda n: sample(target, n, rng), fake_sampler,
                                                config.relative_alpha, config.batch, rng)
            else:
                denom = fake
            d_loss, d_grads, r_real, r_fake = dstep_gradients(ratio, real, denom)
            if not math.isfinite(d_loss):
                raise FloatingPointError("non-finite D-step loss")
            stalled = stalled + 1 if grad_norm(d_grads) < STALL_GRAD_NORM else 0
            d_state, d_net = adam_step(d_state, ratio.net, d_grads)
            ratio = RatioModel(d_net, ratio.gen, ratio.relative_alpha)

            if log_now:
                before = estimate_divergence_plugin(gen, ratio, generator_forward(generator, z))
            generator, g_state, g_loss = gstep_update(generator, ratio, g_state, z, config)
            if not math.isfinite(g_loss):
                raise FloatingPointError("non-finite G-step loss")
            if log_now:
                after = estimate_divergence_plugin(gen, ratio, generator_forward(generator, z))
                delta = before - after
        except FloatingPointError:
            flag = FLAG_NAN
        if flag == FLAG_OK and stalled >= STALL_PATIENCE:
            flag = FLAG_HALT
        if log_now or flag != FLAG_OK:
            emit(TrainLogRecord(step, float(np.mean(r_real)), float(np.mean(r_fake)),
                                float(d_loss), float(g_loss), float(delta), flag))
        if snap_z is not None and config.snapshot_every and (
                step % config.snapshot_every == 0 or step == config.steps or flag != FLAG_OK):
            try:
                snapshots[step] = generator_forward(generator, snap_z)
            except FloatingPointError:
                pass
        if flag != FLAG_OK:
            break
    return TrainResult(records, generator, ratio, snapshots)


# diagnostics -----------------------------------------------------------------

def mode_coverage(points, mixture: Mixture, radius_in_stds=3.0, min_fraction=0.02) -> int:
    """Number of mixture components with at least ``min_fraction`` of the
    points inside ``radius_in_stds`` standard deviations of their center."""
    points = np.asarray(points, dtype=np.float64)
    centers = ring_centers(mixture)
    stds = np.array([g.std[0] for _, g in mixture.components])
    dist = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
    hits = (dist <= radius_in_stds * stds[None, :]).mean(axis=0)
    return int(np.sum(hits >= min_fraction))


def probe_divergence(gen: FGen, ratio: RatioModel, generator: GeneratorModel, z) -> float:
    return estimate_divergence_plugin(gen, ratio, generator_forward(generator, z))


def mean_ratio(ratio: RatioModel, x) -> float:
    return float(np.mean(ratio_forward(ratio, x)))
