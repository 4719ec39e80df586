"""Density-ratio estimation by Bregman matching (the D-step).

A ratio network ends in a scaled sigmoid, so its output lies in (0, C).
Minimizing ``dstep_loss`` drives it toward p/q (or toward the relative
ratio p / (a p + (1-a) q) when the denominator batch is a mixture).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fgen
from .fgen import FGen
from .net import (
    AdamState,
    MlpParams,
    adam_init,
    adam_step,
    init_mlp,
    leaky_relu,
    mlp_backward,
    mlp_forward,
    scaled_sigmoid,
)

R_MIN = 1e-6
TOP_MARGIN = 1e-9


@dataclass
class RatioModel:
    net: MlpParams
    gen: FGen
    relative_alpha: float = 0.0

    def __post_init__(self):
        last = self.net.layers[-1].activation
        if last.name != "scaled_sigmoid":
            raise ValueError("ratio network must end in a scaled sigmoid")
        if self.net.out_dim != 1:
            raise ValueError("ratio network must have a scalar output")
        if not 0.0 <= self.relative_alpha < 1.0:
            raise ValueError("relative_alpha must lie in [0, 1)")

    @property
    def scale(self) -> float:
        return self.net.layers[-1].activation.param

    @property
    def dim(self) -> int:
        return self.net.in_dim


def build_ratio_model(dim, gen: FGen, rng, scale=2.0, hidden=(64, 64), slope=0.2,
                      relative_alpha=0.0) -> RatioModel:
    sizes = [dim, *hidden, 1]
    net = init_mlp(sizes, leaky_relu(slope), scaled_sigmoid(scale), rng)
    return RatioModel(net, gen, relative_alpha)


def _clamp(model: RatioModel, r):
    return np.clip(r, R_MIN, model.scale - TOP_MARGIN)


def ratio_with_tape(model: RatioModel, x):
    out, tape = mlp_forward(model.net, x)
    return _clamp(model, out[:, 0]), tape


def ratio_forward(model: RatioModel, x) -> np.ndarray:
    return ratio_with_tape(model, x)[0]


def _wmean(values, weights):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty batch")
    if weights is None:
        return float(np.mean(values))
    weights = np.asarray(weights, dtype=np.float64)
    return float(np.sum(weights * values) / np.sum(weights))


def dstep_loss(gen: FGen, r_real, r_fake, real_weights=None, fake_weights=None) -> float:
    """Empirical BR_f: mean_fake[r f'(r) - f(r)] - mean_real[f'(r)]."""
    return (_wmean(fgen.conjugate_of_prime(gen, np.asarray(r_fake)), fake_weights)
            - _wmean(fgen.f_prime(gen, np.asarray(r_real)), real_weights))


def dstep_gradients(model: RatioModel, real_batch, fake_batch):
    """Return ``(loss, grads, r_real, r_fake)`` for one D-step.

    Both batches go through one stacked forward pass. The per-sample
    upstream is d/dr of the loss terms: ``r f''(r) / B`` on fake rows and
    ``-f''(r) / B`` on real rows. Clamped outputs pass the gradient
    straight through.
    """
    real_batch = np.asarray(real_batch, dtype=np.float64)
    fake_batch = np.asarray(fake_batch, dtype=np.float64)
    n_real = len(real_batch)
    if n_real == 0 or len(fake_batch) == 0:
        raise ValueError("empty batch")
    r, tape = ratio_with_tape(model, np.vstack([real_batch, fake_batch]))
    r_real, r_fake = r[:n_real], r[n_real:]
    loss = dstep_loss(model.gen, r_real, r_fake)
    up = np.empty_like(r)
    up[:n_real] = -fgen.f_second(model.gen, r_real) / n_real
    up[n_real:] = r_fake * fgen.f_second(model.gen, r_fake) / len(r_fake)
    grads, _ = mlp_backward(model.net, tape, up[:, None])
    return loss, grads, r_real, r_fake


def dstep_update(model: RatioModel, state: AdamState, real_batch, fake_batch):
    """One Adam step on the D-step loss.

    On a non-finite loss or gradient the model and state come back
    unchanged and the returned loss is NaN.
    """
    try:
        loss, grads, _, _ = dstep_gradients(model, real_batch, fake_batch)
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite D-step loss")
        state, net = adam_step(state, model.net, grads)
    except FloatingPointError:
        return model, state, float("nan")
    return RatioModel(net, model.gen, model.relative_alpha), state, loss


def relative_mixture_sample(real_sampler, fake_sampler, a: float, batch: int, rng) -> np.ndarray:
    """Rows drawn from p with probability ``a``, otherwise from q.

    Samplers are callables ``n -> (n, d) array``.
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError("mixture weight must lie in [0, 1]")
    from_p = rng.random(batch) < a
    n_p = int(from_p.sum())
    parts = {}
    if n_p:
        parts[True] = np.asarray(real_sampler(n_p), dtype=np.float64)
    if batch - n_p:
        parts[False] = np.asarray(fake_sampler(batch - n_p), dtype=np.float64)
    dim = next(iter(parts.values())).shape[1]
    out = np.empty((batch, dim))
    for key, rows in parts.items():
        out[from_p == key] = rows
    return out


def _ratio_values(model, batch):
    if isinstance(model, RatioModel):
        return ratio_forward(model, batch)
    return np.asarray(model(batch), dtype=np.float64)


def estimate_divergence_plugin(gen: FGen, model, fake_batch, weights=None) -> float:
    """mean f(r(x)) over generated points: the estimate of D_f(q r || q).

    ``model`` is a RatioModel or any callable mapping a batch to ratios;
    ``weights`` turns the mean into a weighted sum (exact expectations on
    discrete supports).
    """
    if len(fake_batch) == 0:
        raise ValueError("empty batch")
    return _wmean(fgen.f_value(gen, _ratio_values(model, fake_batch)), weights)


def estimate_divergence_variational(gen: FGen, model, real_batch, fake_batch,
                                    real_weights=None, fake_weights=None) -> float:
    """Negative D-step loss; a lower bound on D_f(p||q), tight at r = p/q."""
    if len(real_batch) == 0 or len(fake_batch) == 0:
        raise ValueError("empty batch")
    return -dstep_loss(gen, _ratio_values(model, real_batch), _ratio_values(model, fake_batch),
                       real_weights, fake_weights)


def fit_ratio(p_samples, q_samples, gen: FGen, rng, steps=5000, batch=256, lr=1e-3,
              scale=2.0, hidden=(64, 64), slope=0.2, relative_alpha=0.0):
    """Fit a ratio network to finite samples by minibatch Adam.

    With ``relative_alpha > 0`` the denominator batch mixes in rows of
    ``p_samples`` so the fit targets the relative ratio.
    Returns ``(model, losses)``.
    """
    p_samples = np.atleast_2d(np.asarray(p_samples, dtype=np.float64))
    q_samples = np.atleast_2d(np.asarray(q_samples, dtype=np.float64))
    if p_samples.shape[1] != q_samples.shape[1]:
        raise ValueError("p and q samples disagree in dimension")
    model = build_ratio_model(p_samples.shape[1], gen, rng, scale=scale, hidden=hidden,
                              slope=slope, relative_alpha=relative_alpha)
    state = adam_init(model.net, lr=lr)

    def draw(pool, n):
        return pool[rng.integers(0, len(pool), size=n)]

    losses = np.empty(steps)
    for t in range(steps):
        real = draw(p_samples, batch)
        if relative_alpha > 0:
            fake = relative_mixture_sample(lambda n: draw(p_samples, n),
                                           lambda n: draw(q_samples, n),
                                           relative_alpha, batch, rng)
        else:
            fake = draw(q_samples, batch)
        model, state, losses[t] = dstep_update(model, state, real, fake)
    return model, losses
