"""f-divergence generators: the alpha family and the power (beta) family.

Every generator satisfies f(1) = 0 and f'(1) = 0, so divergences stay
meaningful between unnormalized measures such as ``q * r_model``.
All functions accept scalars or numpy arrays and return the same shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

R_FLOOR = 1e-6
# alpha within this band of +-1 is routed to the KL / reversed-KL closed forms
SINGULAR_BAND = 1e-3


@dataclass(frozen=True)
class FGen:
    """A divergence generator.

    ``kind`` is ``"alpha"`` or ``"power"``; ``param`` holds alpha or beta.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("alpha", "power"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not math.isfinite(self.param):
            raise ValueError("generator parameter must be finite")
        if self.kind == "power" and (self.param == 0.0 or self.param == -1.0):
            raise ValueError("power divergence needs beta not in {0, -1}")

    @property
    def branch(self) -> str:
        """Closed-form branch used for evaluation."""
        if self.kind == "power":
            return "power"
        if abs(self.param - 1.0) < SINGULAR_BAND:
            return "kl"
        if abs(self.param + 1.0) < SINGULAR_BAND:
            return "rkl"
        if self.param == 3.0:
            return "pearson"
        return "alpha"

    @property
    def name(self) -> str:
        if self.kind == "power":
            return f"power:{self.param:g}"
        if self.param == 1.0:
            return "kl"
        if self.param == -1.0:
            return "rkl"
        if self.param == 3.0:
            return "pearson"
        return f"alpha:{self.param:g}"

    def __str__(self):
        return self.name


KL = FGen("alpha", 1.0)
PEARSON = FGen("alpha", 3.0)
REVERSED_KL = FGen("alpha", -1.0)
DEFAULT_POWER_BETA = 0.5

_ALIASES = {
    "kl": KL,
    "pearson": PEARSON,
    "rkl": REVERSED_KL,
    "reversed-kl": REVERSED_KL,
}


def alpha(a: float) -> FGen:
    return FGen("alpha", float(a))


def power(b: float = DEFAULT_POWER_BETA) -> FGen:
    return FGen("power", float(b))


def parse_divergence(text: str) -> FGen:
    """Parse ``kl``, ``pearson``, ``rkl``, ``alpha:<a>`` or ``power:<b>``."""
    key = text.strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    head, sep, tail = key.partition(":")
    if head == "power" and not sep:
        return power()
    if sep and head in ("alpha", "power"):
        try:
            value = float(tail)
        except ValueError:
            raise ValueError(f"bad divergence parameter in {text!r}") from None
        return alpha(value) if head == "alpha" else power(value)
    raise ValueError(f"unknown divergence {text!r}")


def _prep(r):
    r = np.asarray(r, dtype=np.float64)
    if not np.all(np.isfinite(r)) or np.any(r <= 0.0):
        raise ValueError("density ratio arguments must be finite and > 0")
    return np.maximum(r, R_FLOOR)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _alpha_generic_check(a):
    if abs(1.0 - a) < SINGULAR_BAND or abs(1.0 + a) < SINGULAR_BAND:
        raise ValueError(f"alpha={a} is inside the singular band; use the closed form")


def f_value(gen: FGen, r):
    r = _prep(r)
    branch = gen.branch
    if branch == "kl":
        out = r * np.log(r) - r + 1.0
    elif branch == "rkl":
        out = -np.log(r) + r - 1.0
    elif branch == "pearson":
        out = 0.5 * (r - 1.0) ** 2
    elif branch == "power":
        b = gen.param
        out = (r ** (b + 1.0) - (b + 1.0) * r + b) / (b * (b + 1.0))
    else:
        a = gen.param
        _alpha_generic_check(a)
        out = 4.0 / (1.0 - a * a) * (1.0 - r ** ((1.0 + a) / 2.0)) + 2.0 / (1.0 - a) * (r - 1.0)
    return _out(out)


def f_prime(gen: FGen, r):
    r = _prep(r)
    branch = gen.branch
    if branch == "kl":
        out = np.log(r)
    elif branch == "rkl":
        out = 1.0 - 1.0 / r
    elif branch == "pearson":
        out = r - 1.0
    elif branch == "power":
        b = gen.param
        out = (r ** b - 1.0) / b
    else:
        a = gen.param
        _alpha_generic_check(a)
        out = 2.0 / (1.0 - a) * (1.0 - r ** ((a - 1.0) / 2.0))
    return _out(out)


def f_second(gen: FGen, r):
    r = _prep(r)
    branch = gen.branch
    if branch == "kl":
        out = 1.0 / r
    elif branch == "rkl":
        out = 1.0 / (r * r)
    elif branch == "pearson":
        out = np.ones_like(r)
    elif branch == "power":
        out = r ** (gen.param - 1.0)
    else:
        _alpha_generic_check(gen.param)
        out = r ** ((gen.param - 3.0) / 2.0)
    return _out(out)


def conjugate_of_prime(gen: FGen, r):
    """f*(f'(r)) = r f'(r) - f(r), written in closed form per branch."""
    r = _prep(r)
    branch = gen.branch
    if branch == "kl":
        out = r - 1.0
    elif branch == "rkl":
        out = np.log(r)
    elif branch == "pearson":
        out = 0.5 * r * r - 0.5
    elif branch == "power":
        b = gen.param
        out = (r ** (b + 1.0) - 1.0) / (b + 1.0)
    else:
        a = gen.param
        _alpha_generic_check(a)
        out = 2.0 / (1.0 + a) * (r ** ((1.0 + a) / 2.0) - 1.0)
    return _out(out)


def bregman_pointwise(gen: FGen, r_true, r_model):
    """B_f[r_true || r_model] = f(r_true) - f(r_model) - f'(r_model)(r_true - r_model)."""
    r_true = np.asarray(r_true, dtype=np.float64)
    r_model = np.asarray(r_model, dtype=np.float64)
    out = (
        np.asarray(f_value(gen, r_true))
        - np.asarray(f_value(gen, r_model))
        - np.asarray(f_prime(gen, r_model)) * (r_true - r_model)
    )
    # true value is >= 0; only rounding can push it below
    return _out(np.maximum(out, 0.0))
