"""Synthetic distributions with samplers and closed-form oracles.

Densities are evaluated in log space and exponentiated at the end so that
ratios in the tails do not underflow.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .fgen import FGen, f_value


@dataclass(frozen=True)
class Gaussian:
    mean: tuple
    std: tuple

    def __post_init__(self):
        mean = tuple(float(m) for m in np.atleast_1d(self.mean))
        std = tuple(float(s) for s in np.atleast_1d(self.std))
        if len(std) == 1 and len(mean) > 1:
            std = std * len(mean)
        if len(mean) != len(std):
            raise ValueError("mean and std dimensions disagree")
        if any(not s > 0 for s in std):
            raise ValueError("stds must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def sample(self, n, rng):
        return np.asarray(self.mean) + np.asarray(self.std) * rng.standard_normal((n, self.dim))

    def log_density(self, x):
        x = _points(x, self.dim)
        mu, sd = np.asarray(self.mean), np.asarray(self.std)
        z = (x - mu) / sd
        return -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(sd)) - 0.5 * self.dim * math.log(2 * math.pi)


@dataclass(frozen=True)
class Mixture:
    components: tuple  # of (weight, Gaussian)

    def __post_init__(self):
        comps = tuple((float(w), g) for w, g in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        if any(not w > 0 for w, _ in comps):
            raise ValueError("mixture weights must be positive")
        if abs(sum(w for w, _ in comps) - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        if len({g.dim for _, g in comps}) != 1:
            raise ValueError("mixture components disagree in dimension")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0][1].dim

    @property
    def weights(self):
        return np.array([w for w, _ in self.components])

    def sample(self, n, rng):
        idx = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty((n, self.dim))
        for k, (_, g) in enumerate(self.components):
            mask = idx == k
            out[mask] = g.sample(int(mask.sum()), rng)
        return out

    def log_density(self, x):
        logs = np.stack([math.log(w) + g.log_density(x) for w, g in self.components])
        return logsumexp(logs, axis=0)


def ring(k: int = 8, radius: float = 2.0, std: float = 0.02) -> Mixture:
    """k equal-weight isotropic Gaussians evenly spaced on a circle."""
    angles = 2 * np.pi * np.arange(k) / k
    comps = [
        (1.0 / k, Gaussian((radius * math.cos(a), radius * math.sin(a)), (std, std)))
        for a in angles
    ]
    return Mixture(tuple(comps))


def ring_centers(mixture: Mixture) -> np.ndarray:
    return np.array([g.mean for _, g in mixture.components])


@dataclass(frozen=True)
class UniformBox:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or any(not h > l for l, h in zip(lo, hi)):
            raise ValueError("uniform box needs lo < hi in every dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def sample(self, n, rng):
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def log_density(self, x):
        x = _points(x, self.dim)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        inside = np.all((x >= lo) & (x <= hi), axis=1)
        return np.where(inside, -np.sum(np.log(hi - lo)), -np.inf)


@dataclass(frozen=True, eq=False)
class Empirical:
    """A finite point set; sampling draws rows with replacement."""

    points: np.ndarray
    source: str = ""

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def sample(self, n, rng):
        return self.points[rng.integers(0, len(self.points), size=n)]


def _points(x, dim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, dim) if dim > 1 else x.reshape(-1, 1)
    if x.shape[1] != dim:
        raise ValueError(f"points have dim {x.shape[1]}, distribution has dim {dim}")
    return x


def sample(spec, n: int, rng) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not hasattr(spec, "sample"):
        raise TypeError(f"not a distribution spec: {spec!r}")
    return spec.sample(int(n), rng)


def log_density(spec, x):
    if not hasattr(spec, "log_density"):
        raise TypeError(f"{type(spec).__name__} has no closed-form density")
    return spec.log_density(x)


def analytic_ratio(p, q, x):
    """p(x)/q(x), evaluated as exp(log p - log q)."""
    lp, lq = log_density(p, x), log_density(q, x)
    if np.any(~np.isfinite(lq)):
        raise ValueError("q(x) underflows or vanishes at some query point")
    out = np.exp(lp - lq)
    if np.any(~np.isfinite(out)):
        raise ValueError("density ratio overflows at some query point")
    return out


def analytic_relative_ratio(p, q, a: float, x):
    """p / (a p + (1-a) q); bounded by 1/a when a > 0."""
    if not 0.0 <= a < 1.0:
        raise ValueError("relative alpha must lie in [0, 1)")
    if a == 0.0:
        return analytic_ratio(p, q, x)
    lp, lq = log_density(p, x), log_density(q, x)
    if np.any(~np.isfinite(lq)):
        raise ValueError("q(x) underflows or vanishes at some query point")
    # 1 / (a + (1-a) q/p), with q/p computed in log space
    log_qp = lq - lp
    with np.errstate(over="ignore"):
        return 1.0 / (a + (1.0 - a) * np.exp(log_qp))


def analytic_kl_gaussians(p: Gaussian, q: Gaussian) -> float:
    if p.dim != q.dim:
        raise ValueError("Gaussians disagree in dimension")
    mp, sp = np.asarray(p.mean), np.asarray(p.std)
    mq, sq = np.asarray(q.mean), np.asarray(q.std)
    return float(np.sum(np.log(sq / sp) + (sp ** 2 + (mp - mq) ** 2) / (2 * sq ** 2) - 0.5))


@dataclass(frozen=True, eq=False)
class DiscretePair:
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64).ravel()
        q = np.asarray(self.q, dtype=np.float64).ravel()
        if p.shape != q.shape or p.size < 1:
            raise ValueError("p and q must be nonempty and of equal length")
        if np.any(p <= 0) or np.any(q <= 0):
            raise ValueError("pmf entries must be positive")
        if abs(p.sum() - 1.0) > 1e-12 or abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("each pmf must sum to 1 within 1e-12")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def k(self) -> int:
        return self.p.size

    @property
    def ratio(self) -> np.ndarray:
        return self.p / self.q


def random_discrete_pair(k: int, rng) -> DiscretePair:
    p = rng.dirichlet(np.ones(k))
    q = rng.dirichlet(np.ones(k))
    # renormalize after flooring so tiny masses do not break positivity
    p = np.maximum(p, 1e-3)
    q = np.maximum(q, 1e-3)
    return DiscretePair(p / p.sum(), q / q.sum())


def brute_force_divergence(pair: DiscretePair, gen: FGen) -> float:
    """D_f(p||q) = sum_x q(x) f(p(x)/q(x)) by direct enumeration."""
    total = 0.0
    for px, qx in zip(pair.p, pair.q):
        total += qx * f_value(gen, px / qx)
    return float(total)


# text encodings -------------------------------------------------------------

def parse_dataset(text: str):
    """Decode a dataset spec string or a CSV path.

    Accepted: ``gauss2d``, ``gauss2d:<mx>:<my>:<sigma>``, ``gauss1d:<mu>:<sigma>``,
    ``ring:<k>:<radius>:<std>``, ``uniform:<lo>:<hi>[:<dim>]``, or a path to a
    headerless CSV with one point per row.
    """
    raw = text.strip()
    if raw.lower().endswith(".csv") or os.path.sep in raw or os.path.exists(raw):
        return Empirical(read_points_csv(raw), source=raw)
    head, *rest = raw.lower().split(":")
    try:
        vals = [float(v) for v in rest]
    except ValueError:
        raise ValueError(f"bad numeric field in dataset spec {text!r}") from None
    if head == "gauss2d":
        if not vals:
            return Gaussian((1.0, 1.0), (1.0, 1.0))
        if len(vals) == 3:
            return Gaussian((vals[0], vals[1]), (vals[2], vals[2]))
    elif head == "gauss1d":
        if not vals:
            return Gaussian((0.0,), (1.0,))
        if len(vals) == 2:
            return Gaussian((vals[0],), (vals[1],))
    elif head == "ring":
        if not vals:
            return ring()
        if len(vals) == 3:
            return ring(int(vals[0]), vals[1], vals[2])
    elif head == "uniform":
        if len(vals) in (2, 3):
            dim = int(vals[2]) if len(vals) == 3 else 1
            return UniformBox((vals[0],) * dim, (vals[1],) * dim)
    raise ValueError(f"unrecognized dataset spec {text!r}")


def read_points_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: no points")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


def write_points_csv(path, points) -> None:
    points = np.atleast_2d(points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row in points:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
