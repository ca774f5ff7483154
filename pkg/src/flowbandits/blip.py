"""Bayesian linear probit (BLIP) bandit model.

The weight posterior is a factorised Gaussian. Each binary observation is
absorbed by assumed-density filtering: the exact posterior
``prior(W) * Phi(y * b.W / beta)`` is projected back onto a diagonal Gaussian
by matching per-coordinate first and second moments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .features import FeatureVector
from .probit import phi_cdf, v_correction, w_correction


@dataclass(frozen=True)
class GaussianPosterior:
    mean: np.ndarray
    variance: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        var = np.array(self.variance, dtype=float).reshape(-1)
        if mean.shape != var.shape:
            raise ValueError("mean and variance lengths differ")
        if mean.size == 0:
            raise ValueError("posterior needs at least one weight")
        if not np.all(var > 0):
            raise ValueError("variances must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        mean.flags.writeable = False
        var.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_record(self) -> dict:
        """Flat snapshot ``{dim, beta, mean, variance}`` for run-state files."""
        return {
            "dim": self.dim,
            "beta": self.beta,
            "mean": self.mean.tolist(),
            "variance": self.variance.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "GaussianPosterior":
        post = cls(record["mean"], record["variance"], record["beta"])
        if post.dim != record["dim"]:
            raise ValueError("record dim does not match its vectors")
        return post


@dataclass(frozen=True)
class Observation:
    features: np.ndarray
    label: bool

    @property
    def sign(self) -> float:
        return 1.0 if self.label else -1.0


def _values(b) -> np.ndarray:
    if isinstance(b, FeatureVector):
        return b.values
    return np.asarray(b, dtype=float).reshape(-1)


def new_posterior(dim: int, prior_mean: float = 0.0, prior_var: float = 1.0, beta: float = 1.0) -> GaussianPosterior:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if not prior_var > 0:
        raise ValueError(f"prior variance must be positive, got {prior_var}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return GaussianPosterior(np.full(dim, float(prior_mean)), np.full(dim, float(prior_var)), beta)


def sample_weights(p: GaussianPosterior, rng: np.random.Generator) -> np.ndarray:
    """One Thompson draw, ``W_j ~ N(mean_j, variance_j)`` independently."""
    return p.mean + np.sqrt(p.variance) * rng.standard_normal(p.dim)


def plugin_success(w: np.ndarray, b, beta: float) -> float:
    b = _values(b)
    w = np.asarray(w, dtype=float)
    if b.shape != w.shape:
        raise ValueError(f"feature dim {b.size} != weight dim {w.size}")
    return phi_cdf(float(b @ w) / beta)


def predict_success(p: GaussianPosterior, w: np.ndarray, b) -> float:
    """Success probability ``Phi(b.w / beta)`` under sampled weights ``w``."""
    return plugin_success(w, b, p.beta)


def update(p: GaussianPosterior, obs: Observation) -> GaussianPosterior:
    b = _values(obs.features)
    if b.size != p.dim:
        raise ValueError(f"feature dim {b.size} != posterior dim {p.dim}")
    y = obs.sign
    mu, nu = p.mean, p.variance
    s2 = p.beta**2 + float(np.sum(b * b * nu))
    s = np.sqrt(s2)
    t = y * float(b @ mu) / s
    v = v_correction(t)
    w = w_correction(t)
    new_mean = mu + y * b * (nu / s) * v
    new_var = nu * (1.0 - (b * b * nu / s2) * w)
    return GaussianPosterior(new_mean, new_var, p.beta)


def update_batch(p: GaussianPosterior, batch: Sequence[Observation]) -> GaussianPosterior:
    """Fold :func:`update` over ``batch`` in order."""
    if len(batch) == 0:
        return p
    X = np.stack([_values(o.features) for o in batch])
    if X.shape[1] != p.dim:
        raise ValueError(f"feature dim {X.shape[1]} != posterior dim {p.dim}")
    y = np.array([o.sign for o in batch])
    mean, var = p.mean.copy(), p.variance.copy()
    kernels.blip_fold(mean, var, X, y, p.beta)
    return GaussianPosterior(mean, var, p.beta)
