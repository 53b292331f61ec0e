"""Seedable random variates for every model family.

All draws come from :class:`RngStream`, a thin wrapper over numpy's PCG64
bit generator (128-bit state, period 2**128).  Count samplers follow the
compound construction of the models: choose a component, draw the rate
parameter b, then draw a geometric count on {1, 2, ...}.
"""
from __future__ import annotations

import numpy as np

from .dist_core import (
    DomainError,
    LomaxMixtureParams,
    PowerLawParams,
    WaldParams,
    WEMixtureParams,
)

__all__ = [
    "RngStream",
    "sample_wald",
    "sample_geometric",
    "sample_we_count",
    "sample_lomax_count",
    "sample_powerlaw_count",
    "sample_counts",
]

_KMAX_INT = 2**62


class RngStream:
    """Deterministic pseudorandom stream; not safe to share across threads."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def child_seed(self, index: int) -> int:
        """A 64-bit seed derived from (seed, index); independent of how many children are used."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(index),))
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def child(self, index: int) -> "RngStream":
        return RngStream(self.child_seed(index))

    def uniform_open0(self, size=None):
        """Uniforms on (0, 1]."""
        return 1.0 - self.generator.random(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


def sample_wald(p: WaldParams, rng: RngStream, size=None):
    """Inverse-Gaussian draws by the one-normal-one-uniform transformation.

    The smaller root of the transformation quadratic is computed as
    ``mu^2 / larger_root`` to avoid cancellation when ``mu * nu^2 / lam`` is large.
    """
    mu, lam = p.mu, p.lam
    nu = rng.generator.standard_normal(size)
    y = nu * nu
    r = mu * y / (2.0 * lam)
    big = mu * (1.0 + r + np.sqrt(r * (r + 2.0)))
    small = mu * mu / big
    u = rng.generator.random(size)
    out = np.where(u <= mu / (mu + small), small, big)
    return float(out) if size is None else out


def sample_geometric(beta, rng: RngStream, size=None):
    """K = 1 + floor(-ln U / beta), U uniform on (0, 1]; Pr[K = s] = (e^b - 1) e^(-s b)."""
    u = rng.uniform_open0(size)
    k = 1.0 + np.floor(-np.log(u) / beta)
    k = np.minimum(k, _KMAX_INT)
    return int(k) if size is None else k.astype(np.int64)


def _choose_components(weights: np.ndarray, rng: RngStream, n: int) -> np.ndarray:
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, rng.generator.random(n), side="right")


def sample_we_count(p: WEMixtureParams, rng: RngStream, size=None):
    """Counts from the WE mixture: component, tau ~ Wald, b = 1/tau, geometric count."""
    n = 1 if size is None else int(size)
    idx = _choose_components(p.weights, rng, n)
    tau = np.empty(n)
    for i, (_, w) in enumerate(p.components):
        sel = idx == i
        tau[sel] = sample_wald(w, rng, int(sel.sum()))
    k = sample_geometric(1.0 / tau, rng, n)
    return int(k[0]) if size is None else k


def sample_lomax_count(p: LomaxMixtureParams, rng: RngStream, size=None):
    """Counts from the Lomax mixture: b ~ Gamma(shape v, rate b_i), then geometric."""
    n = 1 if size is None else int(size)
    idx = _choose_components(p.weights, rng, n)
    beta = np.empty(n)
    for i, (_, b, v) in enumerate(p.components):
        sel = idx == i
        beta[sel] = rng.generator.gamma(v, 1.0 / b, int(sel.sum()))
    beta = np.maximum(beta, np.finfo(float).tiny)
    k = sample_geometric(beta, rng, n)
    return int(k[0]) if size is None else k


def sample_powerlaw_count(p: PowerLawParams, rng: RngStream, size=None):
    """Power-law counts: inverse-CCDF table for finite ``kmax``; exact Zipf rejection otherwise."""
    n = 1 if size is None else int(size)
    idx = _choose_components(p.weights, rng, n)
    out = np.empty(n, dtype=np.int64)
    for i, (_, g) in enumerate(p.components):
        sel = idx == i
        m = int(sel.sum())
        if p.kmax is None:
            if g <= 1.0:
                raise DomainError("unbounded power law needs exponent > 1")
            out[sel] = rng.generator.zipf(g, m)
        else:
            ks = np.arange(1, p.kmax + 1, dtype=float)
            w = np.exp(-g * np.log(ks))
            cdf = np.cumsum(w / w.sum())
            cdf[-1] = 1.0
            out[sel] = 1 + np.searchsorted(cdf, rng.generator.random(m), side="right")
    return int(out[0]) if size is None else out


def sample_counts(model, rng: RngStream, size: int) -> np.ndarray:
    """Dispatch on the model family."""
    if isinstance(model, WEMixtureParams):
        return sample_we_count(model, rng, size)
    if isinstance(model, LomaxMixtureParams):
        return sample_lomax_count(model, rng, size)
    if isinstance(model, PowerLawParams):
        return sample_powerlaw_count(model, rng, size)
    raise TypeError(f"cannot sample from {type(model).__name__}")
