"""Brute-force parameter-mix PMFs by adaptive quadrature.

``mixed_pmf(k, g)`` integrates the geometric kernel ``(e^b - 1) e^(-k b)``
against a mixing density ``g`` over b in (0, inf).  It is deliberately
independent of the closed forms in :mod:`citemix.dist_core` and is used
only to check them (tests and the ``oracle-check`` command), never when
fitting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .dist_core import WaldParams

__all__ = [
    "QuadratureConfig",
    "MixingDensity",
    "OracleFailure",
    "rig_mixing",
    "gamma_mixing",
    "spike_mixing",
    "mixed_pmf",
    "mixed_pmf_mixture",
]


_CLOSE_FRACTION = 1e-3


class OracleFailure(RuntimeError):
    """Quadrature did not reach the requested accuracy."""


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-15
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (0 < self.rel_tol < 1 and 0 < self.abs_tol < 1):
            raise ValueError("quadrature tolerances must lie in (0, 1)")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be >= 16")


@dataclass(frozen=True)
class MixingDensity:
    """A density over b > 0 given by its log, a mode and a characteristic width."""

    logpdf: Callable[[np.ndarray], np.ndarray]
    mode: float
    scale: float
    name: str = ""


def rig_mixing(p: WaldParams) -> MixingDensity:
    """Law of b = 1/tau for tau ~ Wald(mu, lam), written out independently of dist_core."""
    mu, lam = p.mu, p.lam

    def logpdf(b):
        b = np.asarray(b, dtype=float)
        return 0.5 * np.log(lam / (2 * np.pi * b)) - lam * (1 - mu * b) ** 2 / (2 * b * mu * mu)

    # mode solves lam mu^2 b^2 + mu^2 b - lam = 0
    mode = (-(mu * mu) + math.sqrt(mu**4 + 4 * lam * lam * mu * mu)) / (2 * lam * mu * mu)
    mode = _refine_mode(logpdf, mode)
    sd = math.sqrt((2 * mu + lam) / (mu * lam * lam))
    return MixingDensity(logpdf, mode, sd, f"rig(mu={mu}, lam={lam})")


def gamma_mixing(shape: float, rate: float) -> MixingDensity:
    def logpdf(b):
        b = np.asarray(b, dtype=float)
        return shape * math.log(rate) - special.gammaln(shape) + (shape - 1) * np.log(b) - rate * b

    mode = (shape - 1) / rate if shape > 1 else 0.0
    return MixingDensity(logpdf, mode, math.sqrt(shape) / rate, f"gamma(shape={shape}, rate={rate})")


def spike_mixing(beta0: float, rel_width: float = 1e-7) -> MixingDensity:
    """Narrow normal spike standing in for a point mass at ``beta0``."""
    sd = beta0 * rel_width

    def logpdf(b):
        b = np.asarray(b, dtype=float)
        return -0.5 * ((b - beta0) / sd) ** 2 - math.log(sd * math.sqrt(2 * np.pi))

    return MixingDensity(logpdf, beta0, sd, f"spike({beta0})")


def _refine_mode(logpdf, guess: float) -> float:
    res = optimize.minimize_scalar(
        lambda u: -float(logpdf(math.exp(u))),
        bracket=(math.log(guess) - 1.0, math.log(guess) + 1.0),
    )
    return math.exp(res.x) if res.success else guess


def _log_kernel(b: np.ndarray, k: int) -> np.ndarray:
    # log((e^b - 1) e^(-k b)) = log(1 - e^(-b)) - (k - 1) b
    return np.log(-np.expm1(-b)) - (k - 1) * b


def _integrand_peak(logf, density: MixingDensity) -> float:
    lo = max(density.mode, density.scale, 1e-300) * 1e-8
    hi = max(density.mode, density.scale) * 1e3 + 1.0
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), 400))
    with np.errstate(all="ignore"):
        vals = logf(grid)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    c = grid[min(i + 1, grid.size - 1)]
    if a == c:
        return float(grid[i])
    res = optimize.minimize_scalar(lambda u: -float(logf(math.exp(u))), bounds=(math.log(a), math.log(c)), method="bounded")
    return math.exp(res.x)


def mixed_pmf(k: int, mixing_density: MixingDensity, cfg: QuadratureConfig | None = None) -> float:
    """Integrate ``(e^b - 1) e^(-k b) g(b)`` over ``b in (0, inf)``.

    The domain is split at the mixing mode and at the integrand peak; from
    there, intervals of doubling width march outward to infinity and halve
    down toward zero until their contributions fall below tolerance.
    """
    cfg = cfg or QuadratureConfig()
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    dens = mixing_density

    def logf(b):
        return _log_kernel(np.asarray(b, dtype=float), k) + dens.logpdf(b)

    peak = _integrand_peak(logf, dens)
    with np.errstate(all="ignore"):
        logpeak = float(max(logf(peak), logf(dens.mode) if dens.mode > 0 else -np.inf))
    if not math.isfinite(logpeak):
        raise OracleFailure(f"integrand vanishes at its peak for k={k}, {dens.name}")
    # integrate the integrand scaled by exp(-logpeak) so values are O(1)
    def f(b):
        if b <= 0:
            return 0.0
        with np.errstate(all="ignore"):
            v = float(logf(b)) - logpeak
        return math.exp(v) if v > -745 else 0.0

    splits = sorted({p for p in (peak, dens.mode) if p > 0})
    width = max(min(dens.scale, splits[0]), splits[0] * 1e-6)
    total = 0.0
    err = 0.0

    def piece(a, b):
        nonlocal total, err
        val, e = _quad(f, a, b, cfg)
        total += val
        err += e
        return val

    for a, b in zip(splits[:-1], splits[1:]):
        piece(a, b)

    # right tail: doubling widths, closed by one semi-infinite piece once small
    a, h = splits[-1], max(width, dens.scale)
    for _ in range(2000):
        b = a + h
        v = piece(a, b)
        if v <= _CLOSE_FRACTION * total:
            piece(b, math.inf)
            break
        a, h = b, 2 * h
    else:
        raise OracleFailure(f"right tail did not terminate for k={k}, {dens.name}")

    # left side: step down by doubling widths, then halve toward zero; once a
    # piece is negligible the remaining [0, a] is closed in one quad call
    b, h = splits[0], width
    for _ in range(4000):
        a = b - h if b - h > 0.5 * b else 0.5 * b
        v = piece(a, b)
        if v <= _CLOSE_FRACTION * total or a < 1e-300:
            piece(0.0, a)
            break
        b, h = a, 2 * h
    else:
        raise OracleFailure(f"left tail did not terminate for k={k}, {dens.name}")

    if err > max(cfg.abs_tol * math.exp(-logpeak), cfg.rel_tol * total):
        raise OracleFailure(f"estimated error {err:g} above tolerance for k={k}, {dens.name}")
    return total * math.exp(logpeak)


def _quad(f, a, b, cfg: QuadratureConfig):
    val, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=cfg.rel_tol * 0.1, limit=cfg.max_subdivisions, full_output=True)[:2]
    return val, e


def mixed_pmf_mixture(
    k: int,
    components: Sequence[tuple[float, MixingDensity]],
    cfg: QuadratureConfig | None = None,
) -> float:
    """Weighted sum of :func:`mixed_pmf` over ``(weight, density)`` pairs."""
    weights = [w for w, _ in components]
    if abs(math.fsum(weights) - 1.0) > 1e-12:
        raise ValueError("mixture weights must sum to 1")
    return math.fsum(w * mixed_pmf(k, d, cfg) for w, d in components if w > 0)
