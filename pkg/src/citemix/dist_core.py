"""Closed-form probability laws for the citation-rate models.

Discrete laws live on k = 1, 2, ... and are parameter mixes of the
maximum-entropy geometric kernel ``(e^b - 1) e^(-k b)``:

* WE ("Wald-Exponential") mixture -- the mixing variable b = 1/tau with
  tau inverse-Gaussian (Wald) distributed.
* Lomax mixture -- b gamma distributed.
* Power law (single or multi-component), the classical baselines.

The CCDF convention for discrete laws is ``Pr[K > k]``, so ``ccdf(0) == 1``
and ``pmf(k) == ccdf(k - 1) - ccdf(k)``.  Every mixture PMF is evaluated in
log space as ``ccdf(k) * expm1(log ccdf(k-1) - log ccdf(k))`` which keeps the
telescoping difference accurate far into the tail.

Continuous laws (Wald, gamma, exponential, continuous WE) carry ``logpdf`` and
``logsf`` so that hazard rates can be formed without catastrophic cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special, stats

__all__ = [
    "DomainError",
    "MaxEntParams",
    "WaldParams",
    "WEMixtureParams",
    "LomaxMixtureParams",
    "PowerLawParams",
    "CurveSeries",
    "WaldLaw",
    "GammaLaw",
    "ExponentialLaw",
    "ContinuousWELaw",
    "REFERENCE_WE",
    "ModelSpec",
    "model_from_dict",
    "maxent_pmf",
    "maxent_mean",
    "wald_pdf",
    "wald_logpdf",
    "wald_logsf",
    "rig_pdf",
    "rig_moments",
    "we_ccdf",
    "we_log_ccdf",
    "we_pmf",
    "we_logpmf",
    "we_logpmf_arrays",
    "we_continuous_pdf",
    "lomax_ccdf",
    "lomax_pmf",
    "lomax_logpmf",
    "lomax_logpmf_arrays",
    "powerlaw_pmf",
    "powerlaw_logpmf",
    "powerlaw_logpmf_arrays",
    "powerlaw_ccdf",
    "gamma_pdf",
    "hazard",
]

WEIGHT_SUM_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the support or parameter space of a law."""


def _check_positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


def _as_support(k, lower: int = 1) -> np.ndarray:
    arr = np.asarray(k)
    if arr.dtype.kind not in "iu":
        farr = np.asarray(arr, dtype=float)
        if not np.all(np.isfinite(farr)) or np.any(farr != np.floor(farr)):
            raise DomainError("count arguments must be integers")
        arr = farr.astype(np.int64)
    if np.any(arr < lower):
        raise DomainError(f"count arguments must be >= {lower}")
    return arr.astype(float)


def _scalar_or_array(out: np.ndarray, like):
    return float(out) if np.ndim(like) == 0 else out


def _log_expm1(x: np.ndarray) -> np.ndarray:
    # log(e^x - 1) without overflow for large x
    x = np.asarray(x, dtype=float)
    big = x > 30.0
    return np.where(big, x + np.log1p(-np.exp(-np.where(big, x, 30.0))), np.log(np.expm1(np.where(big, 30.0, x))))


def _check_weights(weights: Sequence[float]) -> None:
    if len(weights) == 0:
        raise DomainError("a mixture needs at least one component")
    for c in weights:
        if not (0.0 <= c <= 1.0):
            raise DomainError(f"mixture weight {c!r} outside [0, 1]")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_SUM_TOL:
        raise DomainError(f"mixture weights sum to {math.fsum(weights)!r}, not 1")


# ---------------------------------------------------------------------------
# parameter types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaxEntParams:
    beta: float

    def __post_init__(self):
        _check_positive("beta", self.beta)


@dataclass(frozen=True)
class WaldParams:
    """Inverse-Gaussian processing-time law with mean ``mu`` and shape ``lam``."""

    mu: float
    lam: float

    def __post_init__(self):
        _check_positive("mu", self.mu)
        _check_positive("lam", self.lam)

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.mu**3 / self.lam


@dataclass(frozen=True)
class WEMixtureParams:
    """Weighted WE components ``((c, WaldParams), ...)`` in canonical order."""

    components: tuple[tuple[float, WaldParams], ...]
    family: str = field(default="we", init=False)

    def __post_init__(self):
        comps = tuple((float(c), w if isinstance(w, WaldParams) else WaldParams(*w)) for c, w in self.components)
        if not 1 <= len(comps) <= 3:
            raise DomainError("WE mixtures have 1 to 3 components")
        _check_weights([c for c, _ in comps])
        comps = tuple(sorted(comps, key=lambda cw: (-cw[0], cw[1].mu, cw[1].lam)))
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, weights, mus, lams) -> "WEMixtureParams":
        return cls(tuple((c, WaldParams(float(m), float(l))) for c, m, l in zip(weights, mus, lams)))

    @classmethod
    def single(cls, mu: float, lam: float) -> "WEMixtureParams":
        return cls(((1.0, WaldParams(mu, lam)),))

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c for c, _ in self.components])

    @property
    def mus(self) -> np.ndarray:
        return np.array([w.mu for _, w in self.components])

    @property
    def lams(self) -> np.ndarray:
        return np.array([w.lam for _, w in self.components])

    @property
    def n_free_params(self) -> int:
        return 3 * self.m - 1

    def pmf(self, k):
        return we_pmf(k, self)

    def logpmf(self, k):
        return we_logpmf(k, self)

    def ccdf(self, k):
        k = _as_support(k, lower=0)
        out = sum(c * np.exp(we_log_ccdf(k, w)) for c, w in self.components)
        return _scalar_or_array(np.asarray(out, dtype=float), k)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "M": self.m,
            "components": [{"c": c, "mu": w.mu, "lam": w.lam} for c, w in self.components],
        }


@dataclass(frozen=True)
class LomaxMixtureParams:
    """Weighted Lomax components ``((c, b, v), ...)``; ``b`` is the gamma rate, ``v`` its shape."""

    components: tuple[tuple[float, float, float], ...]
    family: str = field(default="lomax", init=False)

    def __post_init__(self):
        comps = tuple((float(c), float(b), float(v)) for c, b, v in self.components)
        if not 1 <= len(comps) <= 3:
            raise DomainError("Lomax mixtures have 1 to 3 components")
        _check_weights([c for c, _, _ in comps])
        for _, b, v in comps:
            _check_positive("b", b)
            _check_positive("v", v)
        comps = tuple(sorted(comps, key=lambda t: (-t[0], t[1], t[2])))
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, weights, bs, vs) -> "LomaxMixtureParams":
        return cls(tuple(zip(weights, bs, vs)))

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c for c, _, _ in self.components])

    @property
    def n_free_params(self) -> int:
        return 3 * self.m - 1

    def pmf(self, k):
        return lomax_pmf(k, self)

    def logpmf(self, k):
        return lomax_logpmf(k, self)

    def ccdf(self, k):
        k = _as_support(k, lower=0)
        out = sum(c * lomax_ccdf(k, b, v) for c, b, v in self.components)
        return _scalar_or_array(np.asarray(out, dtype=float), k)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "M": self.m,
            "components": [{"c": c, "b": b, "v": v} for c, b, v in self.components],
        }


@dataclass(frozen=True)
class PowerLawParams:
    """Power-law mixture ``((c, gamma), ...)`` on ``1..kmax``; ``kmax=None`` is unbounded."""

    components: tuple[tuple[float, float], ...]
    kmax: int | None = None
    family: str = field(default="powerlaw", init=False)

    def __post_init__(self):
        comps = tuple((float(c), float(g)) for c, g in self.components)
        if not 1 <= len(comps) <= 3:
            raise DomainError("power-law mixtures have 1 to 3 components")
        _check_weights([c for c, _ in comps])
        if self.kmax is not None:
            if int(self.kmax) != self.kmax or self.kmax < 1:
                raise DomainError("kmax must be a positive integer or None")
            object.__setattr__(self, "kmax", int(self.kmax))
        for _, g in comps:
            if not math.isfinite(g):
                raise DomainError("exponent must be finite")
            if self.kmax is None and g <= 1.0:
                raise DomainError(f"exponent {g} <= 1 is not normalizable on unbounded support")
        comps = tuple(sorted(comps, key=lambda t: (-t[0], t[1])))
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c for c, _ in self.components])

    @property
    def n_free_params(self) -> int:
        return 2 * self.m - 1

    def pmf(self, k):
        return powerlaw_pmf(k, self)

    def logpmf(self, k):
        return powerlaw_logpmf(k, self)

    def ccdf(self, k):
        return powerlaw_ccdf(k, self)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "M": self.m,
            "kmax": self.kmax,
            "components": [{"c": c, "gamma": g} for c, g in self.components],
        }


ModelSpec = WEMixtureParams | LomaxMixtureParams | PowerLawParams


def model_from_dict(d: dict) -> ModelSpec:
    """Inverse of ``to_dict`` for any discrete family."""
    fam = d["family"]
    comps = d["components"]
    if fam == "we":
        return WEMixtureParams(tuple((c["c"], WaldParams(c["mu"], c["lam"])) for c in comps))
    if fam == "lomax":
        return LomaxMixtureParams(tuple((c["c"], c["b"], c["v"]) for c in comps))
    if fam == "powerlaw":
        return PowerLawParams(tuple((c["c"], c["gamma"]) for c in comps), kmax=d.get("kmax"))
    raise DomainError(f"unknown model family {fam!r}")


#: The 5-parameter two-component fit reported for the SPIRES citation data.
REFERENCE_WE = WEMixtureParams(((0.56, WaldParams(15.66, 8.92)), (0.44, WaldParams(11.72, 0.64))))


# ---------------------------------------------------------------------------
# maximum-entropy kernel
# ---------------------------------------------------------------------------


def maxent_pmf(s, p: MaxEntParams):
    """Geometric PMF ``(e^beta - 1) e^(-s beta)`` on s = 1, 2, ..."""
    s_arr = _as_support(s)
    beta = p.beta
    out = np.exp(_log_expm1(beta) - s_arr * beta)
    return _scalar_or_array(out, s)


def maxent_mean(p: MaxEntParams) -> float:
    return -1.0 / math.expm1(-p.beta)


# ---------------------------------------------------------------------------
# Wald / reciprocal inverse Gaussian
# ---------------------------------------------------------------------------


def wald_logpdf(tau, p: WaldParams):
    t = np.asarray(tau, dtype=float)
    if np.any(t <= 0):
        raise DomainError("tau must be positive")
    out = 0.5 * (np.log(p.lam) - np.log(2 * np.pi) - 3 * np.log(t)) - p.lam * (t - p.mu) ** 2 / (2 * t * p.mu**2)
    return _scalar_or_array(out, tau)


def wald_pdf(tau, p: WaldParams):
    """Inverse-Gaussian density ``sqrt(lam / (2 pi tau^3)) exp(-lam (tau - mu)^2 / (2 tau mu^2))``."""
    return _scalar_or_array(np.exp(wald_logpdf(tau, p)), tau)


def wald_logsf(tau, p: WaldParams):
    """log Pr[T > tau], stable deep into the tail."""
    t = np.asarray(tau, dtype=float)
    if np.any(t <= 0):
        raise DomainError("tau must be positive")
    r = np.sqrt(p.lam / t)
    la = special.log_ndtr(-r * (t / p.mu - 1.0))
    lb = 2.0 * p.lam / p.mu + special.log_ndtr(-r * (t / p.mu + 1.0))
    with np.errstate(divide="ignore"):
        out = la + np.log1p(-np.exp(lb - la))
    return _scalar_or_array(out, tau)


def rig_pdf(beta, p: WaldParams):
    """Density of ``1/tau`` when tau ~ Wald(mu, lam).

    ``g(b) = sqrt(lam / (2 pi b)) exp(-lam (1 - mu b)^2 / (2 b mu^2))``
    """
    b = np.asarray(beta, dtype=float)
    if np.any(b <= 0):
        raise DomainError("beta must be positive")
    logg = 0.5 * (np.log(p.lam) - np.log(2 * np.pi * b)) - p.lam * (1.0 - p.mu * b) ** 2 / (2 * b * p.mu**2)
    return _scalar_or_array(np.exp(logg), beta)


def rig_moments(p: WaldParams) -> tuple[float, float]:
    """Closed-form (mean, variance) of ``1/tau``."""
    return 1.0 / p.mu + 1.0 / p.lam, (2 * p.mu + p.lam) / (p.mu * p.lam**2)


# ---------------------------------------------------------------------------
# WE law
# ---------------------------------------------------------------------------


def we_log_ccdf(k, p: WaldParams):
    """log of ``sqrt(lam / (2k + lam)) exp((lam - sqrt(lam (2k + lam))) / mu)``; k may be real."""
    x = np.asarray(k, dtype=float)
    if np.any(x < 0):
        raise DomainError("k must be nonnegative")
    s = 2.0 * x + p.lam
    # lam - sqrt(lam*s) rewritten to avoid cancellation for small k
    expo = -2.0 * x * p.lam / (p.lam + np.sqrt(p.lam * s)) / p.mu
    out = 0.5 * (np.log(p.lam) - np.log(s)) + expo
    return _scalar_or_array(out, k)


def we_ccdf(k, p: WaldParams):
    """Pr[K > k] for a single WE component (the Laplace transform E[exp(-k/tau)])."""
    return _scalar_or_array(np.exp(we_log_ccdf(k, p)), k)


def _we_log_step(k: np.ndarray, mu: float, lam: float) -> np.ndarray:
    # log ccdf(k-1) - log ccdf(k) >= 0, evaluated without differencing
    a = 2.0 * k - 2.0 + lam
    b = 2.0 * k + lam
    sqrt_diff = 2.0 * lam / (np.sqrt(lam * a) + np.sqrt(lam * b))
    return 0.5 * np.log1p(2.0 / a) + sqrt_diff / mu


def _mixture_logpmf(log_terms: Iterable[np.ndarray], weights: np.ndarray) -> np.ndarray:
    stacked = np.vstack([np.atleast_1d(t) for t in log_terms])
    with np.errstate(divide="ignore"):
        logw = np.log(weights)[:, None]
    return special.logsumexp(stacked + logw, axis=0)


def we_logpmf_arrays(k: np.ndarray, weights, mus, lams) -> np.ndarray:
    """Vectorized WE mixture log-PMF on float array ``k >= 1`` from raw parameter arrays."""
    terms = []
    for mu, lam in zip(mus, lams):
        s = 2.0 * k + lam
        log_ccdf = 0.5 * (np.log(lam) - np.log(s)) - 2.0 * k * lam / (lam + np.sqrt(lam * s)) / mu
        terms.append(log_ccdf + np.log(np.expm1(_we_log_step(k, mu, lam))))
    return _mixture_logpmf(terms, np.asarray(weights, dtype=float))


def we_logpmf(k, p: WEMixtureParams):
    karr = _as_support(k)
    out = we_logpmf_arrays(np.atleast_1d(karr), p.weights, p.mus, p.lams)
    return float(out[0]) if np.ndim(k) == 0 else out.reshape(np.shape(karr))


def we_pmf(k, p: WEMixtureParams):
    """WE mixture PMF ``sum_i c_i (S_i(k-1) - S_i(k))`` on k = 1, 2, ..."""
    return _scalar_or_array(np.exp(we_logpmf(k, p)), k)


def we_continuous_pdf(x, p: WaldParams):
    """Continuous analog of the WE law: ``-d/dx we_ccdf(x)``.

    ``(lam sqrt(2x + lam) + mu sqrt(lam)) / (mu (2x + lam)^1.5) * exp((lam - sqrt(lam (2x + lam))) / mu)``
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("x must be nonnegative")
    s = 2.0 * xa + p.lam
    pref = (p.lam * np.sqrt(s) + p.mu * np.sqrt(p.lam)) / (p.mu * s**1.5)
    expo = -2.0 * xa * p.lam / (p.lam + np.sqrt(p.lam * s)) / p.mu
    return _scalar_or_array(pref * np.exp(expo), x)


# ---------------------------------------------------------------------------
# Lomax law
# ---------------------------------------------------------------------------


def lomax_ccdf(k, b: float, v: float):
    """Pr[K > k] = (b / (k + b))^v for one Lomax component."""
    x = np.asarray(k, dtype=float)
    out = np.exp(-v * np.log1p(x / b))
    return _scalar_or_array(out, k)


def lomax_logpmf_arrays(k: np.ndarray, weights, bs, vs) -> np.ndarray:
    terms = []
    for b, v in zip(bs, vs):
        step = v * np.log1p(1.0 / (k - 1.0 + b))
        terms.append(-v * np.log1p(k / b) + np.log(np.expm1(step)))
    return _mixture_logpmf(terms, np.asarray(weights, dtype=float))


def lomax_logpmf(k, p: LomaxMixtureParams):
    karr = _as_support(k)
    bs = [b for _, b, _ in p.components]
    vs = [v for _, _, v in p.components]
    out = lomax_logpmf_arrays(np.atleast_1d(karr), p.weights, bs, vs)
    return float(out[0]) if np.ndim(k) == 0 else out.reshape(np.shape(karr))


def lomax_pmf(k, p: LomaxMixtureParams):
    """Lomax mixture PMF ``sum_i c_i (b^v / (k-1+b)^v - b^v / (k+b)^v)``."""
    return _scalar_or_array(np.exp(lomax_logpmf(k, p)), k)


# ---------------------------------------------------------------------------
# power law
# ---------------------------------------------------------------------------


def _powerlaw_log_norm(gamma: float, kmax: int | None) -> float:
    if kmax is None:
        return math.log(special.zeta(gamma, 1.0))
    ks = np.arange(1, kmax + 1, dtype=float)
    return math.log(math.fsum(np.exp(-gamma * np.log(ks))))


def powerlaw_logpmf_arrays(k: np.ndarray, weights, gammas, kmax: int | None = None) -> np.ndarray:
    logk = np.log(k)
    terms = []
    for g in gammas:
        t = -g * logk - _powerlaw_log_norm(g, kmax)
        if kmax is not None:
            t = np.where(k > kmax, -np.inf, t)
        terms.append(t)
    return _mixture_logpmf(terms, np.asarray(weights, dtype=float))


def powerlaw_logpmf(k, p: PowerLawParams):
    karr = _as_support(k)
    out = powerlaw_logpmf_arrays(np.atleast_1d(karr), p.weights, [g for _, g in p.components], p.kmax)
    return float(out[0]) if np.ndim(k) == 0 else out.reshape(np.shape(karr))


def powerlaw_pmf(k, p: PowerLawParams):
    """``sum_i c_i k^(-gamma_i) / Z_i`` with Z_i summed over the support."""
    return _scalar_or_array(np.exp(powerlaw_logpmf(k, p)), k)


def powerlaw_ccdf(k, p: PowerLawParams):
    kk = np.atleast_1d(_as_support(k, lower=0))
    total = np.zeros_like(kk)
    for c, g in p.components:
        if p.kmax is None:
            tail = special.zeta(g, kk + 1.0) / special.zeta(g, 1.0)
        else:
            ks = np.arange(1, p.kmax + 1, dtype=float)
            w = np.exp(-g * np.log(ks))
            w /= w.sum()
            # suffix sums: mass strictly above k
            suffix = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
            tail = suffix[np.clip(kk.astype(np.int64), 0, p.kmax)]
        total += c * tail
    return float(total[0]) if np.ndim(k) == 0 else total


# ---------------------------------------------------------------------------
# continuous processing-time laws and hazard rates
# ---------------------------------------------------------------------------


def gamma_pdf(tau, shape: float, scale: float):
    """Two-parameter gamma density with mean ``shape * scale``."""
    _check_positive("shape", shape)
    _check_positive("scale", scale)
    t = np.asarray(tau, dtype=float)
    if np.any(t <= 0):
        raise DomainError("tau must be positive")
    return _scalar_or_array(stats.gamma.pdf(t, shape, scale=scale), tau)


@dataclass(frozen=True)
class CurveSeries:
    x: np.ndarray
    y: np.ndarray
    label: str = ""

    def to_csv(self, path, x_name: str = "x", y_name: str | None = None) -> None:
        y_name = y_name or self.label or "y"
        with open(path, "w") as fh:
            fh.write(f"{x_name},{y_name}\n")
            for a, b in zip(self.x, self.y):
                fh.write(f"{float(a)!r},{float(b)!r}\n")


class _ContinuousLaw:
    def logpdf(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def logsf(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sf(self, x):
        return np.exp(self.logsf(x))

    def cdf(self, x):
        return -np.expm1(self.logsf(x))


@dataclass(frozen=True)
class WaldLaw(_ContinuousLaw):
    params: WaldParams

    def logpdf(self, x):
        return wald_logpdf(x, self.params)

    def logsf(self, x):
        return wald_logsf(x, self.params)


@dataclass(frozen=True)
class GammaLaw(_ContinuousLaw):
    shape: float
    scale: float

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("scale", self.scale)

    def logpdf(self, x):
        return stats.gamma.logpdf(np.asarray(x, dtype=float), self.shape, scale=self.scale)

    def logsf(self, x):
        return stats.gamma.logsf(np.asarray(x, dtype=float), self.shape, scale=self.scale)


@dataclass(frozen=True)
class ExponentialLaw(_ContinuousLaw):
    mean: float

    def __post_init__(self):
        _check_positive("mean", self.mean)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -math.log(self.mean) - x / self.mean

    def logsf(self, x):
        return -np.asarray(x, dtype=float) / self.mean


@dataclass(frozen=True)
class ContinuousWELaw(_ContinuousLaw):
    params: WaldParams

    def logpdf(self, x):
        return np.log(we_continuous_pdf(x, self.params))

    def logsf(self, x):
        return we_log_ccdf(x, self.params)


def hazard(model: _ContinuousLaw, grid) -> CurveSeries:
    """Hazard rate ``f(t) / (1 - F(t))`` of a continuous law on ``grid``.

    Raises
    ------
    DomainError
        If the grid is not strictly increasing and positive, or the survival
        function underflows; the message names the first offending grid point.
    """
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise DomainError("hazard grid must be a nonempty, strictly increasing sequence of positive reals")
    with np.errstate(divide="ignore", invalid="ignore"):
        logsf = np.asarray(model.logsf(t), dtype=float)
        logf = np.asarray(model.logpdf(t), dtype=float)
    bad = ~np.isfinite(logsf)
    if np.any(bad):
        raise DomainError(f"survival function underflows at t={float(t[np.argmax(bad)])!r}; truncate the grid below it")
    return CurveSeries(t, np.exp(logf - logsf), label="hazard")
