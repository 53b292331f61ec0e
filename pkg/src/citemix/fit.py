"""Maximum-likelihood fitting with multi-start Nelder-Mead and AIC order selection.

Parameters are optimized in an unconstrained space: logs for positive
parameters, ``log(gamma - 1)`` for power-law exponents, and additive-logistic
coordinates for mixture weights (with a small floor so that no component can
silently vanish).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize

from .dist_core import (
    LomaxMixtureParams,
    ModelSpec,
    PowerLawParams,
    WEMixtureParams,
    lomax_logpmf_arrays,
    model_from_dict,
    powerlaw_logpmf_arrays,
    we_logpmf_arrays,
)
from .histogram import Histogram
from .sampler import RngStream

log = logging.getLogger(__name__)

__all__ = [
    "FAMILIES",
    "SCHEMA_VERSION",
    "FitConfig",
    "FitResult",
    "SweepResult",
    "LikelihoodError",
    "InsufficientData",
    "negative_loglik",
    "fit_mle",
    "sweep_and_select",
    "weights_from_logistic",
    "logistic_from_weights",
]

SCHEMA_VERSION = 1
FAMILIES = ("we", "lomax", "powerlaw")
WEIGHT_FLOOR = 1e-6
_LOG_BOUND = 30.0


class LikelihoodError(ValueError):
    """The model assigns zero probability to an observed count."""


class InsufficientData(ValueError):
    """Too few distinct support points to identify the requested model."""


@dataclass(frozen=True)
class FitConfig:
    n_restarts: int = 10
    max_iterations: int = 4000
    simplex_tolerance: float = 1e-8
    m_values: tuple[int, ...] = (1, 2, 3)
    k_shift: int = 1
    jitter: float = 0.5

    def __post_init__(self):
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")
        if not self.m_values or any(m not in (1, 2, 3) for m in self.m_values):
            raise ValueError("m_values must be a nonempty subset of {1, 2, 3}")


@dataclass
class FitResult:
    family: str
    m: int
    model: ModelSpec | None
    loglik: float
    aic: float
    n_free_params: int
    converged: bool
    n_restarts_used: int
    best_restart_seed: int
    seed: int
    n_obs: int
    histogram_fingerprint: str
    restart_nll: list[float] = field(default_factory=list)
    message: str = ""
    chi2: float | None = None
    dof: int | None = None
    p_value: float | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "family": self.family,
            "M": self.m,
            "params": self.model.to_dict()["components"] if self.model is not None else None,
            "kmax": getattr(self.model, "kmax", None),
            "loglik": self.loglik,
            "aic": self.aic,
            "n_free_params": self.n_free_params,
            "chi2": self.chi2,
            "dof": self.dof,
            "p_value": self.p_value,
            "seed": self.seed,
            "best_restart_seed": self.best_restart_seed,
            "n_restarts_used": self.n_restarts_used,
            "converged": self.converged,
            "n_obs": self.n_obs,
            "histogram_fingerprint": self.histogram_fingerprint,
            "message": self.message,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        model = None
        if d.get("params") is not None:
            model = model_from_dict({"family": d["family"], "components": d["params"], "kmax": d.get("kmax")})
        return cls(
            family=d["family"],
            m=d["M"],
            model=model,
            loglik=d["loglik"],
            aic=d["aic"],
            n_free_params=d["n_free_params"],
            converged=d["converged"],
            n_restarts_used=d.get("n_restarts_used", 0),
            best_restart_seed=d.get("best_restart_seed", 0),
            seed=d.get("seed", 0),
            n_obs=d.get("n_obs", 0),
            histogram_fingerprint=d.get("histogram_fingerprint", ""),
            message=d.get("message", ""),
            chi2=d.get("chi2"),
            dof=d.get("dof"),
            p_value=d.get("p_value"),
        )


@dataclass
class SweepResult:
    results: list[FitResult]
    selected: int | None
    failures: dict[int, str]

    @property
    def best(self) -> FitResult | None:
        return None if self.selected is None else self.results[self.selected]


# ---------------------------------------------------------------------------
# parameter transforms
# ---------------------------------------------------------------------------


def weights_from_logistic(z: np.ndarray, floor: float = WEIGHT_FLOOR) -> np.ndarray:
    """Additive-logistic map R^(M-1) -> simplex, shrunk so every weight >= floor."""
    z = np.concatenate([np.asarray(z, dtype=float), [0.0]])
    w = np.exp(z - z.max())
    w /= w.sum()
    m = w.size
    return floor + (1.0 - m * floor) * w


def logistic_from_weights(w: np.ndarray, floor: float = WEIGHT_FLOOR) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    p = (w - floor) / (1.0 - w.size * floor)
    p = np.clip(p, 1e-300, None)
    return np.log(p[:-1]) - np.log(p[-1])


def n_free_params(family: str, m: int) -> int:
    return 2 * m - 1 if family == "powerlaw" else 3 * m - 1


def _unpack(family: str, m: int, theta: np.ndarray):
    w = weights_from_logistic(theta[-(m - 1):] if m > 1 else np.empty(0))
    if family == "powerlaw":
        return w, (1.0 + np.exp(theta[:m]),)
    return w, (np.exp(theta[:m]), np.exp(theta[m : 2 * m]))


def _pack(family: str, w: np.ndarray, arrays: Sequence[np.ndarray]) -> np.ndarray:
    if family == "powerlaw":
        body = [np.log(np.asarray(arrays[0]) - 1.0)]
    else:
        body = [np.log(np.asarray(a)) for a in arrays]
    return np.concatenate(body + [logistic_from_weights(w)])


def _model_arrays(model: ModelSpec):
    if isinstance(model, WEMixtureParams):
        return "we", model.weights, (model.mus, model.lams)
    if isinstance(model, LomaxMixtureParams):
        comps = model.components
        return "lomax", model.weights, (np.array([b for _, b, _ in comps]), np.array([v for _, _, v in comps]))
    if isinstance(model, PowerLawParams):
        return "powerlaw", model.weights, (np.array([g for _, g in model.components]),)
    raise TypeError(f"unsupported model {type(model).__name__}")


def _build(family: str, w: np.ndarray, arrays) -> ModelSpec:
    w = w / w.sum()
    if family == "we":
        return WEMixtureParams.from_arrays(w, *arrays)
    if family == "lomax":
        return LomaxMixtureParams.from_arrays(w, *arrays)
    return PowerLawParams(tuple(zip(w, arrays[0])))


def _logpmf(family: str, k: np.ndarray, w, arrays) -> np.ndarray:
    if family == "we":
        return we_logpmf_arrays(k, w, *arrays)
    if family == "lomax":
        return lomax_logpmf_arrays(k, w, *arrays)
    return powerlaw_logpmf_arrays(k, w, arrays[0])


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------


def negative_loglik(model: ModelSpec, h: Histogram) -> float:
    """``-sum_k freq(k) log PMF(k)``.

    Raises
    ------
    LikelihoodError
        If the PMF is exactly zero at an observed count.
    """
    if h.total_n == 0:
        raise ValueError("histogram is empty")
    k = h.ks.astype(float)
    lp = model.logpmf(k)
    bad = ~np.isfinite(lp)
    if np.any(bad):
        raise LikelihoodError(f"model probability underflows to zero at observed k={int(k[np.argmax(bad)])}")
    return float(-np.dot(h.freqs, lp))


def _objective(family: str, m: int, k: np.ndarray, f: np.ndarray):
    def nll(theta):
        if not np.all(np.abs(theta) < _LOG_BOUND):
            return np.inf
        w, arrays = _unpack(family, m, theta)
        with np.errstate(all="ignore"):
            lp = _logpmf(family, k, w, arrays)
        val = -float(np.dot(f, lp))
        return val if math.isfinite(val) else np.inf

    return nll


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def _slabs(h: Histogram, m: int):
    """Split the sorted sample into m equal-count groups; yields (ks, freqs) per group."""
    ks, fs = h.ks, h.freqs
    cum = np.cumsum(fs)
    edges = [0] + [int(np.searchsorted(cum, h.total_n * j / m, side="left")) + 1 for j in range(1, m)] + [ks.size]
    edges = np.maximum.accumulate(np.minimum(edges, ks.size))
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            a, b = max(0, a - 1), max(a, 1)
        yield ks[a:b], fs[a:b]


def _moments(ks, fs, k_shift):
    x = ks - k_shift
    n = fs.sum()
    mean = float(np.dot(x, fs) / n)
    var = float(np.dot((x - mean) ** 2, fs) / n)
    return mean, var, n


def _component_guess(family: str, ks, fs, k_shift: int):
    mean, var, n = _moments(ks, fs, k_shift)
    if family == "we":
        mu = max(mean, 0.5)
        return mu, mu**3 / max(var, 1e-2 * mu * mu, 1e-3)
    if family == "lomax":
        v = 2.0
        return (v - 1.0) * max(mean, 0.5), v
    kk = np.maximum(ks.astype(float), 1.0)
    g = 1.0 + n / max(float(np.dot(fs, np.log(kk / 0.5))), 1e-9)
    return (min(max(g, 1.05), 6.0),)


def _initial_thetas(family: str, m: int, h: Histogram, k_shift: int) -> list[np.ndarray]:
    """Method-of-moments starting points on the de-shifted data.

    The first splits the sorted sample into m equal-count groups and matches
    moments per group.  For m > 1 a second start keeps the pooled location and
    spreads the shape parameter over components, which separates mixtures whose
    components differ mainly in dispersion.
    """
    w = np.full(m, 1.0 / m)
    groups = [_component_guess(family, ks, fs, k_shift) for ks, fs in _slabs(h, m)]
    starts = [tuple(np.array(col) for col in zip(*groups))]
    if m > 1:
        pooled = _component_guess(family, h.ks, h.freqs, k_shift)
        spread = np.exp(np.linspace(1.5, -1.5, m))
        if family == "powerlaw":
            starts.append((1.0 + (pooled[0] - 1.0) * spread,))
        else:
            starts.append((np.full(m, pooled[0]), pooled[1] * spread))
    return [np.clip(_pack(family, w, a), -_LOG_BOUND + 1, _LOG_BOUND - 1) for a in starts]


def _jitter(theta: np.ndarray, family: str, m: int, rng: RngStream, scale: float) -> np.ndarray:
    n_shape = m if family == "powerlaw" else 2 * m
    out = theta.copy()
    out[:n_shape] += rng.generator.normal(0.0, scale, n_shape)
    if m > 1:
        out[n_shape:] = logistic_from_weights(rng.generator.dirichlet(np.full(m, 2.0)))
    return np.clip(out, -_LOG_BOUND + 1, _LOG_BOUND - 1)


def _nelder_mead(fun, x0: np.ndarray, cfg: FitConfig, step: float):
    n = x0.size
    simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(n)])
    return optimize.minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "maxiter": cfg.max_iterations,
            "maxfev": 2 * cfg.max_iterations,
            "xatol": 1e-7,
            "fatol": cfg.simplex_tolerance,
            "adaptive": n > 4,
        },
    )


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def fit_mle(family: str, m: int, h: Histogram, cfg: FitConfig | None = None, rng: RngStream | None = None) -> FitResult:
    """Fit one family with ``m`` components by multi-start simplex search.

    The first restarts start from method-of-moments guesses; later restarts
    jitter them using a seed derived from ``rng`` and the restart index, so the first
    ``n`` restarts are the same whatever ``cfg.n_restarts`` is.  Each restart
    runs Nelder-Mead twice (the second pass from a fresh, smaller simplex).
    The best converged restart wins; ties go to the lower restart index.
    """
    cfg = cfg or FitConfig()
    rng = rng or RngStream(0)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if m not in (1, 2, 3):
        raise ValueError("M must be 1, 2 or 3")
    nfree = n_free_params(family, m)
    if h.n_support < 2 * nfree:
        raise InsufficientData(
            f"{family} M={m} has {nfree} free parameters but the histogram has only {h.n_support} distinct counts"
        )
    k = h.ks.astype(float)
    f = h.freqs.astype(float)
    fun = _objective(family, m, k, f)
    bases = _initial_thetas(family, m, h, cfg.k_shift)

    best = None  # (nll, restart, theta, converged, seed)
    best_any = None
    restart_nll = []
    for r in range(cfg.n_restarts):
        seed = rng.child_seed(r)
        base = bases[r % len(bases)]
        start = base if r < len(bases) else _jitter(base, family, m, RngStream(seed), cfg.jitter)
        res = _nelder_mead(fun, start, cfg, 0.3)
        res2 = _nelder_mead(fun, res.x, cfg, 0.05)
        if res2.fun <= res.fun:
            res = res2
        ok = bool(res2.success) and math.isfinite(res.fun)
        restart_nll.append(float(res.fun))
        cand = (float(res.fun), r, res.x, ok, seed)
        if best_any is None or cand[0] < best_any[0]:
            best_any = cand
        if ok and (best is None or cand[0] < best[0]):
            best = cand
        log.debug("%s M=%d restart %d: nll=%.6f converged=%s", family, m, r, res.fun, ok)

    converged = best is not None
    nll, r_best, theta, _, seed = best if converged else best_any
    if not math.isfinite(nll):
        return FitResult(
            family, m, None, -math.inf, math.inf, nfree, False, cfg.n_restarts, seed, rng.seed,
            h.total_n, h.fingerprint(), restart_nll, "no restart reached a finite likelihood",
        )
    w, arrays = _unpack(family, m, theta)
    model = _build(family, w, arrays)
    loglik = -negative_loglik(model, h)
    message = "" if converged else "no restart met the simplex convergence criteria; best non-converged point reported"
    return FitResult(
        family=family,
        m=m,
        model=model,
        loglik=loglik,
        aic=-2.0 * loglik + 2.0 * nfree,
        n_free_params=nfree,
        converged=converged,
        n_restarts_used=cfg.n_restarts,
        best_restart_seed=seed,
        seed=rng.seed,
        n_obs=h.total_n,
        histogram_fingerprint=h.fingerprint(),
        restart_nll=restart_nll,
        message=message,
    )


def sweep_and_select(family: str, h: Histogram, cfg: FitConfig | None = None, rng: RngStream | None = None) -> SweepResult:
    """Fit every M in ``cfg.m_values`` and select the smallest AIC (ties -> smaller M).

    Fits that raise or fail to converge are recorded in ``failures`` and skipped;
    ``selected`` is ``None`` when nothing usable remains.
    """
    cfg = cfg or FitConfig()
    rng = rng or RngStream(0)
    results: list[FitResult] = []
    failures: dict[int, str] = {}
    for m in sorted(cfg.m_values):
        try:
            res = fit_mle(family, m, h, cfg, rng.child(1000 + m))
        except (InsufficientData, LikelihoodError) as exc:
            failures[m] = str(exc)
            continue
        results.append(res)
        if not res.converged:
            failures[m] = res.message
    usable = [i for i, r in enumerate(results) if r.converged]
    selected = min(usable, key=lambda i: (results[i].aic, results[i].m)) if usable else None
    return SweepResult(results, selected, failures)


def result_with_gof(result: FitResult, chi2: float, dof: int, p_value: float) -> FitResult:
    return replace(result, chi2=chi2, dof=dof, p_value=p_value)
