"""Pearson chi-square with bin merging, empirical CCDFs, and model comparison tables."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .dist_core import CurveSeries, ModelSpec
from .fit import FitResult
from .histogram import Histogram

__all__ = [
    "BinnedTest",
    "TestInfeasible",
    "ComparisonRow",
    "ComparisonTable",
    "empirical_ccdf",
    "merge_bins",
    "chi2_sf",
    "chi2_test",
    "compare_models",
]


class TestInfeasible(ValueError):
    """Too few bins remain after merging to leave a positive number of degrees of freedom."""

    __test__ = False


@dataclass(frozen=True)
class BinnedTest:
    edges: list[tuple[int, int | None]]  # inclusive [lo, hi]; hi None = open tail
    observed: np.ndarray
    expected: np.ndarray
    statistic: float
    dof: int
    p_value: float
    alpha: float
    n_free_params: int

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    @property
    def n_bins(self) -> int:
        return len(self.edges)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject": self.reject,
            "n_bins": self.n_bins,
        }


def empirical_ccdf(h: Histogram) -> CurveSeries:
    """Points ``(k, fraction of observations >= k)`` at each observed k."""
    if h.total_n == 0:
        raise ValueError("empirical CCDF of an empty histogram")
    ks, fs = h.ks, h.freqs
    at_least = np.cumsum(fs[::-1])[::-1]
    return CurveSeries(ks.astype(float), at_least / h.total_n, label="empirical_ccdf")


def chi2_sf(stat: float, dof: int) -> float:
    """Upper tail of the chi-square law, the regularized incomplete gamma Q(dof/2, stat/2)."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if stat <= 0:
        return 1.0
    return float(special.gammaincc(0.5 * dof, 0.5 * stat))


def merge_bins(observed: np.ndarray, expected: np.ndarray, min_expected: float):
    """Greedy left-to-right merge of contiguous cells until each has ``expected >= min_expected``.

    Returns a list of ``(start, stop)`` cell index ranges (stop exclusive).  An
    under-filled remainder at the right end is folded into the last bin.
    """
    groups = []
    start = 0
    acc = 0.0
    n = expected.size
    for i in range(n):
        acc += expected[i]
        if acc >= min_expected:
            groups.append((start, i + 1))
            start, acc = i + 1, 0.0
    if start < n:
        if groups:
            groups[-1] = (groups[-1][0], n)
        else:
            groups.append((0, n))
    return groups


def chi2_test(
    model: ModelSpec,
    h: Histogram,
    min_expected: float = 5.0,
    alpha: float = 0.1,
    n_free_params: int | None = None,
) -> BinnedTest:
    """Pearson chi-square test of ``model`` against ``h``.

    Cells are the integers 1..k_max (k_max = largest observed count) plus an
    open tail cell carrying ``N * ccdf(k_max)``; contiguous cells are merged
    until each bin expects at least ``min_expected`` observations.  The
    degrees of freedom are ``n_bins - 1 - n_free_params``.

    Raises
    ------
    TestInfeasible
        If fewer than ``n_free_params + 2`` bins remain.
    """
    if min_expected <= 0:
        raise ValueError("min_expected must be positive")
    if h.total_n == 0:
        raise ValueError("empty histogram")
    nfree = model.n_free_params if n_free_params is None else int(n_free_params)
    N = h.total_n
    kmax = int(h.ks.max())
    cells = np.arange(1, kmax + 1)
    obs = np.zeros(kmax + 1)
    obs[h.ks - 1] = h.freqs
    exp = np.empty(kmax + 1)
    exp[:kmax] = N * np.asarray(model.pmf(cells), dtype=float)
    exp[kmax] = N * max(float(model.ccdf(kmax)), 0.0)

    groups = merge_bins(obs, exp, min_expected)
    o = np.array([obs[a:b].sum() for a, b in groups])
    e = np.array([math.fsum(exp[a:b]) for a, b in groups])
    edges = [(a + 1, b if b <= kmax else None) for a, b in groups]
    if len(groups) < nfree + 2:
        raise TestInfeasible(f"only {len(groups)} bins after merging; need at least {nfree + 2}")
    keep = e > 0
    stat = float(np.sum((o[keep] - e[keep]) ** 2 / e[keep]))
    if np.any(~keep & (o > 0)):
        stat = math.inf
    dof = len(groups) - 1 - nfree
    p = 0.0 if math.isinf(stat) else chi2_sf(stat, dof)
    return BinnedTest(edges, o, e, stat, dof, p, alpha, nfree)


@dataclass(frozen=True)
class ComparisonRow:
    family: str
    m: int
    n_params: int
    loglik: float
    aic: float
    delta_aic: float
    p_value: float | None


class ComparisonTable:
    FIELDS = ("family", "M", "n_params", "loglik", "aic", "delta_aic", "p_value")

    def __init__(self, rows: list[ComparisonRow]):
        self.rows = rows

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def records(self) -> list[dict]:
        return [
            dict(zip(self.FIELDS, (r.family, r.m, r.n_params, r.loglik, r.aic, r.delta_aic, r.p_value)))
            for r in self.rows
        ]

    def to_json(self, **kw) -> str:
        return json.dumps({"schema_version": 1, "rows": self.records()}, **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.FIELDS, lineterminator="\n")
        w.writeheader()
        for rec in self.records():
            w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v)) for k, v in rec.items()})
        return buf.getvalue()

    def format(self) -> str:
        lines = [f"{'family':<9}{'M':>2}{'n':>4}{'loglik':>18}{'AIC':>18}{'dAIC':>12}{'chi2 p':>11}"]
        for r in self.rows:
            p = "n/a" if r.p_value is None else f"{r.p_value:.3g}"
            lines.append(f"{r.family:<9}{r.m:>2}{r.n_params:>4}{r.loglik:>18.3f}{r.aic:>18.3f}{r.delta_aic:>12.3f}{p:>11}")
        return "\n".join(lines)


def compare_models(results: list[FitResult], h: Histogram, min_expected: float = 5.0) -> ComparisonTable:
    """Rank fitted models on the same histogram by AIC, with chi-square p-values."""
    if len(results) < 2:
        raise ValueError("need at least two results to compare")
    fp = h.fingerprint()
    for r in results:
        if r.histogram_fingerprint != fp:
            raise ValueError(f"result {r.family} M={r.m} was fitted on a different histogram")
    best = min(r.aic for r in results)
    rows = []
    for r in results:
        p = r.p_value
        if p is None and r.model is not None:
            try:
                p = chi2_test(r.model, h, min_expected=min_expected).p_value
            except TestInfeasible:
                p = None
        rows.append(ComparisonRow(r.family, r.m, r.n_free_params, r.loglik, r.aic, r.aic - best, p))
    rows.sort(key=lambda row: (row.aic, row.m))
    return ComparisonTable(rows)
