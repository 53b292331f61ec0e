"""Shared test utilities."""
import numpy as np

from citemix.gof import chi2_test
from citemix.histogram import Histogram


def gof_pvalue(model, samples, min_expected=5.0):
    """Chi-square p-value of samples against a fixed (not fitted) model."""
    h = Histogram.from_samples(samples)
    return chi2_test(model, h, min_expected=min_expected, n_free_params=0).p_value


def continuous_gof_pvalue(law, draws, n_bins=100):
    """Equiprobable-bin chi-square p-value for draws from a continuous law."""
    from scipy import stats

    draws = np.sort(np.asarray(draws))
    n = draws.size
    cdf = law.cdf(draws)
    counts = np.histogram(cdf, bins=np.linspace(0, 1, n_bins + 1))[0]
    expected = n / n_bins
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return float(stats.chi2.sf(stat, n_bins - 1))
