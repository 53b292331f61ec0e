import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from citemix.dist_core import REFERENCE_WE, LomaxMixtureParams, PowerLawParams, WEMixtureParams
from citemix.fit import FitConfig, fit_mle
from citemix.gof import TestInfeasible, chi2_sf, chi2_test, compare_models, empirical_ccdf, merge_bins
from citemix.histogram import Histogram
from citemix.sampler import RngStream, sample_counts


class TestEmpiricalCcdf:
    def test_two_point(self):
        c = empirical_ccdf(Histogram({1: 3, 2: 1}))
        assert list(zip(c.x, c.y)) == [(1, 1.0), (2, 0.25)]

    def test_single_point(self):
        c = empirical_ccdf(Histogram({5: 7}))
        assert list(zip(c.x, c.y)) == [(5, 1.0)]

    def test_monotone(self):
        h = Histogram.from_samples(sample_counts(REFERENCE_WE, RngStream(1), 2000))
        assert np.all(np.diff(empirical_ccdf(h).y) < 0)

    def test_empty(self):
        with pytest.raises(ValueError):
            empirical_ccdf(Histogram({}))


class TestChi2Sf:
    @pytest.mark.parametrize("dof", [1, 2, 7, 40])
    def test_matches_scipy(self, dof):
        for x in (0.1, 1.0, dof, 3.0 * dof + 10):
            assert chi2_sf(x, dof) == pytest.approx(stats.chi2.sf(x, dof), rel=1e-12)

    def test_zero_statistic(self):
        assert chi2_sf(0.0, 3) == 1.0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 200.0), st.floats(0.0, 50.0), st.integers(1, 30))
    def test_monotone_in_statistic(self, x, dx, dof):
        assert chi2_sf(x + dx, dof) <= chi2_sf(x, dof)


class TestMergeBins:
    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(0.0, 20.0), min_size=1, max_size=60), st.floats(0.5, 10.0))
    def test_partition(self, exp, min_expected):
        e = np.array(exp)
        groups = merge_bins(np.zeros_like(e), e, min_expected)
        assert groups[0][0] == 0 and groups[-1][1] == e.size
        assert all(a < b for a, b in groups)
        assert all(g[1] == h[0] for g, h in zip(groups[:-1], groups[1:]))
        assert math.fsum(math.fsum(e[a:b]) for a, b in groups) == pytest.approx(math.fsum(e))
        if e.sum() >= min_expected:
            assert all(e[a:b].sum() >= min_expected for a, b in groups)

    def test_remainder_folded_left(self):
        assert merge_bins(np.zeros(4), np.array([6.0, 6.0, 1.0, 1.0]), 5.0) == [(0, 1), (1, 4)]


class TestChi2Test:
    def test_expected_cells(self):
        # b = v = 1: PMF(k) = 1/(k(k+1)) and ccdf(k) = 1/(k+1)
        model = LomaxMixtureParams(((1.0, 1.0, 1.0),))
        h = Histogram({1: 60, 2: 20, 3: 10, 4: 6, 5: 4})
        t = chi2_test(model, h, min_expected=0.5, n_free_params=0)
        assert t.observed.tolist() == [60, 20, 10, 6, 4, 0]
        assert np.allclose(t.expected, [100 / (k * (k + 1)) for k in range(1, 6)] + [100 / 6])
        assert t.edges == [(1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, None)]

    def test_perfect_fit_statistic_zero(self):
        model = PowerLawParams(((1.0, 2.0),), kmax=3)
        pmf = model.pmf(np.arange(1, 4)) * 49000
        h = Histogram({k: int(round(v)) for k, v in zip(range(1, 4), pmf)})
        assert h.total_n == 49000
        t = chi2_test(model, h, n_free_params=0)
        assert t.statistic == pytest.approx(0.0, abs=1e-6)
        assert t.p_value == pytest.approx(1.0, abs=1e-6)
        assert not t.reject

    def test_totals_preserved(self):
        h = Histogram.from_samples(sample_counts(REFERENCE_WE, RngStream(3), 5000))
        t = chi2_test(REFERENCE_WE, h)
        assert t.observed.sum() == h.total_n
        assert t.expected.sum() == pytest.approx(h.total_n, rel=1e-9)
        assert np.all(t.expected >= 5.0)
        assert t.edges[-1][1] is None

    def test_dof_accounting(self):
        h = Histogram.from_samples(sample_counts(REFERENCE_WE, RngStream(3), 5000))
        t = chi2_test(REFERENCE_WE, h)
        assert t.n_free_params == 5
        assert t.dof == t.n_bins - 1 - 5
        assert chi2_test(REFERENCE_WE, h, n_free_params=0).dof == t.n_bins - 1

    def test_wrong_model_rejected(self):
        h = Histogram.from_samples(sample_counts(REFERENCE_WE, RngStream(4), 20000))
        assert chi2_test(PowerLawParams(((1.0, 1.5),)), h).p_value < 1e-6

    def test_infeasible(self):
        with pytest.raises(TestInfeasible):
            chi2_test(REFERENCE_WE, Histogram({1: 3, 2: 2}))

    def test_to_dict(self):
        h = Histogram.from_samples(sample_counts(REFERENCE_WE, RngStream(5), 3000))
        d = chi2_test(REFERENCE_WE, h).to_dict()
        assert set(d) == {"statistic", "dof", "p_value", "alpha", "reject", "n_bins"}
        json.dumps(d)


@pytest.fixture(scope="module")
def fitted():
    h = Histogram.from_samples(sample_counts(WEMixtureParams.single(6.0, 2.0), RngStream(7), 5000))
    cfg = FitConfig(n_restarts=2)
    return h, [fit_mle(f, 1, h, cfg, RngStream(1)) for f in ("we", "lomax", "powerlaw")]


class TestCompare:
    def test_ordering(self, fitted):
        h, results = fitted
        table = compare_models(results, h)
        aics = [r.aic for r in table]
        assert aics == sorted(aics)
        assert table.rows[0].delta_aic == 0.0
        assert table.rows[0].family == "we"
        assert all(r.delta_aic >= 0 for r in table)

    def test_duplicate_tie(self, fitted):
        h, results = fitted
        table = compare_models([results[0], results[0]], h)
        assert [r.delta_aic for r in table] == [0.0, 0.0]

    def test_mismatched_histogram(self, fitted):
        h, results = fitted
        other = Histogram({**h.bins, 1: h.bins[1] + 1})
        with pytest.raises(ValueError, match="different histogram"):
            compare_models(results, other)

    def test_needs_two(self, fitted):
        h, results = fitted
        with pytest.raises(ValueError):
            compare_models(results[:1], h)

    def test_csv_and_json(self, fitted):
        h, results = fitted
        table = compare_models(results, h)
        rows = list(csv.DictReader(io.StringIO(table.to_csv())))
        assert [r["family"] for r in rows] == [r.family for r in table]
        assert float(rows[0]["aic"]) == table.rows[0].aic
        doc = json.loads(table.to_json())
        assert doc["rows"] == table.records()
        assert "dAIC" in table.format()
