import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citemix.dist_core import LomaxMixtureParams, PowerLawParams, WEMixtureParams
from citemix.fit import (
    FitConfig,
    FitResult,
    InsufficientData,
    LikelihoodError,
    _pack,
    _unpack,
    fit_mle,
    logistic_from_weights,
    n_free_params,
    negative_loglik,
    sweep_and_select,
    weights_from_logistic,
)
from citemix.histogram import Histogram
from citemix.sampler import RngStream, sample_counts


def _sample_hist(model, n, seed):
    return Histogram.from_samples(sample_counts(model, RngStream(seed), n))


class TestLikelihood:
    def test_lomax_unit_example(self):
        # PMF(1) = 1 - (1/2)^1 = 1/2 under b = v = 1
        h = Histogram({1: 10})
        assert negative_loglik(LomaxMixtureParams(((1.0, 1.0, 1.0),)), h) == pytest.approx(10 * math.log(2), abs=1e-12)
        assert negative_loglik(LomaxMixtureParams(((1.0, 1.0, 1.0),)), h) == pytest.approx(6.9315, abs=1e-4)

    def test_truth_beats_perturbation(self):
        truth = WEMixtureParams.single(6.0, 3.0)
        h = _sample_hist(truth, 20000, 1)
        worse = WEMixtureParams.single(6.0 * 1.2, 3.0)
        assert negative_loglik(truth, h) < negative_loglik(worse, h)

    def test_zero_probability_is_an_error(self):
        with pytest.raises(LikelihoodError, match="k=3"):
            negative_loglik(PowerLawParams(((1.0, 2.0),), kmax=2), Histogram({1: 4, 3: 1}))

    def test_empty_histogram(self):
        with pytest.raises(ValueError):
            negative_loglik(WEMixtureParams.single(1.0, 1.0), Histogram({}))


class TestTransforms:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=3))
    def test_weight_round_trip(self, raw):
        w = np.array(raw) / sum(raw)
        floor = 1e-6
        w = floor + (1 - w.size * floor) * w
        assert np.max(np.abs(weights_from_logistic(logistic_from_weights(w)) - w)) < 1e-12

    @pytest.mark.parametrize("family", ["we", "lomax", "powerlaw"])
    def test_parameter_round_trip(self, family):
        m = 3
        rng = np.random.default_rng(4)
        theta = rng.normal(0, 1.5, n_free_params(family, m))
        w, arrays = _unpack(family, m, theta)
        assert w.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.max(np.abs(_pack(family, w, arrays) - theta)) < 1e-12

    def test_weight_floor(self):
        w = weights_from_logistic(np.array([-200.0, 200.0]))
        assert w.min() >= 1e-6

    def test_free_parameter_counts(self):
        assert [n_free_params("we", m) for m in (1, 2, 3)] == [2, 5, 8]
        assert [n_free_params("lomax", m) for m in (1, 2, 3)] == [2, 5, 8]
        assert [n_free_params("powerlaw", m) for m in (1, 2, 3)] == [1, 3, 5]


@pytest.fixture(scope="module")
def lomax_fit():
    truth = LomaxMixtureParams(((1.0, 2.0, 1.5),))
    h = _sample_hist(truth, 10**5, 12)
    return fit_mle("lomax", 1, h, FitConfig(n_restarts=3), RngStream(0)), h


class TestFitMle:
    def test_lomax_recovery(self, lomax_fit):
        res, _ = lomax_fit
        (_, b, v), = res.model.components
        assert res.converged
        assert b == pytest.approx(2.0, rel=0.05)
        assert v == pytest.approx(1.5, rel=0.05)

    def test_aic_identity(self, lomax_fit):
        res, h = lomax_fit
        assert res.aic == pytest.approx(-2 * res.loglik + 2 * res.n_free_params, abs=1e-9)
        assert res.loglik == pytest.approx(-negative_loglik(res.model, h), abs=1e-9)
        assert res.n_obs == h.total_n
        assert res.histogram_fingerprint == h.fingerprint()

    def test_json_round_trip(self, lomax_fit):
        res, _ = lomax_fit
        back = FitResult.from_dict(json.loads(res.to_json()))
        assert back.model == res.model
        assert back.aic == res.aic and back.loglik == res.loglik
        assert json.loads(res.to_json())["schema_version"] == 1

    def test_more_restarts_never_worse(self):
        truth = WEMixtureParams(((0.6, WEMixtureParams.single(4.0, 5.0).components[0][1]),
                                 (0.4, WEMixtureParams.single(20.0, 0.5).components[0][1])))
        h = _sample_hist(truth, 5000, 3)
        few = fit_mle("we", 2, h, FitConfig(n_restarts=2), RngStream(8))
        many = fit_mle("we", 2, h, FitConfig(n_restarts=5), RngStream(8))
        assert many.restart_nll[:2] == few.restart_nll
        assert -many.loglik <= -few.loglik + 1e-9

    def test_deterministic(self):
        h = _sample_hist(WEMixtureParams.single(3.0, 2.0), 3000, 5)
        a = fit_mle("we", 1, h, FitConfig(n_restarts=3), RngStream(2))
        b = fit_mle("we", 1, h, FitConfig(n_restarts=3), RngStream(2))
        assert a.to_dict() == b.to_dict()

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_mle("we", 2, Histogram({1: 50, 2: 20, 3: 5}))

    def test_bad_arguments(self):
        h = Histogram({k: 10 for k in range(1, 20)})
        with pytest.raises(ValueError):
            fit_mle("gauss", 1, h)
        with pytest.raises(ValueError):
            fit_mle("we", 4, h)
        with pytest.raises(ValueError):
            FitConfig(n_restarts=0)


def test_component_order_is_canonical():
    a, b = (0.3, 2.0, 1.5), (0.7, 0.5, 3.0)
    assert LomaxMixtureParams((a, b)) == LomaxMixtureParams((b, a))
    h = _sample_hist(LomaxMixtureParams((a, b)), 500, 0)
    assert negative_loglik(LomaxMixtureParams((a, b)), h) == negative_loglik(LomaxMixtureParams((b, a)), h)


class TestSelection:
    @pytest.mark.slow
    @pytest.mark.parametrize(
        "family,truth",
        [("we", WEMixtureParams.single(8.0, 3.0)), ("lomax", LomaxMixtureParams(((1.0, 2.0, 1.5),)))],
        ids=["we", "lomax"],
    )
    def test_m1_preferred_for_single_component_data(self, family, truth):
        wins = 0
        seeds = range(20)
        for s in seeds:
            h = _sample_hist(truth, 4000, 100 + s)
            r1 = fit_mle(family, 1, h, FitConfig(n_restarts=3), RngStream(s))
            r2 = fit_mle(family, 2, h, FitConfig(n_restarts=6), RngStream(s))
            wins += r1.aic < r2.aic
        assert wins >= 0.9 * len(seeds)

    def test_near_degenerate_selects_m1(self):
        h = _sample_hist(WEMixtureParams.single(5.0, 1e6), 20000, 4)
        sweep = sweep_and_select("we", h, FitConfig(n_restarts=3, m_values=(1, 2)), RngStream(1))
        assert sweep.best is not None and sweep.best.m == 1

    def test_all_failed(self):
        sweep = sweep_and_select("we", Histogram({1: 5, 2: 1}), FitConfig(m_values=(2, 3)))
        assert sweep.selected is None and sweep.best is None
        assert set(sweep.failures) == {2, 3}
