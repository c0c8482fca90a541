import json
import warnings

import numpy as np
import pytest

from abhorizon.data import SuffStats, compute_suffstats
from abhorizon.errors import ConfigError, UnfitError
from abhorizon.fit import FitConfig, default_bounds, fit, fit_mle, fit_regression, regression_objective
from abhorizon.model import HyperParams, expected_new_users, log_marginal_likelihood
from abhorizon.simulate import sample_model
from abhorizon.special import psi


@pytest.fixture(scope="module")
def stats365():
    return compute_suffstats(sample_model(HyperParams(2, 0.5, 30, 5), 365, seed=0), 365)


@pytest.fixture(scope="module")
def stats20():
    return compute_suffstats(sample_model(HyperParams(0.1, 0.5, 50, 5), 20, seed=1), 20)


def exact_curve(p, D0, n1=100):
    d = np.arange(1, D0)
    pred = (n1 + p.c + 1) * psi(p.sigma, p.r, 1, d) / (p.beta + psi(p.sigma, p.r, 0, 1))
    return np.concatenate([[n1], n1 + pred])


class TestConfig:
    def test_defaults(self):
        c = FitConfig()
        assert c.bounds == default_bounds() and c.method == "mle" and c.regression_d0 == 1

    @pytest.mark.parametrize(
        "kw",
        [
            {"bounds": {**default_bounds(), "sigma": (0.0, 0.5)}},
            {"bounds": {**default_bounds(), "beta": (0.0, 1.0)}},
            {"bounds": {**default_bounds(), "r": (2.0, 1.0)}},
            {"bounds": {"beta": (1, 2)}},
            {"de_population": 3},
            {"de_tolerance": 0.0},
            {"method": "newton"},
            {"regression_d0": 0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            FitConfig(**kw)

    def test_json_roundtrip(self):
        c = FitConfig(seed=3, method="regression", de_max_iters=17, bounds={**default_bounds(), "c": (1.0, 2.0)})
        assert FitConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c

    def test_partial_bounds_merge(self):
        c = FitConfig.from_dict({"bounds": {"sigma": [0.2, 0.3]}})
        assert c.bounds["sigma"] == (0.2, 0.3) and c.bounds["beta"] == default_bounds()["beta"]

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            FitConfig.from_dict({"popsize": 3})


class TestMLE:
    def test_dominates_truth(self, stats365):
        truth = HyperParams(2, 0.5, 30, 5)
        res = fit_mle(stats365)
        assert res.objective >= log_marginal_likelihood(truth, stats365) - 1e-6
        assert res.objective == pytest.approx(log_marginal_likelihood(res.params, stats365), rel=1e-12)
        assert abs(res.params.sigma - 0.5) < 0.05

    def test_within_bounds(self, stats20):
        res = fit_mle(stats20)
        for k, (lo, hi) in res_bounds().items():
            assert lo <= getattr(res.params, k) <= hi

    def test_collapsed_bounds(self, stats20):
        pt = {"beta": 0.3, "sigma": 0.4, "c": 7.0, "r": 2.0}
        res = fit_mle(stats20, FitConfig(bounds={k: (v, v) for k, v in pt.items()}))
        assert res.params.to_dict() == pytest.approx(pt, rel=1e-12)

    def test_deterministic(self, stats20):
        assert fit_mle(stats20, FitConfig(seed=4)) == fit_mle(stats20, FitConfig(seed=4))

    def test_empty_rejected(self):
        s = SuffStats(3, 0, np.zeros(3, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
        with pytest.raises(UnfitError):
            fit_mle(s)

    def test_nonconvergence_flagged(self, stats20):
        with pytest.warns(UserWarning, match="converge"):
            res = fit_mle(stats20, FitConfig(de_max_iters=2))
        assert not res.converged and res.iterations == 2


def res_bounds():
    return default_bounds()


class TestRegression:
    def test_exact_curve_zero_objective(self):
        p = HyperParams(0.4, 0.6, 20, 3)
        curve = exact_curve(p, 30)
        assert regression_objective(curve, *p.as_tuple()) == pytest.approx(0.0, abs=1e-18)

    def test_recovers_exact_curve(self):
        p = HyperParams(0.4, 0.6, 20, 3)
        curve = exact_curve(p, 30)
        res = fit_regression(curve, FitConfig(method="regression", seed=1))
        assert res.objective < 1e-6 * np.sum(np.diff(curve) ** 2)
        got = expected_new_users(res.params, 100, 1, 60)
        assert got == pytest.approx(expected_new_users(p, 100, 1, 60), rel=0.02)

    def test_empty_objective(self):
        with pytest.raises(ConfigError):
            fit_regression([1, 2, 3], FitConfig(method="regression", regression_d0=3))

    def test_too_short_or_decreasing(self):
        with pytest.raises(ConfigError):
            fit_regression([5])
        with pytest.raises(ConfigError):
            fit_regression([5, 4, 6])

    @pytest.mark.filterwarnings("ignore:.*converge")
    def test_flat_curve_warns(self):
        with pytest.warns(UserWarning, match="flat"):
            fit_regression([7, 7, 7, 7], FitConfig(method="regression", de_max_iters=20))

    def test_dominates_random_points(self, stats20):
        cfg = FitConfig(method="regression", seed=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit_regression(stats20.arrivals, cfg)
        rng = np.random.default_rng(0)
        lb, ub = np.log([1e-3, 1e-3]), np.log([1e3, 1e3])
        beta = np.exp(rng.uniform(lb[0], ub[0], 100))
        c = np.exp(rng.uniform(lb[1], ub[1], 100))
        sigma = rng.uniform(0.01, 0.99, 100)
        r = rng.uniform(0.1, 100, 100)
        others = regression_objective(stats20.arrivals, beta, sigma, c, r)
        assert np.all(res.objective <= others)

    def test_aggregate_only(self):
        s = SuffStats.from_arrivals([10, 19, 27, 34, 40, 45, 50])
        res = fit(s, FitConfig(method="regression"))
        assert res.method == "regression" and np.isfinite(res.objective)
