import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abhorizon.bench import (
    AccuracyReport,
    accuracy_v,
    likelihood_profile,
    likelihood_runtime,
    run_benchmark,
    summarize,
    survival_curve,
)
from abhorizon.data import TriggerData, compute_suffstats
from abhorizon.errors import ConfigError, DataError
from abhorizon.fit import FitConfig
from abhorizon.model import HyperParams
from abhorizon.simulate import sample_model, sample_zipf

P = HyperParams(0.1, 0.5, 50, 5)


class TestAccuracy:
    def test_values(self):
        assert accuracy_v(100, 100) == 1.0
        assert accuracy_v(100, 80) == pytest.approx(0.8)
        assert accuracy_v(100, 250) == 0.0
        assert accuracy_v(0, 5) is None

    @given(st.floats(1e-3, 1e6), st.floats(0, 1e6), st.floats(1e-3, 1e3))
    def test_scale_free_and_bounded(self, o, p, k):
        v = accuracy_v(o, p)
        assert 0 <= v <= 1
        assert accuracy_v(k * o, k * p) == pytest.approx(v, abs=1e-9)


def reports(vals):
    return [AccuracyReport("d", "jk1", 1, 1, v=v) for v in vals]


class TestSurvival:
    def test_all_perfect(self):
        assert all(f == 1.0 for _, f in survival_curve(reports([1, 1, 1]), [0, 0.5, 1]))

    def test_two_point(self):
        assert survival_curve(reports([0.25, 0.75]), [0.5]) == [(0.5, 0.5)]

    def test_empty(self):
        with pytest.raises(DataError):
            survival_curve([], [0.5])
        with pytest.raises(DataError):
            survival_curve(reports([None]), [0.5])

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
    def test_monotone(self, vals):
        grid = np.linspace(0, 1, 21)
        fr = [f for _, f in survival_curve(reports(vals), grid)]
        assert all(a >= b for a, b in zip(fr, fr[1:]))


class TestSummaries:
    def test_linear_quartiles(self):
        s = summarize(reports([0.1, 0.2, 0.3, 0.4, None]))[0]
        assert (s.n, s.n_missing) == (4, 1)
        assert s.median == pytest.approx(0.25) and s.q1 == pytest.approx(0.175) and s.q3 == pytest.approx(0.325)


@pytest.fixture(scope="module")
def model_sets():
    return [sample_model(P, 60, seed=s) for s in range(3)]


class TestRunBenchmark:
    def test_empty_methods(self, model_sets):
        assert run_benchmark(model_sets, 20, 40, []) == []

    def test_reports(self, model_sets):
        out = run_benchmark(model_sets, 20, [10, 40], ["nbp-mle", "jk4", "gt"], seed=1, threads=1)
        assert len(out) == 3 * 3 * 2
        assert [(r.dataset, r.method, r.D1) for r in out] == sorted(
            [(r.dataset, r.method, r.D1) for r in out], key=lambda k: (k[0], ["nbp-mle", "jk4", "gt"].index(k[1]), k[2])
        )
        for r in out:
            assert r.error is None and 0 <= r.v <= 1
            assert (r.v_tilde is not None) == (r.method == "nbp-mle")

    def test_threads_do_not_change_results(self, model_sets):
        a = run_benchmark(model_sets, 20, 40, ["nbp-regression", "bg"], seed=2, threads=1)
        b = run_benchmark(model_sets, 20, 40, ["nbp-regression", "bg"], seed=2, threads=4)
        strip = lambda rs: [r.__dict__ | {"runtime_ms": 0} for r in rs]
        assert strip(a) == strip(b)

    def test_env_threads(self, model_sets, monkeypatch):
        monkeypatch.setenv("AB_HORIZON_THREADS", "2")
        assert len(run_benchmark(model_sets[:1], 20, 40, ["jk1"])) == 1
        monkeypatch.setenv("AB_HORIZON_THREADS", "x")
        with pytest.raises(ConfigError):
            run_benchmark(model_sets[:1], 20, 40, ["jk1"])

    def test_failures_isolated(self, model_sets):
        short = sample_model(P, 25, seed=9)
        out = run_benchmark([("short", short), ("ok", model_sets[0])], 20, 30, ["jk1"], threads=1)
        by = {r.dataset: r for r in out}
        assert by["short"].error and by["ok"].error is None

    def test_no_holdout_leak(self, model_sets):
        # altering holdout days leaves every prediction unchanged
        data = model_sets[0]
        keep = data.day <= 20
        ents = {(int(d), data.roster[u]): int(k) for d, u, k in zip(data.day[keep], data.user[keep], data.count[keep])}
        ents[(60, "zz")] = 99
        other = TriggerData.from_entries(ents, days=60)
        a = run_benchmark([("x", data)], 20, 40, ["nbp-mle", "bb", "jk2"], threads=1)
        b = run_benchmark([("x", other)], 20, 40, ["nbp-mle", "bb", "jk2"], threads=1)
        assert [r.predicted for r in a] == [r.predicted for r in b]
        assert [r.observed for r in a] != [r.observed for r in b]

    def test_missing_when_observed_zero(self):
        quiet = TriggerData.from_entries({(1, "a"): 1, (2, "b"): 2, (3, "a"): 1}, days=6)
        out = run_benchmark([quiet], 3, 3, ["jk1"], threads=1)
        assert out[0].observed == 0 and out[0].v is None

    def test_unknown_method(self, model_sets):
        with pytest.raises(ValueError):
            run_benchmark(model_sets, 20, 40, ["magic"])

    def test_zipf_cell(self):
        out = run_benchmark([sample_zipf(0.7, 5000, 30, seed=1)], 10, 20, ["nbp-mle"], threads=1)
        assert out[0].error is None and math.isfinite(out[0].predicted)


class TestDiagnostics:
    def test_profile_peaks_near_fit(self, model_sets):
        s = compute_suffstats(model_sets[0], 20)
        prof = likelihood_profile(s, P, "sigma", np.linspace(0.3, 0.7, 9))
        assert np.argmax(prof) in (3, 4, 5)
        with pytest.raises(ConfigError):
            likelihood_profile(s, P, "gamma", [1])

    def test_runtime(self, model_sets):
        s = compute_suffstats(model_sets[0], 20)
        assert likelihood_runtime(s, P, repeats=3) > 0
