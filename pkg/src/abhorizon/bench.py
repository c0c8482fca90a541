"""Accuracy metrics and the benchmark harness.

``run_benchmark`` scores every (dataset, method, horizon) cell.  Models see
only the pilot window: each dataset is truncated to ``D0`` days before any
statistic is computed, and the holdout is touched only when scoring.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import BaselineId, predict_baseline
from .data import SuffStats, TriggerData, compute_spectrum, compute_suffstats, holdout_truth
from .errors import ConfigError, DataError
from .fit import FitConfig, fit_mle, fit_regression
from .model import HyperParams, expected_new_users, expected_total, log_marginal_likelihood

NBP_METHODS = ("nbp-mle", "nbp-regression")
ALL_METHODS = NBP_METHODS + tuple(b.value for b in BaselineId)


def accuracy_v(observed: float, predicted: float) -> float | None:
    """``1 - min(|observed - predicted| / observed, 1)``; ``None`` when the
    observed value is zero (the metric is undefined there)."""
    if observed < 0 or predicted < 0:
        raise ValueError("observed and predicted values must be nonnegative")
    if observed == 0:
        return None
    return 1.0 - min(abs(observed - predicted) / observed, 1.0)


@dataclass(frozen=True)
class AccuracyReport:
    dataset: str
    method: str
    D0: int
    D1: int
    observed: int | None = None
    predicted: float | None = None
    v: float | None = None
    observed_total: int | None = None
    predicted_total: float | None = None
    v_tilde: float | None = None
    runtime_ms: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _normalize_methods(methods: Sequence[str]) -> list[str]:
    out = []
    for m in methods:
        m = BaselineId(m).value if m not in NBP_METHODS else m
        if m not in out:
            out.append(m)
    return out


def _thread_count(threads: int | None) -> int:
    if threads is None:
        raw = os.environ.get("AB_HORIZON_THREADS", "0")
        try:
            threads = int(raw)
        except ValueError as exc:
            raise ConfigError(f"AB_HORIZON_THREADS must be an integer, got {raw!r}") from exc
    if threads < 0:
        raise ConfigError("thread count must be >= 0")
    return threads or min(8, os.cpu_count() or 1)


def _cell_seed(seed: int, dataset_index: int, method: str) -> int:
    key = ALL_METHODS.index(method)
    return int(np.random.SeedSequence([seed, dataset_index, key]).generate_state(1)[0])


def _fit_nbp(method: str, stats: SuffStats, config: FitConfig) -> HyperParams:
    if method == "nbp-mle":
        return fit_mle(stats, config).params
    return fit_regression(stats.arrivals, replace(config, method="regression")).params


def _evaluate_cell(
    name: str,
    index: int,
    pilot: TriggerData,
    truths: dict[int, tuple[int, int]],
    D0: int,
    horizons: Sequence[int],
    method: str,
    seed: int,
    fit_config: FitConfig,
) -> list[AccuracyReport]:
    cell_seed = _cell_seed(seed, index, method)
    start = time.perf_counter()
    try:
        preds: dict[int, tuple[float, float | None]] = {}
        if method in NBP_METHODS:
            stats = compute_suffstats(pilot, D0)
            params = _fit_nbp(method, stats, replace(fit_config, seed=cell_seed))
            for D1 in horizons:
                preds[D1] = (
                    expected_new_users(params, stats.N, D0, D1),
                    expected_total(params, stats, D1),
                )
        else:
            spectrum = compute_spectrum(pilot, D0)
            daily = pilot.daily_new_users()
            for D1 in horizons:
                preds[D1] = (predict_baseline(method, spectrum, daily, D1, seed=cell_seed), None)
    except Exception as exc:  # isolate failures per cell
        elapsed = 1e3 * (time.perf_counter() - start)
        msg = f"{type(exc).__name__}: {exc}"
        return [AccuracyReport(name, method, D0, D1, runtime_ms=elapsed, error=msg) for D1 in horizons]
    elapsed = 1e3 * (time.perf_counter() - start)
    out = []
    for D1 in horizons:
        new_obs, total_obs = truths[D1]
        pred, pred_total = preds[D1]
        out.append(
            AccuracyReport(
                dataset=name,
                method=method,
                D0=D0,
                D1=D1,
                observed=new_obs,
                predicted=pred,
                v=accuracy_v(new_obs, pred),
                observed_total=total_obs if pred_total is not None else None,
                predicted_total=pred_total,
                v_tilde=None if pred_total is None else accuracy_v(total_obs, pred_total),
                runtime_ms=elapsed,
            )
        )
    return out


def run_benchmark(
    datasets: Sequence[TriggerData] | Sequence[tuple[str, TriggerData]],
    D0: int,
    D1: int | Sequence[int],
    methods: Sequence[str],
    seed: int = 0,
    fit_config: FitConfig | None = None,
    threads: int | None = None,
) -> list[AccuracyReport]:
    """Score each method on each dataset at one or more horizons.

    ``datasets`` may be bare ``TriggerData`` (named ``d000``, ``d001``, ...)
    or ``(name, data)`` pairs.  Methods are fitted once per dataset and
    evaluated at every horizon.  Datasets too short for the window yield
    error reports rather than aborting the sweep.  ``threads=None`` reads
    ``AB_HORIZON_THREADS`` (0 means one thread per core, at most 8).
    Output is sorted by (dataset, method, D1).
    """
    methods = _normalize_methods(methods)
    horizons = sorted({int(D1)} if np.isscalar(D1) else {int(h) for h in D1})
    if not horizons:
        raise ConfigError("at least one horizon is required")
    if any(h < 0 for h in horizons) or D0 < 1:
        raise ConfigError("D0 must be >= 1 and horizons >= 0")
    fit_config = fit_config or FitConfig()
    named = [
        item if isinstance(item, tuple) else (f"d{i:03d}", item) for i, item in enumerate(datasets)
    ]
    if len({n for n, _ in named}) != len(named):
        raise ConfigError("dataset names must be unique")

    jobs = []
    reports: list[AccuracyReport] = []
    for index, (name, data) in enumerate(named):
        try:
            truths = {}
            for h in horizons:
                t = holdout_truth(data, D0, h)
                truths[h] = (t.new_users, t.total)
            pilot = data.truncate(D0)
        except (ConfigError, DataError) as exc:
            msg = f"{type(exc).__name__}: {exc}"
            reports += [AccuracyReport(name, m, D0, h, error=msg) for m in methods for h in horizons]
            continue
        for m in methods:
            jobs.append((name, index, pilot, truths, D0, horizons, m, seed, fit_config))

    n_threads = _thread_count(threads)
    # fit and baseline warnings are per-cell noise in a sweep
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if n_threads == 1 or len(jobs) <= 1:
            results = [_evaluate_cell(*job) for job in jobs]
        else:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                results = list(pool.map(lambda job: _evaluate_cell(*job), jobs))
    for r in results:
        reports += r
    reports.sort(key=lambda r: (r.dataset, ALL_METHODS.index(r.method), r.D1))
    return reports


def survival_curve(
    reports: Sequence[AccuracyReport], grid: Sequence[float], metric: str = "v"
) -> list[tuple[float, float]]:
    """Fraction of scored reports whose ``metric`` is at least each level.

    Reports with a missing metric are excluded from the denominator.
    """
    if metric not in ("v", "v_tilde"):
        raise ConfigError(f"metric must be 'v' or 'v_tilde', got {metric!r}")
    values = np.array([getattr(r, metric) for r in reports if getattr(r, metric) is not None], dtype=float)
    if values.size == 0:
        raise DataError("survival curve needs at least one scored report")
    return [(float(lv), float(np.mean(values >= lv))) for lv in grid]


@dataclass(frozen=True)
class BoxSummary:
    method: str
    D1: int
    n: int
    n_missing: int
    median: float
    q1: float
    q3: float
    lo: float
    hi: float


def summarize(reports: Sequence[AccuracyReport], metric: str = "v") -> list[BoxSummary]:
    """Median, quartiles (linear interpolation) and range per (method, D1)."""
    groups: dict[tuple[str, int], list[float | None]] = {}
    for r in reports:
        groups.setdefault((r.method, r.D1), []).append(getattr(r, metric))
    out = []
    for (method, D1), vals in sorted(groups.items(), key=lambda kv: (ALL_METHODS.index(kv[0][0]), kv[0][1])):
        x = np.array([v for v in vals if v is not None], dtype=float)
        if x.size:
            q1, med, q3 = np.percentile(x, [25, 50, 75], method="linear")
            lo, hi = float(x.min()), float(x.max())
        else:
            q1 = med = q3 = lo = hi = math.nan
        out.append(BoxSummary(method, D1, int(x.size), len(vals) - int(x.size), float(med), float(q1), float(q3), lo, hi))
    return out


def likelihood_profile(
    stats: SuffStats, params: HyperParams, name: str, grid: Sequence[float]
) -> np.ndarray:
    """Log marginal likelihood along one coordinate with the others held."""
    if name not in ("beta", "sigma", "c", "r"):
        raise ConfigError(f"unknown parameter {name!r}")
    base = params.to_dict()
    return np.array(
        [log_marginal_likelihood(HyperParams(**{**base, name: float(g)}), stats) for g in grid]
    )


def likelihood_runtime(stats: SuffStats, params: HyperParams, repeats: int = 20) -> float:
    """Median wall time of one likelihood evaluation, in milliseconds."""
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        log_marginal_likelihood(params, stats)
        times.append(time.perf_counter() - t)
    return 1e3 * float(np.median(times))
