"""Empirical-Bayes hyperparameter estimation.

Two routes share one optimizer: maximum marginal likelihood over the full
pilot data, and least squares of the new-user predictor against the
observed arrival curve (usable when only daily first-trigger counts exist).
``beta`` and ``c`` are searched on a log scale, ``sigma`` and ``r`` on their
natural scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .data import SuffStats
from .errors import ConfigError, UnfitError
from .model import DEFAULT_XI_FORM, HyperParams, XiForm, log_marginal_likelihood_arrays
from .optim import differential_evolution
from .special import psi

PARAM_NAMES = ("beta", "sigma", "c", "r")
_LOG_SCALE = (True, False, True, False)


def default_bounds() -> dict[str, tuple[float, float]]:
    return {
        "beta": (1e-3, 1e3),
        "sigma": (0.01, 0.99),
        "c": (1e-3, 1e3),
        "r": (0.1, 100.0),
    }


@dataclass(frozen=True)
class FitConfig:
    bounds: dict[str, tuple[float, float]] = field(default_factory=default_bounds)
    de_population: int = 60
    de_max_iters: int = 1000
    de_tolerance: float = 1e-8
    seed: int = 0
    method: Literal["mle", "regression"] = "mle"
    regression_d0: int = 1
    xi_form: XiForm = DEFAULT_XI_FORM

    def __post_init__(self) -> None:
        b = {k: (float(v[0]), float(v[1])) for k, v in dict(self.bounds).items()}
        if set(b) != set(PARAM_NAMES):
            raise ConfigError(f"bounds must name exactly {PARAM_NAMES}")
        for name, (lo, hi) in b.items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ConfigError(f"bad bounds for {name}: {(lo, hi)}")
        if b["beta"][0] <= 0 or b["c"][0] <= 0 or b["r"][0] <= 0:
            raise ConfigError("beta, c and r bounds must be positive")
        if not (0 < b["sigma"][0] and b["sigma"][1] < 1):
            raise ConfigError("sigma bounds must lie inside (0, 1)")
        if self.de_population < 4:
            raise ConfigError("de_population must be >= 4")
        if not self.de_tolerance > 0:
            raise ConfigError("de_tolerance must be positive")
        if self.method not in ("mle", "regression"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.regression_d0 < 1:
            raise ConfigError("regression_d0 must be >= 1")
        object.__setattr__(self, "bounds", b)

    def to_dict(self) -> dict:
        return {
            "bounds": {k: list(v) for k, v in self.bounds.items()},
            "de_population": self.de_population,
            "de_max_iters": self.de_max_iters,
            "de_tolerance": self.de_tolerance,
            "seed": self.seed,
            "method": self.method,
            "regression_d0": self.regression_d0,
            "xi_form": self.xi_form,
        }

    @classmethod
    def from_dict(cls, d: dict) -> FitConfig:
        d = dict(d)
        if "bounds" in d:
            merged = default_bounds()
            merged.update({k: tuple(v) for k, v in d["bounds"].items()})
            d["bounds"] = merged
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown fit config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class FitResult:
    params: HyperParams
    objective: float
    converged: bool
    iterations: int
    method: str

    def to_dict(self) -> dict:
        return {
            **self.params.to_dict(),
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
            "method": self.method,
        }


def _search_box(config: FitConfig) -> np.ndarray:
    box = []
    for name, logged in zip(PARAM_NAMES, _LOG_SCALE):
        lo, hi = config.bounds[name]
        box.append((math.log(lo), math.log(hi)) if logged else (lo, hi))
    return np.array(box)


def _to_params(x: np.ndarray):
    """Search coordinates ``(n, 4)`` -> natural-scale columns."""
    x = np.atleast_2d(x)
    return np.exp(x[:, 0]), x[:, 1], np.exp(x[:, 2]), x[:, 3]


def _run(objective, config: FitConfig, method: str, atol: float = 0.0) -> FitResult:
    res = differential_evolution(
        objective,
        _search_box(config),
        popsize=config.de_population,
        max_iter=config.de_max_iters,
        tol=config.de_tolerance,
        atol=atol,
        seed=config.seed,
        vectorized=True,
    )
    beta, sigma, c, r = (float(v[0]) for v in _to_params(res.x))
    # exp(log(lo)) may land a hair outside the box
    vals = {"beta": beta, "sigma": sigma, "c": c, "r": r}
    for k, (lo, hi) in config.bounds.items():
        vals[k] = min(max(vals[k], lo), hi)
    if not res.converged:
        warnings.warn(f"{method} fit did not converge in {res.nit} generations", stacklevel=3)
    return FitResult(HyperParams(**vals), res.fun, res.converged, res.nit, method)


def fit_mle(stats: SuffStats, config: FitConfig | None = None) -> FitResult:
    """Maximize the marginal likelihood of the pilot over the bounded box.

    ``objective`` on the result is the maximized log likelihood.
    """
    config = config or FitConfig()
    if stats.N < 1:
        raise UnfitError("cannot fit by marginal likelihood with no observed users")

    def negloglik(x):
        return -log_marginal_likelihood_arrays(*_to_params(x), stats, xi_form=config.xi_form)

    res = _run(negloglik, config, "mle")
    return FitResult(res.params, -res.objective, res.converged, res.iterations, "mle")


def regression_objective(arrivals, beta, sigma, c, r, d0: int = 1):
    """Sum of squared errors between predicted and observed new users over
    windows ``d0 + 1 .. d0 + d`` for ``d = 1 .. D0 - d0``."""
    arr = np.asarray(arrivals, dtype=float)
    D0 = arr.size
    if d0 >= D0:
        raise ConfigError(f"regression_d0={d0} leaves no windows in a {D0}-day pilot")
    beta, sigma, c, r = (np.asarray(v, dtype=float)[..., None] for v in (beta, sigma, c, r))
    d = np.arange(1, D0 - d0 + 1, dtype=float)
    n0 = arr[d0 - 1]
    observed = arr[d0:] - n0
    pred = (n0 + c + 1.0) * psi(sigma, r, d0, d) / (beta + psi(sigma, r, 0, d0))
    return ((pred - observed) ** 2).sum(axis=-1)


def fit_regression(arrivals, config: FitConfig | None = None) -> FitResult:
    """Least-squares fit of the new-user predictor to a cumulative arrival
    curve ``N_1..N_D0``.  ``objective`` is the residual sum of squares."""
    config = config or FitConfig(method="regression")
    arr = np.asarray(arrivals, dtype=float)
    if arr.size < 2:
        raise ConfigError("regression fit needs at least two pilot days")
    if np.any(np.diff(arr) < 0):
        raise ConfigError("arrival curve must be nondecreasing")
    d0 = config.regression_d0
    if d0 >= arr.size:
        raise ConfigError(f"regression_d0={d0} leaves no windows in a {arr.size}-day pilot")
    if arr[-1] == arr[d0 - 1]:
        warnings.warn("arrival curve is flat after d0; fit is degenerate", stacklevel=2)

    def sse(x):
        return regression_objective(arr, *_to_params(x), d0=d0)

    # an exact fit drives the objective to zero, so also stop on an absolute
    # spread measured against the squared daily arrivals
    scale = max(float(np.sum(np.diff(arr) ** 2)), 1.0)
    return _run(sse, config, "regression", atol=config.de_tolerance * scale)


def fit(stats: SuffStats, config: FitConfig | None = None) -> FitResult:
    config = config or FitConfig()
    if config.method == "mle":
        return fit_mle(stats, config)
    return fit_regression(stats.arrivals, config)
