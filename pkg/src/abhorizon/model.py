"""Closed-form posterior, predictive and marginal-likelihood formulas for the
negative-binomial stable-beta scaled-process model.

Notation follows the code rather than the literature: ``K = N + c + 1`` is
the posterior shape of the largest-jump variable ``X = Delta**(-sigma)``,
whose rate is ``beta + psi(0, D0)``.  Given ``X``, new users with total
activity ``j`` over the horizon arrive as a Poisson process with intensity
``X * rho_j``; integrating ``X`` out gives every NegBin law below.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Literal, NamedTuple

import numpy as np
from scipy import special as sc
from scipy import stats as st

from .data import SuffStats
from .errors import DataError
from .special import (
    DEFAULT_RHO_CONVENTION,
    RhoConvention,
    log_rho,
    psi,
)

XiForm = Literal["derived", "printed"]

#: Per-user beta term of the likelihood.  ``"derived"`` integrates the jump
#: intensity exactly, giving ``B(r D0 + 1, m - sigma)``; ``"printed"`` keeps
#: the shifted ``B(r D0 + 1, m - sigma + 1)``, which does not normalize
#: (see README, "Known formula variants").
DEFAULT_XI_FORM: XiForm = "derived"


@dataclass(frozen=True)
class HyperParams:
    beta: float
    sigma: float
    c: float
    r: float

    def __post_init__(self) -> None:
        for name in ("beta", "sigma", "c", "r"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.beta <= 0 or self.r <= 0:
            raise ValueError("beta and r must be positive")
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.beta, self.sigma, self.c, self.r)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> HyperParams:
        return cls(d["beta"], d["sigma"], d["c"], d["r"])


@dataclass(frozen=True)
class NegBinDist:
    """Counts with pmf ``C(k + f - 1, k) p**k (1 - p)**f``."""

    failures: float
    success_prob: float

    def __post_init__(self) -> None:
        if not self.failures > 0:
            raise ValueError("failures must be positive")
        if not 0 <= self.success_prob < 1:
            raise ValueError("success_prob must lie in [0, 1)")

    @property
    def mean(self) -> float:
        p = self.success_prob
        return self.failures * p / (1.0 - p)

    @property
    def var(self) -> float:
        p = self.success_prob
        return self.failures * p / (1.0 - p) ** 2

    def _scipy(self):
        return st.nbinom(self.failures, 1.0 - self.success_prob)

    def logpmf(self, k):
        return self._scipy().logpmf(k)

    def cdf(self, k):
        return self._scipy().cdf(k)

    def quantile(self, q):
        if self.success_prob == 0:
            return np.zeros_like(np.asarray(q, dtype=float))
        return self._scipy().ppf(q)


@dataclass(frozen=True)
class BetaDist:
    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Beta parameters must be positive")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def var(self) -> float:
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1.0))

    def quantile(self, q):
        return st.beta(self.a, self.b).ppf(q)


@dataclass(frozen=True)
class GammaDist:
    shape: float
    rate: float

    def __post_init__(self) -> None:
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("Gamma parameters must be positive")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def var(self) -> float:
        return self.shape / self.rate**2

    def quantile(self, q):
        return st.gamma(self.shape, scale=1.0 / self.rate).ppf(q)


class Summary(NamedTuple):
    mean: float
    lo: float
    hi: float


@dataclass(frozen=True)
class ForecastReport:
    pilot_days: int
    horizon: int
    params: HyperParams
    level: float
    new_users: Summary
    new_by_freq: dict[int, Summary]
    old_sum: Summary | None
    total: Summary | None
    seed: int | None = None
    schema_version: int = field(default=1)

    def to_dict(self) -> dict:
        def s(x: Summary | None):
            return None if x is None else {"mean": x.mean, "lo": x.lo, "hi": x.hi}

        return {
            "schema_version": self.schema_version,
            "pilot_days": self.pilot_days,
            "horizon": self.horizon,
            "params": self.params.to_dict(),
            "new_users": s(self.new_users),
            "new_by_freq": [
                {"j": j, "mean": v.mean, "lo": v.lo, "hi": v.hi}
                for j, v in sorted(self.new_by_freq.items())
            ],
            "old_sum": s(self.old_sum),
            "total": s(self.total),
            "level": self.level,
            "seed": self.seed,
        }


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _posterior_rate(params: HyperParams, D0: int) -> float:
    return params.beta + psi(params.sigma, params.r, 0, D0)


def _check_horizon(D1: int) -> None:
    if D1 < 0:
        raise ValueError(f"horizon must be >= 0, got {D1}")


def largest_jump_posterior(params: HyperParams, stats: SuffStats) -> GammaDist:
    """Posterior law of ``Delta**(-sigma)`` given the pilot."""
    return GammaDist(stats.N + params.c + 1.0, _posterior_rate(params, stats.D0))


def log_marginal_likelihood_arrays(beta, sigma, c, r, stats: SuffStats, xi_form: XiForm = DEFAULT_XI_FORM):
    """Vectorized log marginal likelihood; hyperparameters broadcast together.

    Sums over users are grouped by distinct totals and distinct daily counts,
    so the cost is independent of ``N`` once the histograms exist.
    """
    if not stats.has_counts:
        raise DataError("marginal likelihood needs per-user counts")
    beta, sigma, c, r = (np.asarray(v, dtype=float) for v in (beta, sigma, c, r))
    N, D0 = stats.N, stats.D0
    rate = beta + psi(sigma, r, 0, D0)
    out = (
        N * np.log(sigma)
        + (c + 1.0) * np.log(beta)
        - (N + c + 1.0) * np.log(rate)
        + sc.gammaln(N + c + 1.0)
        - sc.gammaln(c + 1.0)
    )
    if N == 0:
        return out
    a_vals, a_freq = stats.count_histogram()
    m_vals, m_freq = stats.m_histogram()
    r_ = r[..., None]
    s_ = sigma[..., None]
    log_coef = sc.gammaln(a_vals + r_) - sc.gammaln(a_vals + 1.0) - sc.gammaln(r_)
    shift = 0.0 if xi_form == "derived" else 1.0
    if xi_form not in ("derived", "printed"):
        raise ValueError(f"unknown xi_form {xi_form!r}")
    log_b = sc.betaln(r_ * D0 + 1.0, m_vals - s_ + shift)
    return out + (log_coef * a_freq).sum(axis=-1) + (log_b * m_freq).sum(axis=-1)


def log_marginal_likelihood(params: HyperParams, stats: SuffStats, xi_form: XiForm = DEFAULT_XI_FORM) -> float:
    """Log probability of the pilot data under ``params``."""
    return float(log_marginal_likelihood_arrays(*params.as_tuple(), stats, xi_form=xi_form))


def new_user_prob(params: HyperParams, D0: int, D1: int) -> float:
    """Success probability of the NegBin law of new users in ``D1`` days."""
    _check_horizon(D1)
    s, r = params.sigma, params.r
    return psi(s, r, D0, D1) / (params.beta + psi(s, r, 0, D0 + D1))


def predict_new_users(params: HyperParams, stats: SuffStats, D1: int) -> NegBinDist:
    return NegBinDist(stats.N + params.c + 1.0, new_user_prob(params, stats.D0, D1))


def expected_new_users(params: HyperParams, N: int, D0: int, D1: int) -> float:
    """Point predictor ``(N + c + 1) psi(D0, D1) / (beta + psi(0, D0))``."""
    _check_horizon(D1)
    s, r = params.sigma, params.r
    return (N + params.c + 1.0) * psi(s, r, D0, D1) / (params.beta + psi(s, r, 0, D0))


def predict_new_users_freq(
    params: HyperParams,
    stats: SuffStats,
    D1: int,
    j: int,
    convention: RhoConvention = DEFAULT_RHO_CONVENTION,
) -> NegBinDist:
    """Law of the number of new users with total activity exactly ``j``."""
    K = stats.N + params.c + 1.0
    if D1 == 0:
        return NegBinDist(K, 0.0)
    rate = _posterior_rate(params, stats.D0)
    lr = log_rho(j, params.sigma, params.r, stats.D0, D1, convention)
    # p = rho / (rate + rho), kept stable when rho underflows
    p = float(sc.expit(lr - math.log(rate)))
    return NegBinDist(K, p)


def posterior_jump(params: HyperParams, m_n: int, D0: int) -> BetaDist:
    """Posterior law of the activity rate of a user with pilot total ``m_n``."""
    if m_n < 1:
        raise ValueError("m_n must be >= 1")
    if D0 < 1:
        raise ValueError("D0 must be >= 1")
    return BetaDist(m_n - params.sigma, params.r * D0 + 1.0)


def expected_old_users_sum(params: HyperParams, stats: SuffStats, D1: int) -> float:
    """Mean future activity of pilot users, ``(D1 / D0) * sum(m_n - sigma)``."""
    _check_horizon(D1)
    if stats.N == 0 or D1 == 0:
        return 0.0
    if not stats.has_counts:
        raise DataError("old-user activity needs per-user counts")
    return D1 / stats.D0 * float(np.sum(stats.m - params.sigma))


def _central(samples: np.ndarray, level: float, mean: float) -> Summary:
    q = (1.0 - level) / 2.0
    lo, hi = np.quantile(samples, [q, 1.0 - q])
    return Summary(mean, float(min(lo, mean)), float(max(hi, mean)))


def _check_level(level: float) -> None:
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")


def _old_sum_samples(params, stats, D1, n_mc, rng) -> np.ndarray:
    # sum_n NegBin(r D1, J_n) == Poisson(sum_n Gamma(r D1) * J_n / (1 - J_n));
    # J / (1 - J) drawn as a ratio of gammas to stay finite for J near 1
    a = stats.m - params.sigma
    b = params.r * stats.D0 + 1.0
    out = np.empty(n_mc)
    chunk = max(1, 2_000_000 // max(stats.N, 1))
    for start in range(0, n_mc, chunk):
        k = min(chunk, n_mc - start)
        odds = rng.standard_gamma(a, size=(k, stats.N)) / rng.standard_gamma(b, size=(k, stats.N))
        lam = (rng.standard_gamma(params.r * D1, size=(k, stats.N)) * odds).sum(axis=1)
        out[start : start + k] = rng.poisson(lam)
    return out


def predict_old_users_sum(
    params: HyperParams,
    stats: SuffStats,
    D1: int,
    n_mc: int = 10_000,
    seed: int = 0,
    level: float = 0.95,
) -> Summary:
    """Mean (closed form) and Monte-Carlo central interval of future activity
    of pilot users."""
    _check_level(level)
    mean = expected_old_users_sum(params, stats, D1)
    if stats.N == 0 or D1 == 0:
        return Summary(0.0, 0.0, 0.0)
    samples = _old_sum_samples(params, stats, D1, n_mc, _rng(seed))
    return _central(samples, level, mean)


def _new_activity_full(params: HyperParams, D0: int, D1: int) -> float:
    # sum_j j * rho_j under the NegBin-pmf coefficient: sigma r D1 B(1 - sigma, r D0)
    s, r = params.sigma, params.r
    return s * r * D1 * math.exp(sc.betaln(1.0 - s, r * D0))


_EXACT_HEAD = 200


def _freq_terms(params, D0, D1, j_max, convention, rel_tol=1e-6):
    """Return ``(js, rho_js, tail_estimate)`` with ``j_max`` raised until the
    neglected ``sum_{j > j_max} j rho_j`` is below ``rel_tol`` of the kept part."""
    while True:
        js = np.arange(1, j_max + 1, dtype=float)
        rhos = np.exp(log_rho(js, params.sigma, params.r, D0, D1, convention))
        kept = float(np.sum(js * rhos))
        if convention == "negbin-pmf":
            tail = max(_new_activity_full(params, D0, D1) - kept, 0.0)
        elif rhos[-1] == 0.0:
            tail = 0.0
        else:
            # j * rho_j decays like j**(-alpha); bound the tail by an integral
            alpha = -math.log(js[-1] * rhos[-1] / (js[-2] * rhos[-2])) / math.log(js[-1] / js[-2])
            tail = js[-1] * rhos[-1] * js[-1] / (alpha - 1.0) if alpha > 1.0 else math.inf
        # the negbin-pmf tail is exact, so a long support only serves sampling
        cap = 1 << 16 if convention == "negbin-pmf" else 1 << 22
        if tail <= rel_tol * kept or j_max >= cap:
            return js, rhos, tail
        j_max *= 2


def expected_total(
    params: HyperParams,
    stats: SuffStats,
    D1: int,
    j_max: int = 50,
    convention: RhoConvention = DEFAULT_RHO_CONVENTION,
) -> float:
    """``sum_j j E[U_j] + E[S]`` with automatic extension of ``j_max``."""
    _check_horizon(D1)
    if D1 == 0:
        return 0.0
    if stats.D0 < 1:
        raise ValueError("total activity has infinite mean without a pilot")
    js, rhos, tail = _freq_terms(params, stats.D0, D1, max(j_max, 2), convention)
    scale = (stats.N + params.c + 1.0) / _posterior_rate(params, stats.D0)
    new = float(np.sum(js * rhos)) + (tail if math.isfinite(tail) else 0.0)
    return scale * new + expected_old_users_sum(params, stats, D1)


def predict_total(
    params: HyperParams,
    stats: SuffStats,
    D1: int,
    j_max: int = 50,
    n_mc: int = 10_000,
    seed: int = 0,
    level: float = 0.95,
    convention: RhoConvention = DEFAULT_RHO_CONVENTION,
) -> Summary:
    """Total future activity: closed-form mean, Monte-Carlo interval.

    Each replicate draws the largest-jump variable ``X``, then independent
    ``Poisson(X rho_j)`` counts of new users per frequency ``j``, plus an
    independent draw of old-user activity.  Frequencies beyond the first 200
    are drawn jointly as a compound Poisson.
    """
    _check_level(level)
    mean = expected_total(params, stats, D1, j_max, convention)
    if D1 == 0:
        return Summary(0.0, 0.0, 0.0)
    rng = _rng(seed)
    js, rhos, _ = _freq_terms(params, stats.D0, D1, max(j_max, 2), convention)
    post = largest_jump_posterior(params, stats)
    x = rng.gamma(post.shape, 1.0 / post.rate, size=n_mc)
    head = min(js.size, _EXACT_HEAD)
    new = np.zeros(n_mc)
    for j, rj in zip(js[:head], rhos[:head]):
        new += j * rng.poisson(x * rj)
    if js.size > head:
        # rare large-j users: compound Poisson with j drawn from the tail weights
        cum = np.cumsum(rhos[head:])
        k = rng.poisson(x * cum[-1])
        owner = np.repeat(np.arange(n_mc), k)
        j_tail = js[head:][np.minimum(np.searchsorted(cum, rng.random(owner.size) * cum[-1]), cum.size - 1)]
        new += np.bincount(owner, weights=j_tail, minlength=n_mc)
    if stats.N:
        new += _old_sum_samples(params, stats, D1, n_mc, rng)
    return _central(new, level, mean)


def negbin_interval(dist: NegBinDist, level: float) -> tuple[int, int]:
    """Central credible interval: the ``(1-level)/2`` and ``(1+level)/2``
    quantiles (smallest ``k`` whose CDF reaches each)."""
    _check_level(level)
    if dist.success_prob == 0:
        return (0, 0)
    q = (1.0 - level) / 2.0
    lo, hi = dist.quantile([q, 1.0 - q])
    return int(lo), int(hi)


def _summ_negbin(dist: NegBinDist, level: float) -> Summary:
    lo, hi = negbin_interval(dist, level)
    m = dist.mean
    return Summary(m, float(min(lo, m)), float(max(hi, m)))


def forecast(
    params: HyperParams,
    stats: SuffStats,
    D1: int,
    freq_max: int = 5,
    level: float = 0.95,
    n_mc: int = 10_000,
    seed: int = 0,
    j_max: int = 50,
    convention: RhoConvention = DEFAULT_RHO_CONVENTION,
) -> ForecastReport:
    """Assemble point predictions and intervals for a ``D1``-day horizon.

    Intervals always contain the reported mean; for very skewed laws the
    central quantile interval is widened to include it.  Old-user and total
    activity are ``None`` for aggregate-only stats.
    """
    _check_level(level)
    new = _summ_negbin(predict_new_users(params, stats, D1), level)
    by_freq = {
        j: _summ_negbin(predict_new_users_freq(params, stats, D1, j, convention), level)
        for j in range(1, freq_max + 1)
    }
    old = total = None
    if stats.has_counts and stats.D0 >= 1:
        old = predict_old_users_sum(params, stats, D1, n_mc, seed, level)
        total = predict_total(params, stats, D1, j_max, n_mc, seed + 1, level, convention)
    return ForecastReport(
        pilot_days=stats.D0,
        horizon=D1,
        params=params,
        level=level,
        new_users=new,
        new_by_freq=by_freq,
        old_sum=old,
        total=total,
        seed=seed,
    )
