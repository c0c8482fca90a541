"""Classical new-user predictors built on presence summaries.

Every estimator here sees only which days a user was present on (the
frequency spectrum) or when users first appeared (the arrival counts), never
the raw daily counts.  Each returns the expected number of users first seen
in days ``D0+1 .. D0+D1``.

Formulas
--------
Jackknife (order k)
    Delete-j subsamples of the ``n = D0`` pilot days give the expected number
    of distinct users ``V(n-j) = N - sum_i phi_i C(n-i, j-i) / C(n, j)``.
    The curve ``V(t) = A - sum_{i<=k} b_i t^{-i}`` is interpolated exactly
    through ``j = 0..k`` and evaluated at ``t = n + D1``.  Order 1 reduces to
    ``phi_1 (n-1) D1 / (n (n + D1))``.
Good-Toulmin
    ``-sum_k (-t)^k phi_k`` with ``t = D1/D0``.  For ``t > 1`` each term is
    weighted by ``P(L >= k)``, ``L ~ Binomial(kappa, 2/(t+2))``,
    ``kappa = ceil(log_3(n t^2/(t-1)) / 2)``.
Beta-binomial
    Daily presence ``Bernoulli(theta)``, ``theta ~ Beta(a, b)``.  ``(a, b)``
    and the population ``N_tot <= n_cap`` jointly maximize the beta-binomial
    likelihood of the spectrum plus ``N_tot - N`` all-zero users.  Unseen
    users appear within ``D1`` days with probability ``1 - P0(D0+D1)/P0(D0)``.
Beta-geometric
    First-trigger day ``Geometric(theta)``, ``theta ~ Beta(a, b)``, fitted by
    truncated MLE on the arrival counts.  Unseen users have posterior
    ``Beta(a, b + D0)``; their arrival probability within ``D1`` days is
    estimated by Monte Carlo.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections.abc import Sequence

import numpy as np
from scipy import optimize, stats
from scipy.special import betaln, comb, gammaln

from .data import FreqSpectrum
from .errors import ConfigError


class BaselineId(str, enum.Enum):
    JK1 = "jk1"
    JK2 = "jk2"
    JK3 = "jk3"
    JK4 = "jk4"
    GT = "gt"
    BB = "bb"
    BG = "bg"


def _check_horizon(D1: int) -> None:
    if D1 < 0:
        raise ConfigError(f"horizon must be >= 0, got {D1}")


def _finite_nonneg(x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0:
        return 0.0
    return x


def jackknife_predict(spectrum: FreqSpectrum, D0: int, D1: int, order: int) -> float:
    if order not in (1, 2, 3, 4):
        raise ConfigError(f"jackknife order must be 1..4, got {order}")
    if D0 <= order:
        raise ConfigError(f"order-{order} jackknife needs more than {order} pilot days, got {D0}")
    _check_horizon(D1)
    phi = spectrum.as_array()
    if phi.sum() == 0 or D1 == 0:
        return 0.0
    n = D0
    N = float(phi.sum())
    i = np.arange(phi.size)
    v = []
    for j in range(order + 1):
        miss = comb(n - i[1 : j + 1], j - i[1 : j + 1]) / comb(n, j)
        v.append(N - float(np.dot(phi[1 : j + 1], miss)))
    # polynomial in u = n/t, well conditioned near u = 1
    u = n / (n - np.arange(order + 1, dtype=float))
    coef = np.linalg.solve(np.vander(u, order + 1, increasing=True), np.array(v))
    u_star = n / (n + D1)
    pred = float(np.polynomial.polynomial.polyval(u_star, coef)) - N
    return _finite_nonneg(pred)


def good_toulmin_predict(spectrum: FreqSpectrum, D0: int, D1: int, smoothing: bool = True) -> float:
    _check_horizon(D1)
    phi = spectrum.as_array()
    if phi.sum() == 0 or D1 == 0:
        return 0.0
    t = D1 / D0
    k = np.arange(1, phi.size, dtype=float)
    weight = np.ones_like(k)
    if smoothing and t > 1:
        kappa = max(1, math.ceil(0.5 * math.log(D0 * t * t / (t - 1.0), 3)))
        weight = stats.binom.sf(k - 1, kappa, 2.0 / (t + 2.0))
    terms = -((-t) ** k) * weight * phi[1:]
    return _finite_nonneg(terms.sum())


def _fit_beta_pair(negloglik, starts: Sequence[tuple[float, float]], box) -> tuple[float, float]:
    best = None
    for x0 in starts:
        res = optimize.minimize(negloglik, np.array(x0, dtype=float), method="L-BFGS-B", bounds=box)
        if best is None or res.fun < best.fun:
            best = res
    return float(np.exp(best.x[0])), float(np.exp(best.x[1]))


_LOG_BOX = [(-10.0, 15.0), (-10.0, 25.0)]
_STARTS = [(0.0, 0.0), (-1.0, 2.0), (1.0, 4.0), (-2.0, 6.0), (2.0, -1.0)]


def _profile_population(N: float, log_p0: float, cap: float) -> float:
    """Population size maximizing the binomial likelihood of seeing ``N``
    users when each stays unseen with probability ``P0``, within ``[N, cap]``."""
    if not log_p0 < 0:
        return cap
    return min(max(N / -math.expm1(log_p0), N), cap)


def fit_beta_binomial(spectrum: FreqSpectrum, n_cap: float | None = None) -> tuple[float, float, float]:
    """Joint MLE of ``(a, b)`` and the population size ``N_tot <= n_cap``.

    The likelihood is ``C(N_tot, N) P0^(N_tot - N) prod_k p_k^phi_k`` with
    ``N_tot`` profiled out for each ``(a, b)`` (continuous relaxation).
    """
    phi = spectrum.as_array()
    D0 = spectrum.D0
    ks = np.nonzero(phi)[0]
    w = phi[ks].astype(float)
    N = w.sum()
    cap = max(10.0 * N if n_cap is None else float(n_cap), N)

    def nll(x):
        a, b = np.exp(x)
        lp0 = float(betaln(a, b + D0) - betaln(a, b))
        n_tot = _profile_population(N, lp0, cap)
        ll = gammaln(n_tot + 1.0) - gammaln(n_tot - N + 1.0) + (n_tot - N) * lp0
        return -float(ll + np.dot(w, stats.betabinom.logpmf(ks, D0, a, b)))

    a, b = _fit_beta_pair(nll, _STARTS, _LOG_BOX)
    lp0 = float(betaln(a, b + D0) - betaln(a, b))
    return a, b, _profile_population(N, lp0, cap)


def beta_binomial_predict(
    spectrum: FreqSpectrum, D0: int, D1: int, n_cap: float | None = None
) -> float:
    """``n_cap`` bounds the total population; defaults to ``10 N``."""
    _check_horizon(D1)
    N = spectrum.N
    if N == 0 or D1 == 0:
        return 0.0
    if spectrum.as_array()[-1] == N:
        warnings.warn("every user is present on every pilot day; spectrum is flat", stacklevel=2)
    a, b, n_tot = fit_beta_binomial(spectrum, n_cap)
    log_p0 = betaln(a, b + D0) - betaln(a, b)
    log_p1 = betaln(a, b + D0 + D1) - betaln(a, b)
    return _finite_nonneg((n_tot - N) * -math.expm1(log_p1 - log_p0))


def fit_beta_geometric(daily_new) -> tuple[float, float]:
    """MLE of ``(a, b)`` for first-trigger days truncated to the pilot."""
    counts = np.asarray(daily_new, dtype=float)
    D0 = counts.size
    days = np.arange(1, D0 + 1, dtype=float)
    keep = counts > 0

    def nll(x):
        a, b = np.exp(x)
        lp = betaln(a + 1.0, b + days[keep] - 1.0) - betaln(a, b)
        lp0 = betaln(a, b + D0) - betaln(a, b)
        if not lp0 < 0:
            return np.inf
        return -float(np.dot(counts[keep], lp) - counts.sum() * math.log(-math.expm1(lp0)))

    return _fit_beta_pair(nll, _STARTS, _LOG_BOX)


def beta_geometric_predict(
    daily_new,
    D1: int,
    seed: int = 0,
    n_mc: int = 100_000,
    n_cap: float | None = None,
) -> float:
    """``daily_new`` holds first-trigger counts for days ``1..D0``.  The
    population is uncapped unless ``n_cap`` is given."""
    _check_horizon(D1)
    counts = np.asarray(daily_new, dtype=float)
    if counts.size < 2:
        raise ConfigError("beta-geometric fit needs at least two pilot days")
    if np.any(counts < 0):
        raise ConfigError("daily new-user counts must be nonnegative")
    N = counts.sum()
    if N == 0 or D1 == 0:
        return 0.0
    if counts[1:].sum() == 0:
        warnings.warn("all arrivals fall on day 1; fit is degenerate", stacklevel=2)
    D0 = counts.size
    a, b = fit_beta_geometric(counts)
    log_p0 = betaln(a, b + D0) - betaln(a, b)
    unseen = N / -math.expm1(log_p0) - N
    if n_cap is not None:
        unseen = min(unseen, max(float(n_cap) - N, 0.0))
    rng = np.random.Generator(np.random.Philox(seed))
    theta = rng.beta(a, b + D0, size=n_mc)
    arrive = -np.expm1(D1 * np.log1p(-np.minimum(theta, 1.0 - 1e-16)))
    return _finite_nonneg(unseen * arrive.mean())


def predict_baseline(
    method: BaselineId | str,
    spectrum: FreqSpectrum,
    daily_new,
    D1: int,
    seed: int = 0,
) -> float:
    """Dispatch on ``method``; ``spectrum`` and ``daily_new`` describe the
    same ``D0``-day pilot."""
    method = BaselineId(method)
    D0 = spectrum.D0
    if method in (BaselineId.JK1, BaselineId.JK2, BaselineId.JK3, BaselineId.JK4):
        return jackknife_predict(spectrum, D0, D1, int(method.value[-1]))
    if method is BaselineId.GT:
        return good_toulmin_predict(spectrum, D0, D1)
    if method is BaselineId.BB:
        return beta_binomial_predict(spectrum, D0, D1)
    return beta_geometric_predict(daily_new, D1, seed=seed)
