"""Exact generative samplers.  The day-by-day urn scheme draws from the
model itself; a Zipf-Poisson generator supplies misspecified benchmark data.

Randomness comes from numpy's Philox counter-based generator.  Every day of
an urn run gets its own child stream spawned from the root seed, so a run is
reproducible from ``seed`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SuffStats, TriggerData
from .model import HyperParams
from .special import psi

_TINY = np.nextafter(0.0, 1.0)
_ONE_MINUS = np.nextafter(1.0, 0.0)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _day_streams(seed, n: int) -> list[np.random.Generator]:
    return [make_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# -- primitive samplers ------------------------------------------------------


def gamma_draw(rng, shape, rate=1.0, size=None):
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(~(shape > 0)) or np.any(~(rate > 0)):
        raise ValueError("gamma_draw requires positive shape and rate")
    return rng.standard_gamma(shape, size=size) / rate


def log_gamma_draw(rng, shape, size=None):
    """``log`` of a unit-rate gamma draw, accurate for tiny shapes.

    Uses ``G(a) = G(a + 1) * U**(1/a)`` so the log never underflows.
    """
    shape = np.asarray(shape, dtype=float)
    if size is None:
        size = shape.shape
    g = rng.standard_gamma(shape + 1.0, size=size)
    u = rng.random(size=size)
    return np.log(g) + np.log1p(-u) / shape


def beta_draw(rng, a, b, size=None):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ValueError("beta_draw requires positive parameters")
    x = rng.standard_gamma(a, size=size)
    y = rng.standard_gamma(b, size=size)
    return x / (x + y)


def negbin_draw(rng, failures, p, size=None):
    """NegBin(failures, p) with mean ``failures * p / (1 - p)``, drawn as a
    Poisson mixed over a gamma."""
    failures = np.asarray(failures, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(~(failures > 0)) or np.any((p < 0) | (p >= 1)):
        raise ValueError("negbin_draw requires failures > 0 and 0 <= p < 1")
    lam = rng.standard_gamma(failures, size=size) * (p / (1.0 - p))
    return rng.poisson(lam)


def _inverse_cdf_from_one(rng, log_p1, log_ratio, size):
    """Invert a pmf on {1, 2, ...} given ``log pmf(1)`` and a callable for
    ``log pmf(k+1) / pmf(k)``.  Vectorized over the parameter arrays."""
    u = np.log(rng.random(size=size))
    out = np.ones(size, dtype=np.int64)
    # u < log(cdf(k))  <=>  stop at k
    log_pk = np.broadcast_to(log_p1, size).astype(float)
    log_cdf = log_pk.copy()
    active = u > log_cdf
    k = 1
    while active.any():
        k += 1
        log_pk = log_pk + log_ratio(k - 1)
        log_cdf = np.logaddexp(log_cdf, log_pk)
        out[active] = k
        active &= u > log_cdf
        if k > 100_000:
            break
    return out


def truncated_poisson_draw(rng, lam, size=None):
    """Poisson(lam) conditioned on being >= 1."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("truncated_poisson_draw requires lam >= 0")
    if size is None:
        size = lam.shape
    lam = np.broadcast_to(lam, size)
    out = np.empty(size, dtype=np.int64)
    accept = -np.expm1(-lam)
    rej = accept >= 0.1
    if rej.any():
        idx = np.flatnonzero(rej.ravel())
        lr = lam.ravel()[idx]
        res = np.zeros(idx.size, dtype=np.int64)
        todo = np.arange(idx.size)
        while todo.size:
            draw = rng.poisson(lr[todo])
            ok = draw > 0
            res[todo[ok]] = draw[ok]
            todo = todo[~ok]
        out.ravel()[idx] = res
    if (~rej).any():
        idx = np.flatnonzero(~rej.ravel())
        lr = lam.ravel()[idx]
        with np.errstate(divide="ignore"):
            log_lam = np.log(lr)
        # pmf(1 | >= 1) = lam e^-lam / (1 - e^-lam); ratio pmf(k+1)/pmf(k) = lam/(k+1)
        log_p1 = np.where(lr > 0, log_lam - lr - np.log(-np.expm1(-np.maximum(lr, 1e-300))), 0.0)
        ratio = lambda k: log_lam - np.log(k + 1.0)  # noqa: E731
        out.ravel()[idx] = _inverse_cdf_from_one(rng, log_p1, ratio, idx.size)
    return out


def truncated_negbin_draw(rng, failures, p, size=None):
    """NegBin(failures, p) conditioned on being >= 1."""
    failures = np.asarray(failures, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(~(failures > 0)) or np.any((p < 0) | (p >= 1)):
        raise ValueError("truncated_negbin_draw requires failures > 0 and 0 <= p < 1")
    if size is None:
        size = np.broadcast_shapes(failures.shape, p.shape)
    f = np.broadcast_to(failures, size).ravel()
    pp = np.broadcast_to(p, size).ravel()
    out = np.empty(f.size, dtype=np.int64)
    log1m_p = np.log1p(-pp)
    accept = -np.expm1(f * log1m_p)
    rej = accept >= 0.1
    if rej.any():
        idx = np.flatnonzero(rej)
        res = np.zeros(idx.size, dtype=np.int64)
        todo = np.arange(idx.size)
        while todo.size:
            draw = negbin_draw(rng, f[idx[todo]], pp[idx[todo]])
            ok = draw > 0
            res[todo[ok]] = draw[ok]
            todo = todo[~ok]
        out[idx] = res
    if (~rej).any():
        idx = np.flatnonzero(~rej)
        fi, pi, l1m = f[idx], pp[idx], log1m_p[idx]
        with np.errstate(divide="ignore"):
            log_pi = np.log(pi)
            # pmf(1 | >= 1) = f p (1-p)^f / (1 - (1-p)^f)
            log_p1 = np.log(fi) + log_pi + fi * l1m - np.log(np.maximum(accept[idx], 1e-300))
        log_p1 = np.where(pi > 0, log_p1, 0.0)
        ratio = lambda k: log_pi + np.log((k + fi) / (k + 1.0))  # noqa: E731
        out[idx] = _inverse_cdf_from_one(rng, log_p1, ratio, idx.size)
    return out.reshape(size)


def discrete_pmf_draw(rng, logpmf, size=None):
    """Draw indices ``0..K-1`` from an (unnormalized) log pmf vector."""
    logpmf = np.asarray(logpmf, dtype=float)
    if logpmf.ndim != 1 or logpmf.size == 0 or not np.isfinite(logpmf.max()):
        raise ValueError("discrete_pmf_draw requires a nonempty finite log pmf")
    w = np.exp(logpmf - logpmf.max())
    cdf = np.cumsum(w)
    u = rng.random(size=size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), logpmf.size - 1)


def sample_new_user_log_jump(rng, sigma: float, r: float, d: int, size: int) -> np.ndarray:
    """Log of jumps of users first triggering on day ``d + 1``.

    Target density on (0, 1): ``(1-s)**(r d) * (1 - (1-s)**r) * s**(-1-sigma)``.
    Rejection from Beta(1 - sigma, r d + 1), which is the target with the
    factor ``1 - (1-s)**r`` replaced by its bound ``max(r, 1) * s``.
    """
    if not 0 < sigma < 1 or r <= 0 or d < 0:
        raise ValueError("invalid jump-sampler parameters")
    bound = max(r, 1.0)
    out = np.empty(size)
    todo = np.arange(size)
    while todo.size:
        k = todo.size
        lx = log_gamma_draw(rng, np.full(k, 1.0 - sigma))
        ly = log_gamma_draw(rng, np.full(k, r * d + 1.0))
        log_s = lx - np.logaddexp(lx, ly)
        s = np.exp(log_s)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(
                s > 1e-12,
                -np.expm1(r * np.log1p(-s)) / (bound * s),
                r / bound,
            )
        ok = rng.random(k) < ratio
        out[todo[ok]] = log_s[ok]
        todo = todo[~ok]
    return out


def sample_new_user_jump(sigma: float, r: float, d: int, seed=None, size: int | None = None, rng=None):
    """Jump of a user first triggering on day ``d + 1``; values in (0, 1)."""
    rng = rng if rng is not None else make_rng(seed)
    n = 1 if size is None else size
    s = np.clip(np.exp(sample_new_user_log_jump(rng, sigma, r, d, n)), _TINY, _ONE_MINUS)
    return float(s[0]) if size is None else s


# -- urn scheme --------------------------------------------------------------


def _user_ids(n: int) -> tuple[str, ...]:
    width = len(str(max(n, 1)))
    return tuple(f"u{i + 1:0{width}d}" for i in range(n))


class _UrnState:
    """Running totals of an urn run; new users are appended in arrival order."""

    def __init__(self, params: HyperParams, m0: np.ndarray, d0: int):
        self.params = params
        self.m = np.array(m0, dtype=np.int64)
        self.d = d0
        self.days: list[np.ndarray] = []
        self.users: list[np.ndarray] = []
        self.counts: list[np.ndarray] = []

    @property
    def n(self) -> int:
        return self.m.size

    def step(self, rng: np.random.Generator, first_active: int = 0) -> int:
        """Generate day ``d + 1``; return the number of new users.

        Users with roster index below ``first_active`` are not simulated.
        """
        p = self.params
        d, n_old = self.d, self.n
        prob = psi(p.sigma, p.r, d, 1) / (p.beta + psi(p.sigma, p.r, 0, d + 1))
        n_new = int(negbin_draw(rng, n_old + p.c + 1.0, prob))

        parts_u, parts_k = [], []
        n_act = n_old - first_active
        if n_act > 0:
            m = self.m[first_active:].astype(float)
            # J ~ Beta(m - sigma, r d + 1); A ~ NegBin(r, J) = Poisson(G_r * J/(1-J))
            odds = rng.standard_gamma(m - p.sigma) / rng.standard_gamma(np.full(n_act, p.r * d + 1.0))
            a = rng.poisson(rng.standard_gamma(np.full(n_act, p.r)) * odds)
            hit = np.flatnonzero(a)
            parts_u.append(hit + first_active)
            parts_k.append(a[hit])
        if n_new:
            log_tau = sample_new_user_log_jump(rng, p.sigma, p.r, d, n_new)
            tau = np.minimum(np.exp(log_tau), _ONE_MINUS)
            a_new = truncated_negbin_draw(rng, np.full(n_new, p.r), tau)
            parts_u.append(np.arange(n_old, n_old + n_new))
            parts_k.append(a_new)
            self.m = np.concatenate([self.m, np.zeros(n_new, dtype=np.int64)])
        if parts_u:
            u = np.concatenate(parts_u)
            k = np.concatenate(parts_k).astype(np.int64)
            self.m[u] += k
            self.days.append(np.full(u.size, d + 1, dtype=np.int64))
            self.users.append(u.astype(np.int64))
            self.counts.append(k)
        self.d = d + 1
        return n_new

    def entries(self):
        if not self.days:
            z = np.zeros(0, dtype=np.int64)
            return z, z, z
        return (
            np.concatenate(self.days),
            np.concatenate(self.users),
            np.concatenate(self.counts),
        )


def sample_model(params: HyperParams, days: int, seed=0) -> TriggerData:
    """Draw ``days`` days of trigger data from the model via the urn scheme.

    Day ``d + 1`` given days ``1..d``: a NegBin number of new users; for each
    new user a jump from the first-trigger jump law and a zero-truncated
    NegBin(r, jump) count; for each earlier user a fresh posterior rate
    ``J ~ Beta(m - sigma, r d + 1)`` and a NegBin(r, J) count.
    """
    if days < 0:
        raise ValueError("days must be >= 0")
    if days == 0:
        return TriggerData.empty(0)
    state = _UrnState(params, np.zeros(0, dtype=np.int64), 0)
    for rng in _day_streams(seed, days):
        state.step(rng)
    day, user, count = state.entries()
    return TriggerData(days, day, user, count, _user_ids(state.n))


def continue_model(
    params: HyperParams,
    stats: SuffStats,
    horizon: int,
    seed=0,
    old_users: bool = True,
) -> TriggerData:
    """Urn continuation of ``horizon`` days after a pilot summarized by ``stats``.

    Returned data covers days ``D0+1..D0+horizon`` (indexed ``1..horizon``);
    pilot users are renamed ``p1, p2, ...`` and users first seen in the
    continuation ``n1, n2, ...``.  With ``old_users=False`` pilot users are
    not simulated, which leaves the law of every new-user statistic unchanged.
    """
    if not stats.has_counts:
        raise ValueError("continuation needs per-user pilot totals")
    state = _UrnState(params, np.asarray(stats.m), stats.D0)
    first_active = 0 if old_users else stats.N
    for rng in _day_streams(seed, horizon):
        state.step(rng, first_active)
    day, user, count = state.entries()
    return _continuation_data(horizon, day - stats.D0, user, count, stats.N, state.n)


def _continuation_data(horizon, day, user, count, n_pilot, n_total) -> TriggerData:
    # TriggerData requires every roster user to appear; keep only those who do
    seen = np.zeros(n_total, dtype=bool)
    seen[user] = True
    present = np.flatnonzero(seen)
    first = np.full(n_total, np.iinfo(np.int64).max)
    np.minimum.at(first, user, day)
    order = present[np.lexsort((present, first[present]))]
    remap = np.empty(n_total, dtype=np.int64)
    remap[order] = np.arange(order.size)
    ids = tuple(
        (f"p{i + 1}" if i < n_pilot else f"n{i - n_pilot + 1}") for i in order
    )
    return TriggerData(horizon, day, remap[user], count, ids)


def sample_arrival_paths(
    params: HyperParams,
    n_start: int,
    d_start: int,
    horizon: int,
    n_paths: int,
    seed=0,
) -> np.ndarray:
    """Cumulative new-user counts over ``horizon`` days for ``n_paths``
    independent urn continuations from ``n_start`` users after ``d_start``
    days.  Only the arrival step of the urn is needed for these counts.

    Returns an array of shape ``(n_paths, horizon)``.
    """
    rng = make_rng(seed)
    p = params
    n = np.full(n_paths, float(n_start))
    out = np.empty((n_paths, horizon), dtype=np.int64)
    for t in range(horizon):
        d = d_start + t
        prob = psi(p.sigma, p.r, d, 1) / (p.beta + psi(p.sigma, p.r, 0, d + 1))
        n = n + negbin_draw(rng, n + p.c + 1.0, prob)
        out[:, t] = n - n_start
    return out


# -- Zipf-Poisson generator --------------------------------------------------


def sample_zipf(tau: float, n_users: int, days: int, seed=0) -> TriggerData:
    """Zipf-Poisson trigger data.

    User ``n`` (1-based) is present on each day with probability
    ``n**(-tau)``; when present on day ``d`` it triggers
    ``tPoisson(1 + m / d)`` times, ``m`` being its total before day ``d``.
    """
    if tau <= 0 or n_users < 1 or days < 1:
        raise ValueError("sample_zipf requires tau > 0, n_users >= 1, days >= 1")
    theta = np.arange(1, n_users + 1, dtype=float) ** (-tau)
    m = np.zeros(n_users, dtype=np.int64)
    parts = []
    for d, rng in enumerate(_day_streams(seed, days), start=1):
        present = np.flatnonzero(rng.random(n_users) < theta)
        k = truncated_poisson_draw(rng, 1.0 + m[present] / d)
        m[present] += k
        parts.append((np.full(present.size, d), present, k))
    day = np.concatenate([p[0] for p in parts])
    user = np.concatenate([p[1] for p in parts])
    count = np.concatenate([p[2] for p in parts])
    # relabel users by first appearance, ties by Zipf rank
    first = np.full(n_users, np.iinfo(np.int64).max)
    np.minimum.at(first, user, day)
    seen = np.flatnonzero(first < np.iinfo(np.int64).max)
    order = seen[np.lexsort((seen, first[seen]))]
    remap = np.empty(n_users, dtype=np.int64)
    remap[order] = np.arange(order.size)
    width = len(str(n_users))
    ids = tuple(f"z{i + 1:0{width}d}" for i in order)
    return TriggerData(days, day, remap[user], count, ids)


@dataclass(frozen=True)
class SimConfig:
    """Either ``params`` (model draw) or ``tau``/``n_users`` (Zipf draw)."""

    days: int
    seed: int = 0
    params: HyperParams | None = None
    tau: float | None = None
    n_users: int | None = None

    def __post_init__(self) -> None:
        if self.days < 0:
            raise ValueError("days must be >= 0")
        if (self.params is None) == (self.tau is None):
            raise ValueError("give exactly one of params or tau")
        if self.tau is not None and (self.tau <= 0 or not self.n_users or self.n_users < 1):
            raise ValueError("Zipf draws need tau > 0 and n_users >= 1")


def simulate(config: SimConfig) -> TriggerData:
    if config.params is not None:
        return sample_model(config.params, config.days, config.seed)
    return sample_zipf(config.tau, config.n_users, config.days, config.seed)
