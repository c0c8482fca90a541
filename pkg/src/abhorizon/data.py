"""Trigger data containers and the sufficient statistics derived from them.

Trigger data is a sparse day-by-user matrix of positive counts.  Users are
opaque string ids; internally they are dense indices assigned in order of
first appearance (ties within a day broken by id), so users seen during the
first ``D0`` days are always a prefix of the roster.
"""

from __future__ import annotations

import warnings
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DataError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriggerData:
    """Sparse daily trigger counts ``A[d, n]`` over ``days`` days.

    Entries are stored as three parallel arrays sorted by (day, user index).
    Zero counts are never stored.
    """

    days: int
    day: np.ndarray
    user: np.ndarray
    count: np.ndarray
    roster: tuple[str, ...]
    first_day: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if int(self.days) < 0:
            raise DataError(f"days must be >= 0, got {self.days}")
        day = np.asarray(self.day, dtype=np.int64).ravel()
        user = np.asarray(self.user, dtype=np.int64).ravel()
        count = np.asarray(self.count, dtype=np.int64).ravel()
        if not (day.size == user.size == count.size):
            raise DataError("day, user and count arrays must have equal length")
        n_users = len(self.roster)
        if day.size:
            if day.min() < 1 or day.max() > self.days:
                raise DataError(f"entry day outside 1..{self.days}")
            if user.min() < 0 or user.max() >= n_users:
                raise DataError("entry references a user missing from the roster")
            if count.min() < 1:
                raise DataError("stored counts must be >= 1")
        if len(set(self.roster)) != n_users:
            raise DataError("roster ids must be unique")

        order = np.lexsort((user, day))
        day, user, count = day[order], user[order], count[order]
        if day.size > 1:
            dup = (np.diff(day) == 0) & (np.diff(user) == 0)
            if dup.any():
                raise DataError("duplicate (day, user) entries")

        first = np.full(n_users, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(first, user, day)
        if n_users and first.max() == np.iinfo(np.int64).max:
            raise DataError("roster contains a user with no entries")
        if n_users > 1 and np.any(np.diff(first) < 0):
            raise DataError("roster is not in order of first appearance")

        object.__setattr__(self, "days", int(self.days))
        object.__setattr__(self, "day", _frozen(day))
        object.__setattr__(self, "user", _frozen(user))
        object.__setattr__(self, "count", _frozen(count))
        object.__setattr__(self, "roster", tuple(self.roster))
        object.__setattr__(self, "first_day", _frozen(first))

    @classmethod
    def empty(cls, days: int) -> TriggerData:
        z = np.zeros(0, dtype=np.int64)
        return cls(days, z, z, z, ())

    @classmethod
    def from_entries(
        cls,
        entries: Mapping[tuple[int, str], int] | Iterable[tuple[int, str, int]],
        days: int | None = None,
    ) -> TriggerData:
        """Build from ``{(day, user): count}`` or ``(day, user, count)`` triples.

        Duplicate (day, user) pairs are summed; zero counts are dropped with a
        warning.  ``days`` defaults to the last day carrying an entry.
        """
        if isinstance(entries, Mapping):
            items = ((d, u, k) for (d, u), k in entries.items())
        else:
            items = iter(entries)
        acc: dict[tuple[int, str], int] = {}
        dropped = 0
        for d, u, k in items:
            d, k = int(d), int(k)
            if k < 0:
                raise DataError(f"negative count {k} for day {d}, user {u!r}")
            if k == 0:
                dropped += 1
                continue
            key = (d, str(u))
            acc[key] = acc.get(key, 0) + k
        if dropped:
            warnings.warn(f"dropped {dropped} zero-count entries", stacklevel=2)
        if days is None:
            days = max((d for d, _ in acc), default=1)

        first: dict[str, int] = {}
        for d, u in acc:
            if d < first.get(u, d + 1):
                first[u] = d
        roster = sorted(first, key=lambda u: (first[u], u))
        index = {u: i for i, u in enumerate(roster)}
        n = len(acc)
        day = np.fromiter((d for d, _ in acc), dtype=np.int64, count=n)
        user = np.fromiter((index[u] for _, u in acc), dtype=np.int64, count=n)
        count = np.fromiter(acc.values(), dtype=np.int64, count=n)
        return cls(days, day, user, count, tuple(roster))

    @property
    def n_users(self) -> int:
        return len(self.roster)

    def entries(self) -> dict[tuple[int, str], int]:
        return {
            (int(d), self.roster[u]): int(k)
            for d, u, k in zip(self.day, self.user, self.count)
        }

    def truncate(self, last_day: int) -> TriggerData:
        """Restrict to days ``1..last_day``; the roster shrinks to a prefix."""
        if not 1 <= last_day <= self.days:
            raise ConfigError(f"last_day must be in 1..{self.days}, got {last_day}")
        keep = self.day <= last_day
        n_keep = int(np.searchsorted(self.first_day, last_day, side="right"))
        return TriggerData(
            last_day,
            self.day[keep],
            self.user[keep],
            self.count[keep],
            self.roster[:n_keep],
        )

    def daily_new_users(self) -> np.ndarray:
        """Number of users whose first trigger falls on each day 1..days."""
        return np.bincount(self.first_day, minlength=self.days + 1)[1:]


@dataclass(frozen=True, eq=False)
class SuffStats:
    """Pilot-window summary consumed by every model formula.

    ``m`` and the flat positive-count arrays are ``None`` when only daily
    first-trigger counts are known (aggregate input); such stats support the
    new-user predictors and the regression fit but not the likelihood.
    """

    D0: int
    N: int
    arrivals: np.ndarray
    m: np.ndarray | None = None
    pos_user: np.ndarray | None = None
    pos_count: np.ndarray | None = None

    @classmethod
    def from_arrivals(cls, arrivals: Iterable[int]) -> SuffStats:
        arr = np.asarray(list(arrivals), dtype=np.int64)
        if arr.size == 0:
            raise DataError("arrival curve is empty")
        if np.any(np.diff(arr) < 0) or arr[0] < 0:
            raise DataError("arrival curve must be nonnegative and nondecreasing")
        return cls(int(arr.size), int(arr[-1]), _frozen(arr))

    @property
    def has_counts(self) -> bool:
        return self.m is not None

    @property
    def positive_counts(self) -> tuple[np.ndarray, ...]:
        """Per-user arrays of the positive daily counts, in roster order."""
        if self.pos_user is None:
            raise DataError("per-user counts unavailable for aggregate data")
        bounds = np.searchsorted(self.pos_user, np.arange(self.N + 1))
        return tuple(self.pos_count[bounds[i] : bounds[i + 1]] for i in range(self.N))

    @cached_property
    def _m_hist(self) -> tuple[np.ndarray, np.ndarray]:
        return np.unique(self.m, return_counts=True)

    @cached_property
    def _count_hist(self) -> tuple[np.ndarray, np.ndarray]:
        return np.unique(self.pos_count, return_counts=True)

    def m_histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct per-user totals and how many users share each."""
        if self.m is None:
            raise DataError("per-user counts unavailable for aggregate data")
        return self._m_hist

    def count_histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct positive daily counts and their multiplicities."""
        if self.pos_count is None:
            raise DataError("per-user counts unavailable for aggregate data")
        return self._count_hist


@dataclass(frozen=True)
class FreqSpectrum:
    """``phi[k]``: number of users present on exactly ``k`` pilot days."""

    D0: int
    phi: Mapping[int, int]

    @property
    def N(self) -> int:
        return sum(self.phi.values())

    def as_array(self) -> np.ndarray:
        """Dense vector indexed by ``k`` (entry 0 unused)."""
        out = np.zeros(self.D0 + 1, dtype=np.int64)
        for k, v in self.phi.items():
            out[k] = v
        return out


class HoldoutTruth(NamedTuple):
    new_users: int
    new_by_freq: dict[int, int]
    old_sum: int
    total: int


def _check_pilot(data: TriggerData, pilot_days: int) -> None:
    if not 1 <= pilot_days <= data.days:
        raise ConfigError(f"pilot_days must be in 1..{data.days}, got {pilot_days}")


def compute_suffstats(data: TriggerData, pilot_days: int) -> SuffStats:
    _check_pilot(data, pilot_days)
    keep = data.day <= pilot_days
    n = int(np.searchsorted(data.first_day, pilot_days, side="right"))
    pos_user = data.user[keep]
    pos_count = data.count[keep]
    order = np.argsort(pos_user, kind="stable")
    pos_user, pos_count = pos_user[order], pos_count[order]
    m = np.bincount(pos_user, weights=pos_count, minlength=n).astype(np.int64)
    per_day = np.bincount(data.first_day[:n], minlength=pilot_days + 1)[1:]
    return SuffStats(
        D0=pilot_days,
        N=n,
        arrivals=_frozen(np.cumsum(per_day)),
        m=_frozen(m),
        pos_user=_frozen(pos_user),
        pos_count=_frozen(pos_count),
    )


def compute_spectrum(data: TriggerData, pilot_days: int) -> FreqSpectrum:
    _check_pilot(data, pilot_days)
    users = data.user[data.day <= pilot_days]
    days_present = np.bincount(users) if users.size else np.zeros(0, dtype=np.int64)
    ks, freq = np.unique(days_present[days_present > 0], return_counts=True)
    return FreqSpectrum(pilot_days, {int(k): int(f) for k, f in zip(ks, freq)})


def holdout_truth(data: TriggerData, D0: int, D1: int) -> HoldoutTruth:
    """Realized new users, their frequencies, old-user and total activity in
    days ``D0+1..D0+D1``."""
    if D0 < 0 or D1 < 0 or D0 + D1 > data.days:
        raise ConfigError(f"window D0={D0}, D1={D1} exceeds {data.days} days")
    win = (data.day > D0) & (data.day <= D0 + D1)
    users, counts = data.user[win], data.count[win]
    is_old = data.first_day[users] <= D0
    old_sum = int(counts[is_old].sum())
    per_new = np.bincount(users[~is_old], weights=counts[~is_old])
    per_new = per_new[per_new > 0].astype(np.int64)
    js, freq = np.unique(per_new, return_counts=True)
    return HoldoutTruth(
        new_users=int(per_new.size),
        new_by_freq={int(j): int(f) for j, f in zip(js, freq)},
        old_sum=old_sum,
        total=int(counts.sum()),
    )
