import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abhorizon.data import (
    SuffStats,
    TriggerData,
    compute_spectrum,
    compute_suffstats,
    holdout_truth,
)
from abhorizon.errors import ConfigError, DataError

TWO_USERS = {(1, "u1"): 2, (2, "u1"): 1, (2, "u2"): 3}


def entries_strategy(max_day=6, max_users=5):
    key = st.tuples(st.integers(1, max_day), st.sampled_from([f"x{i}" for i in range(max_users)]))
    return st.dictionaries(key, st.integers(1, 4), max_size=20)


class TestTriggerData:
    def test_roster_first_appearance(self):
        data = TriggerData.from_entries({(2, "a"): 1, (1, "b"): 1, (2, "c"): 5})
        assert data.roster == ("b", "a", "c")
        assert data.days == 2

    def test_duplicates_summed_zeros_dropped(self):
        with pytest.warns(UserWarning, match="zero-count"):
            data = TriggerData.from_entries([(1, "a", 2), (1, "a", 1), (1, "b", 0)])
        assert data.entries() == {(1, "a"): 3}

    def test_rejects_negative(self):
        with pytest.raises(DataError):
            TriggerData.from_entries([(1, "a", -1)])

    def test_invariants_enforced(self):
        z = np.array([1])
        with pytest.raises(DataError):
            TriggerData(1, z, np.array([0]), np.array([0]), ("a",))
        with pytest.raises(DataError):
            TriggerData(1, z, np.array([1]), z, ("a",))
        with pytest.raises(DataError):
            TriggerData(2, np.array([2, 1]), np.array([0, 1]), np.array([1, 1]), ("a", "b"))
        with pytest.raises(DataError):
            TriggerData(1, np.array([1, 1]), np.array([0, 0]), np.array([1, 1]), ("a",))

    def test_arrays_read_only(self):
        data = TriggerData.from_entries(TWO_USERS)
        with pytest.raises(ValueError):
            data.count[0] = 7

    def test_truncate(self):
        data = TriggerData.from_entries(TWO_USERS)
        t = data.truncate(1)
        assert t.days == 1 and t.roster == ("u1",) and t.entries() == {(1, "u1"): 2}
        with pytest.raises(ConfigError):
            data.truncate(3)

    def test_daily_new_users(self):
        data = TriggerData.from_entries({**TWO_USERS, (4, "u3"): 1})
        assert list(data.daily_new_users()) == [1, 1, 0, 1]


class TestSuffStats:
    def test_two_users(self):
        s = compute_suffstats(TriggerData.from_entries(TWO_USERS), 2)
        assert s.N == 2 and list(s.m) == [3, 3] and list(s.arrivals) == [1, 2]
        assert [list(c) for c in s.positive_counts] == [[2, 1], [3]]

    def test_truncation(self):
        s = compute_suffstats(TriggerData.from_entries(TWO_USERS), 1)
        assert s.N == 1 and list(s.m) == [2] and list(s.arrivals) == [1]

    def test_empty(self):
        s = compute_suffstats(TriggerData.empty(1), 1)
        assert s.N == 0 and s.m.size == 0 and list(s.arrivals) == [0]

    def test_range(self):
        with pytest.raises(ConfigError):
            compute_suffstats(TriggerData.from_entries(TWO_USERS), 0)
        with pytest.raises(ConfigError):
            compute_suffstats(TriggerData.from_entries(TWO_USERS), 3)

    def test_from_arrivals(self):
        s = SuffStats.from_arrivals([1, 3, 3])
        assert s.N == 3 and s.D0 == 3 and not s.has_counts
        with pytest.raises(DataError):
            s.m_histogram()
        with pytest.raises(DataError):
            SuffStats.from_arrivals([2, 1])

    @settings(max_examples=60)
    @given(entries_strategy(), st.randoms(use_true_random=False))
    def test_invariants_and_order_independence(self, entries, rnd):
        if not entries:
            return
        data = TriggerData.from_entries(entries)
        items = list(entries.items())
        rnd.shuffle(items)
        shuffled = TriggerData.from_entries(dict(items), days=data.days)
        for D0 in range(1, data.days + 1):
            a, b = compute_suffstats(data, D0), compute_suffstats(shuffled, D0)
            assert a.N == len(a.m) == len(a.positive_counts)
            assert all(m == c.sum() and m >= 1 for m, c in zip(a.m, a.positive_counts))
            assert np.all(np.diff(a.arrivals) >= 0) and a.arrivals[-1] == a.N
            assert np.array_equal(a.m, b.m) and np.array_equal(a.arrivals, b.arrivals)
            assert sum(compute_spectrum(data, D0).phi.values()) == a.N


class TestSpectrum:
    def test_example(self):
        assert compute_spectrum(TriggerData.from_entries(TWO_USERS), 2).phi == {1: 1, 2: 1}

    def test_all_present(self):
        data = TriggerData.from_entries({(d, u): 3 for d in (1, 2, 3) for u in "abcd"})
        assert compute_spectrum(data, 3).phi == {3: 4}

    def test_empty(self):
        assert compute_spectrum(TriggerData.empty(2), 2).phi == {}


class TestHoldoutTruth:
    def test_new_user(self):
        data = TriggerData.from_entries({(1, "u1"): 1, (3, "u2"): 1, (4, "u2"): 1})
        assert holdout_truth(data, 2, 2) == (1, {2: 1}, 0, 2)

    def test_quiet_holdout(self):
        data = TriggerData.from_entries({(1, "u1"): 4}, days=3)
        assert holdout_truth(data, 1, 2) == (0, {}, 0, 0)

    def test_old_user(self):
        data = TriggerData.from_entries({(1, "u1"): 1, (3, "u1"): 3})
        assert holdout_truth(data, 2, 1) == (0, {}, 3, 3)

    def test_overflow(self):
        with pytest.raises(ConfigError):
            holdout_truth(TriggerData.from_entries(TWO_USERS), 1, 2)

    @given(entries_strategy(max_day=8))
    def test_total_decomposes(self, entries):
        if not entries:
            return
        data = TriggerData.from_entries(entries)
        for D0 in range(0, data.days + 1):
            for D1 in range(0, data.days - D0 + 1):
                t = holdout_truth(data, D0, D1)
                assert t.total == sum(j * n for j, n in t.new_by_freq.items()) + t.old_sum
                assert t.new_users == sum(t.new_by_freq.values())

    def test_pure(self):
        data = TriggerData.from_entries(TWO_USERS)
        assert holdout_truth(data, 1, 1) == holdout_truth(data, 1, 1)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            compute_suffstats(data, 2)
