import json

import numpy as np
import pytest

from abhorizon import io
from abhorizon.bench import AccuracyReport
from abhorizon.data import FreqSpectrum, TriggerData
from abhorizon.errors import DataError
from abhorizon.fit import FitResult
from abhorizon.model import HyperParams, forecast
from abhorizon.data import SuffStats
from abhorizon.simulate import sample_model


def write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLongCsv:
    def test_duplicates_summed(self, tmp_path):
        d = io.parse_long_csv(write(tmp_path, "day,user,count\n1,a,2\n1,a,1\n"))
        assert d.entries() == {(1, "a"): 3}

    def test_missing_header(self, tmp_path):
        with pytest.raises(DataError, match="line 1"):
            io.parse_long_csv(write(tmp_path, "1,a,2\n"))

    def test_empty_body(self, tmp_path):
        d = io.parse_long_csv(write(tmp_path, "day,user,count\n"))
        assert d.n_users == 0

    def test_bad_row_names_line(self, tmp_path):
        with pytest.raises(DataError, match="line 3"):
            io.parse_long_csv(write(tmp_path, "day,user,count\n1,a,2\n2,b,x\n"))
        with pytest.raises(DataError, match="line 2"):
            io.parse_long_csv(write(tmp_path, "day,user,count\n0,a,2\n"))
        with pytest.raises(DataError, match="line 2"):
            io.parse_long_csv(write(tmp_path, "day,user,count\n1,a\n"))

    def test_zero_dropped_with_warning(self, tmp_path):
        with pytest.warns(UserWarning, match="zero-count"):
            d = io.parse_long_csv(write(tmp_path, "day,user,count\n1,a,0\n2,b,1\n"))
        assert d.entries() == {(2, "b"): 1}

    def test_iso_dates(self, tmp_path):
        d = io.parse_long_csv(write(tmp_path, "day,user,count\n2024-03-02,a,1\n2024-02-28,b,4\n"))
        assert d.entries() == {(1, "b"): 4, (4, "a"): 1}

    def test_canonical_roundtrip(self, tmp_path):
        data = sample_model(HyperParams(1, 0.5, 3, 1), 6, seed=2)
        p1 = tmp_path / "a.csv"
        io.write_long_csv(data, p1)
        p2 = tmp_path / "b.csv"
        io.write_long_csv(io.parse_long_csv(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert b"\r" not in p1.read_bytes()

    def test_quoted_ids_roundtrip(self, tmp_path):
        data = TriggerData.from_entries({(1, "a,b"): 2, (2, 'q"x'): 1})
        p = tmp_path / "q.csv"
        io.write_long_csv(data, p)
        assert io.parse_long_csv(p).entries() == data.entries()


class TestAggregateCsv:
    def test_cumulative(self, tmp_path):
        assert list(io.parse_aggregate_csv(write(tmp_path, "day,new_users\n1,5\n2,3\n"))) == [5, 8]

    def test_unsorted(self, tmp_path):
        assert list(io.parse_aggregate_csv(write(tmp_path, "day,new_users\n2,3\n1,5\n"))) == [5, 8]

    def test_gaps(self, tmp_path):
        assert list(io.parse_aggregate_csv(write(tmp_path, "day,new_users\n1,5\n4,1\n"))) == [5, 5, 5, 6]

    def test_errors(self, tmp_path):
        with pytest.raises(DataError):
            io.parse_aggregate_csv(write(tmp_path, "day,users\n1,5\n"))
        with pytest.raises(DataError, match="line 2"):
            io.parse_aggregate_csv(write(tmp_path, "day,new_users\n1,-5\n"))
        with pytest.raises(DataError):
            io.parse_aggregate_csv(write(tmp_path, "day,new_users\n"))


class TestJson:
    def test_params_exact_roundtrip(self, tmp_path):
        p = HyperParams(0.1 + 0.2, 1 / 3, 2.0**-40, 7.123456789012345)
        path = tmp_path / "p.json"
        io.write_params(FitResult(p, -12.5, True, 10, "mle"), path, pilot_days=4)
        assert io.read_params(path) == p
        body = json.loads(path.read_text())
        assert body["pilot_days"] == 4 and body["converged"] is True

    def test_bad_params(self, tmp_path):
        with pytest.raises(DataError):
            io.read_params(write(tmp_path, "{\"beta\": 1}", "p.json"))
        with pytest.raises(DataError):
            io.read_params(write(tmp_path, "{", "p.json"))
        with pytest.raises(DataError):
            io.read_params(write(tmp_path, '{"beta": 1, "sigma": 2, "c": 1, "r": 1}', "p.json"))

    def test_forecast_schema(self, tmp_path):
        rep = forecast(HyperParams(1, 0.5, 1, 1), SuffStats.from_arrivals([2, 3]), 3, freq_max=2)
        path = tmp_path / "f.json"
        io.write_forecast(rep, path)
        body = json.loads(path.read_text())
        assert body["schema_version"] == 1 and body["old_sum"] is None
        assert body["new_by_freq"][1]["j"] == 2


class TestTables:
    def test_results(self, tmp_path):
        reps = [AccuracyReport("d1", "jk1", 3, 4, 10, 7.5, 0.75, runtime_ms=3.2), AccuracyReport("d2", "gt", 3, 4, error='bad "x", y')]
        path = tmp_path / "r.csv"
        io.write_results_csv(reps, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(io.RESULT_COLUMNS)
        assert lines[1] == "d1,jk1,3,4,10,7.5,0.75,,,,"
        assert lines[2].endswith('"bad ""x"", y"')
        io.write_results_csv(reps, path, include_runtime=True)
        assert path.read_text().splitlines()[1].endswith(",3.2")

    def test_spectrum(self, tmp_path):
        path = tmp_path / "s.csv"
        io.write_spectrum_csv(FreqSpectrum(3, {3: 1, 1: 4}), path)
        assert path.read_text() == "k,phi\n1,4\n3,1\n"

    def test_table(self, tmp_path):
        path = tmp_path / "t.csv"
        io.write_table([{"a": 1, "b": np.float64(0.5)}, {"a": 2, "b": None}], path)
        assert path.read_text() == "a,b\n1,0.5\n2,\n"
