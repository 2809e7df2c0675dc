import numpy as np
import pytest

from rrforge.csvio import CHEST_COLUMNS, WRIST_COLUMNS, read_chest_csv, read_wrist_csv, write_channels_csv


def _write_wrist(path, n=64, rate=20.0, mangle=None):
    t = np.arange(n) / rate
    cols = {c: np.linspace(0, 1, n) * (i + 1) for i, c in enumerate(WRIST_COLUMNS[1:])}
    if mangle:
        t, cols = mangle(t, cols)
    write_channels_csv(path, t, cols)
    return t, cols


class TestReadWristCsv:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "w.csv"
        t, cols = _write_wrist(p)
        sigs = read_wrist_csv(p)
        assert set(sigs) == set(WRIST_COLUMNS[1:])
        assert sigs["ppg"].rate == pytest.approx(20.0)
        assert np.allclose(sigs["ppg"].samples, cols["ppg"], atol=1e-5)
        assert np.allclose(sigs["gyr_z"].samples, cols["gyr_z"], atol=1e-4)

    def test_rejects_missing_column(self, tmp_path):
        p = tmp_path / "w.csv"
        _write_wrist(p)
        lines = p.read_text().splitlines()
        lines[0] = lines[0].replace("gyr_z", "gyro_z")
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError):
            read_wrist_csv(p)

    def test_rejects_nonmonotonic_time(self, tmp_path):
        p = tmp_path / "w.csv"

        def swap(t, cols):
            t = t.copy()
            t[5], t[6] = t[6], t[5]
            return t, cols

        _write_wrist(p, mangle=swap)
        with pytest.raises(ValueError):
            read_wrist_csv(p)

    def test_rejects_nonuniform_time(self, tmp_path):
        p = tmp_path / "w.csv"

        def stretch(t, cols):
            t = t.copy()
            t[10:] += 0.5  # a gap of 10 sample periods
            return t, cols

        _write_wrist(p, mangle=stretch)
        with pytest.raises(ValueError):
            read_wrist_csv(p)

    def test_rejects_single_row(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text(",".join(WRIST_COLUMNS) + "\n" + ",".join(["0.0"] * len(WRIST_COLUMNS)) + "\n")
        with pytest.raises(ValueError):
            read_wrist_csv(p)

    def test_rejects_nonfinite_value(self, tmp_path):
        p = tmp_path / "w.csv"
        _write_wrist(p)
        lines = p.read_text().splitlines()
        parts = lines[3].split(",")
        parts[1] = "nan"
        lines[3] = ",".join(parts)
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError):
            read_wrist_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises((OSError, ValueError)):
            read_wrist_csv(tmp_path / "nope.csv")


class TestReadChestCsv:
    def test_round_trip_512hz(self, tmp_path):
        p = tmp_path / "c.csv"
        n = 1024
        t = np.arange(n) / 512.0
        cols = {c: np.sin(np.arange(n) * 0.01 * (i + 1)) for i, c in enumerate(CHEST_COLUMNS[1:])}
        write_channels_csv(p, t, cols)
        sigs = read_chest_csv(p)
        assert set(sigs) == {"acc_x", "acc_y", "acc_z"}
        assert sigs["acc_x"].rate == pytest.approx(512.0)
        assert np.allclose(sigs["acc_y"].samples, cols["acc_y"], atol=1e-4)

    def test_rejects_wrist_header(self, tmp_path):
        p = tmp_path / "c.csv"
        _write_wrist(p)
        with pytest.raises(ValueError):
            read_chest_csv(p)


class TestWriteChannelsCsv:
    def test_header_order_matches_input(self, tmp_path):
        p = tmp_path / "o.csv"
        t = np.arange(4) / 2.0
        write_channels_csv(p, t, {"b": np.ones(4), "a": np.zeros(4)})
        assert p.read_text().splitlines()[0] == "t,b,a"

    def test_rounding_is_applied(self, tmp_path):
        p = tmp_path / "o.csv"
        write_channels_csv(p, np.array([0.0, 0.5]), {"v": np.array([1.23456789, 2.0])}, decimals=5)
        body = p.read_text().splitlines()[1]
        assert body.split(",")[1] == "1.23457"
