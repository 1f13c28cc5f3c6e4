import csv

import numpy as np
import pytest

from swhf.noise import WongZakaiPath, grid_count, sample_wiener


def test_same_seed_same_path():
    a = sample_wiener(11, 1.0, 1 / 64)
    b = sample_wiener(11, 1.0, 1 / 64)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample_wiener(12, 1.0, 1 / 64).values)


def test_member_independent_of_batch():
    batch = sample_wiener(5, 1.0, 1 / 32, paths=6)
    for k in (0, 3, 5):
        np.testing.assert_array_equal(batch.member(k).values, sample_wiener(5, 1.0, 1 / 32, member=k).values)


def test_starts_at_zero_and_grid():
    w = sample_wiener(0, 2.0, 0.25)
    assert w.values[0] == 0.0 and w.n_steps == 8
    np.testing.assert_allclose(w.times, np.arange(9) * 0.25)


def test_terminal_moments():
    T = 1.0
    end = sample_wiener(123, T, 0.5, paths=10_000).values[:, -1]
    assert abs(end.mean()) <= 4 * np.sqrt(T / 10_000)
    assert abs(end.var() - T) <= 0.1 * T


@pytest.mark.parametrize("T, dt", [(1.0, 0.3), (-1.0, 0.1), (1.0, 0.0)])
def test_bad_grid(T, dt):
    with pytest.raises(ValueError):
        sample_wiener(0, T, dt)


def test_grid_count():
    assert grid_count(1.0, 2.0**-10) == 1024
    with pytest.raises(ValueError):
        grid_count(1.0, 0.3)


class TestWongZakai:
    def setup_method(self):
        self.w = sample_wiener(3, 1.0, 1 / 256)
        self.wz = WongZakaiPath(self.w, 1 / 16)

    def test_knots_exact(self):
        t = np.arange(17) / 16
        np.testing.assert_array_equal(self.wz.value(t), self.w.value(t))

    def test_midpoint(self):
        k = 5
        t0, t1 = k / 16, (k + 1) / 16
        assert self.wz.value((t0 + t1) / 2) == pytest.approx(0.5 * (self.w.value(t0) + self.w.value(t1)), abs=1e-15)

    def test_slope_piecewise_constant_right_continuous(self):
        t0, t1 = 3 / 16, 4 / 16
        expected = (self.w.value(t1) - self.w.value(t0)) * 16
        for t in (t0, t0 + 1e-3, t1 - 1e-3):
            assert self.wz.slope(t) == pytest.approx(expected, rel=1e-12)
        assert self.wz.slope(t1) == pytest.approx((self.w.value(5 / 16) - self.w.value(t1)) * 16, rel=1e-12)
        assert self.wz.slope(1.0) == pytest.approx(self.wz.slope(1.0 - 1e-6), rel=1e-12)

    def test_slope_integrates_to_endpoint(self):
        knots = np.arange(16) / 16
        total = np.sum(self.wz.slope(knots)) / 16
        assert total == pytest.approx(self.w.value(1.0), abs=1e-13)

    def test_continuity(self):
        t = np.linspace(0, 1, 4097)
        assert np.max(np.abs(np.diff(self.wz.value(t)))) < 0.2

    def test_refinement_agrees_on_shared_knots(self):
        fine = WongZakaiPath(self.w, 1 / 32)
        t = np.arange(17) / 16
        np.testing.assert_array_equal(fine.value(t), self.wz.value(t))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            self.wz.value(1.5)
        with pytest.raises(ValueError):
            self.wz.slope(-0.1)

    def test_delta_must_be_grid_multiple(self):
        with pytest.raises(ValueError):
            WongZakaiPath(self.w, 0.003)

    def test_mean_slope(self):
        assert self.wz.mean_slope(0.0, 0.125) == pytest.approx(self.w.value(0.125) / 0.125, rel=1e-12)

    def test_csv_export(self, tmp_path):
        p = tmp_path / "w.csv"
        self.wz.to_csv(p, header_comment="test")
        lines = p.read_text().splitlines()
        assert lines[0] == "# test"
        rows = list(csv.reader(lines[1:]))
        assert rows[0] == ["t", "W", "W_delta", "slope"]
        assert len(rows) == 258
        assert float(rows[17][1]) == self.w.values[16]
