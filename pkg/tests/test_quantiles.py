import numpy as np
import pytest

from eblr import (DataError, ResidualQuantiles, distributions, interval_rhos,
                  residual_quantile)


def rq(values):
    return ResidualQuantiles.from_residuals(values)


class TestResidualQuantile:
    def test_median_of_symmetric_set(self):
        assert residual_quantile(rq([-2, -1, 0, 1, 2]), 0.5) == 0.0

    def test_upper_tail_approaches_max(self):
        q = residual_quantile(rq([-2, -1, 0, 1, 2]), 1 - 1e-9)
        assert q == pytest.approx(2.0, abs=1e-6)

    def test_interpolated_position(self):
        # position (2 - 1) * 0.25 = 0.25 between 0 and 10
        assert residual_quantile(rq([0.0, 10.0]), 0.25) == 2.5

    def test_matches_hand_computed_order_statistics(self):
        values = [3.0, 1.0, 4.0, 1.5, 9.0]   # sorted: 1, 1.5, 3, 4, 9
        # position (5-1)*0.625 = 2.5 -> halfway between 3 and 4
        assert residual_quantile(rq(values), 0.625) == 3.5
        # position 4 * 0.1 = 0.4 -> 1 + 0.4 * 0.5
        assert residual_quantile(rq(values), 0.1) == pytest.approx(1.2)

    def test_domain_errors(self):
        r = rq([1.0, 2.0])
        for rho in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(DataError):
                residual_quantile(r, rho)
        with pytest.raises(DataError):
            ResidualQuantiles.from_residuals([])

    def test_sorted_storage(self):
        assert rq([3.0, -1.0, 2.0]).residuals == (-1.0, 2.0, 3.0)

    def test_monotone_in_rho(self, rng):
        r = rq(rng.normal(size=101))
        qs = [residual_quantile(r, rho) for rho in np.linspace(0.01, 0.99, 33)]
        assert all(b >= a for a, b in zip(qs, qs[1:]))


class TestDistributions:
    def test_symmetric_residuals_median_equals_point(self):
        r = rq([-2, -1, 0, 1, 2])
        d = distributions(np.array([10.0, 20.0]), r, (0.25, 0.5, 0.75))
        for row in d:
            assert dict(row.quantiles)[0.5] == row.point

    def test_default_levels_monotone(self, rng):
        r = rq(rng.normal(size=200))
        d = distributions(np.array([5.0]), r, (0.05, 0.25, 0.5, 0.75, 0.95))[0]
        values = [v for _, v in d.quantiles]
        assert len(values) == 5
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_constant_offsets_across_rows(self, rng):
        r = rq(rng.normal(size=50))
        points = np.array([1.0, 100.0, -40.0])
        d = distributions(points, r, (0.1, 0.9))
        widths = [dict(row.quantiles)[0.9] - dict(row.quantiles)[0.1] for row in d]
        assert widths[0] == pytest.approx(widths[1]) == pytest.approx(widths[2])

    def test_levels_validated(self):
        r = rq([1.0, 2.0])
        with pytest.raises(DataError):
            distributions(np.array([0.0]), r, (0.5, 0.25))  # not ascending
        with pytest.raises(DataError):
            distributions(np.array([0.0]), r, ())


class TestIntervalRhos:
    def test_ninety_percent_uses_tail_rhos(self):
        assert interval_rhos(0.9) == (pytest.approx(0.05), pytest.approx(0.95))

    def test_domain(self):
        for alpha in (0.0, 1.0, -1.0, 2.0):
            with pytest.raises(DataError):
                interval_rhos(alpha)
