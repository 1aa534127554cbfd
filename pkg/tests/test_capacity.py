import math

import numpy as np
import pytest

from btlcap import (
    Box,
    DiscretizationConfig,
    DivergenceError,
    Lorentzian,
    NoOpenChannelError,
    capacity_curve,
    capacity_rate,
    continuous_time_capacity,
    find_opening_times,
    lorentzian_opening_times,
    optimal_duration,
    pure_loss_capacity,
    solve_modes,
)

# closed forms of the frequency-multiplexed rates (frozen oracles):
# Lorentzian peak 1: 2 / (pi ln 2); box 0.85: log2(17/3) / pi
LORENTZIAN_QMAX = 0.9184481885265704
BOX_QMAX = 0.7965705985687418

CFG = DiscretizationConfig(n_points=240)


class TestPureLossCapacity:
    def test_threshold(self):
        assert pure_loss_capacity(0.5) == 0.0

    def test_below_threshold(self):
        assert pure_loss_capacity(0.2) == 0.0

    def test_above_threshold(self):
        assert pure_loss_capacity(0.9) == pytest.approx(math.log2(9.0), abs=1e-12)
        assert pure_loss_capacity(0.9) == pytest.approx(3.169925, abs=1e-6)

    def test_lossless_diverges(self):
        assert pure_loss_capacity(1.0) == math.inf

    def test_domain(self):
        with pytest.raises(ValueError):
            pure_loss_capacity(-0.1)
        with pytest.raises(ValueError):
            pure_loss_capacity(1.1)


class TestCapacityRate:
    def test_zero_before_first_opening(self):
        basis = solve_modes(Lorentzian(1.0, 1.0), 1.5, CFG)
        rate = capacity_rate(basis)
        assert rate.total == 0.0
        assert len(rate.per_channel) == 0
        assert rate.rate_for_k(3) == 0.0

    def test_open_channels_counted(self):
        basis = solve_modes(Lorentzian(1.0, 1.0), 8.0, CFG)
        rate = capacity_rate(basis)
        n_open = int(np.sum(basis.lambdas > 0.5))
        assert list(rate.open_indices) == list(range(1, n_open + 1))
        expected = sum(math.log2(l / (1 - l)) for l in basis.lambdas[:n_open]) / 8.0
        assert rate.total == pytest.approx(expected, rel=1e-12)

    def test_cumulative_prefix_sums(self):
        basis = solve_modes(Lorentzian(1.0, 1.0), 12.0, CFG)
        rate = capacity_rate(basis)
        assert rate.cumulative[-1] == pytest.approx(rate.total)
        assert np.all(np.diff(rate.cumulative) >= 0.0)
        assert rate.rate_for_k(1) == pytest.approx(rate.per_channel[0])


class TestContinuousTimeCapacity:
    def test_box_closed_form(self):
        val = continuous_time_capacity(Box(eta_bar=0.85, omega_half_width=1.0))
        assert val == pytest.approx(BOX_QMAX, abs=1e-9)
        assert val == pytest.approx(math.log2(0.85 / 0.15) / math.pi, abs=1e-12)

    def test_lorentzian_log_singularity(self):
        val = continuous_time_capacity(Lorentzian(1.0, 1.0))
        assert val == pytest.approx(LORENTZIAN_QMAX, abs=1e-6)
        assert val == pytest.approx(2.0 / (math.pi * math.log(2.0)), abs=1e-6)

    def test_never_open_spectrum(self):
        assert continuous_time_capacity(Box(eta_bar=0.5, omega_half_width=3.0)) == 0.0
        assert continuous_time_capacity(Lorentzian(eta_max=0.5, kappa=1.0)) == 0.0

    def test_saturated_spectrum_diverges(self):
        with pytest.raises(DivergenceError):
            continuous_time_capacity(Box(eta_bar=1.0, omega_half_width=1.0))

    def test_scales_with_bandwidth(self):
        v1 = continuous_time_capacity(Box(0.85, 1.0))
        v2 = continuous_time_capacity(Box(0.85, 2.0))
        assert v2 == pytest.approx(2.0 * v1, rel=1e-9)


class TestOpeningTimes:
    def test_lorentzian_unit_peak(self):
        found = find_opening_times(Lorentzian(1.0, 1.0), (0.5, 9.0), 3,
                                   DiscretizationConfig(n_points=300))
        assert [n for n, _ in found] == [1, 2, 3]
        for n, t_n in found:
            assert t_n == pytest.approx((2 * n - 1) * math.pi / 2, abs=1e-3)

    def test_matches_threshold_formula_at_lower_peak(self):
        expected = lorentzian_opening_times(0.9, 1.0, 2)
        found = find_opening_times(Lorentzian(0.9, 1.0), (0.5, 8.0), 2,
                                   DiscretizationConfig(n_points=300))
        for (n, t_n), t_ref in zip(found, expected):
            assert t_n == pytest.approx(t_ref, rel=2e-4)

    def test_no_openings_at_half_height(self):
        found = find_opening_times(Box(eta_bar=0.5, omega_half_width=1.0), (0.5, 12.0), 2,
                                   DiscretizationConfig(n_points=160))
        assert found == []

    def test_channels_open_in_order(self):
        found = find_opening_times(Lorentzian(1.0, 1.0), (0.5, 12.0), 3,
                                   DiscretizationConfig(n_points=240))
        times = [t for _, t in found]
        assert times == sorted(times)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            find_opening_times(Lorentzian(1.0, 1.0), (2.0, 1.0), 2)
        with pytest.raises(ValueError):
            find_opening_times(Lorentzian(1.0, 1.0), (1.0, 2.0), 0)


class TestOptimalDuration:
    def test_single_channel_interior_maximum(self):
        t_opt, q_opt = optimal_duration(Lorentzian(1.0, 1.0), 1, (2.0, 7.0), CFG,
                                        coarse_points=32)
        assert 2.0 < t_opt < 7.0
        # the returned value matches a direct evaluation and beats the edges
        basis = solve_modes(Lorentzian(1.0, 1.0), t_opt, CFG)
        assert q_opt == pytest.approx(capacity_rate(basis).rate_for_k(1), rel=1e-12)
        for edge in (2.0, 7.0):
            edge_rate = capacity_rate(solve_modes(Lorentzian(1.0, 1.0), edge, CFG))
            assert edge_rate.rate_for_k(1) <= q_opt + 1e-12

    def test_no_open_channel_error(self):
        with pytest.raises(NoOpenChannelError):
            optimal_duration(Lorentzian(1.0, 1.0), 1, (0.2, 1.2), CFG, coarse_points=16)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            optimal_duration(Lorentzian(1.0, 1.0), 0, (1.0, 2.0))
        with pytest.raises(ValueError):
            optimal_duration(Lorentzian(1.0, 1.0), 1, (2.0, 1.0))


@pytest.fixture(scope="module")
def curve():
    ts = np.linspace(1.0, 12.0, 23)
    return capacity_curve(Lorentzian(1.0, 1.0), ts, k_list=(1, 2, 3),
                          config=DiscretizationConfig(n_points=200))


class TestCapacityCurve:
    def test_rate_dominates_contributions(self, curve):
        for j in range(len(curve.k_list)):
            assert np.all(curve.rates + 1e-12 >= curve.k_rates[:, j])
        assert np.all(curve.k_rates >= 0.0)

    def test_contributions_ordered_in_k(self, curve):
        assert np.all(np.diff(curve.k_rates, axis=1) >= -1e-12)

    def test_total_capacity_monotone(self, curve):
        total = curve.rates * curve.ts
        assert np.all(np.diff(total) >= -1e-8)
        for j in range(len(curve.k_list)):
            assert np.all(np.diff(curve.k_rates[:, j] * curve.ts) >= -1e-8)

    def test_openings_recorded(self, curve):
        times = dict(curve.opening_times)
        assert times[1] == pytest.approx(math.pi / 2, abs=2e-3)
        assert times[2] == pytest.approx(3 * math.pi / 2, abs=2e-3)

    def test_rate_jumps_exactly_at_openings(self, curve):
        cfg = DiscretizationConfig(n_points=200)
        spec = Lorentzian(1.0, 1.0)
        for n, t_n in curve.opening_times:
            delta = 1e-3 * t_n
            lo = capacity_rate(solve_modes(spec, t_n - delta, cfg)).total
            hi = capacity_rate(solve_modes(spec, t_n + delta, cfg)).total
            assert hi - lo > 0.0

    def test_continuous_away_from_openings(self, curve):
        cfg = DiscretizationConfig(n_points=200)
        spec = Lorentzian(1.0, 1.0)
        opening = [t for _, t in curve.opening_times]
        for T in np.linspace(2.0, 11.0, 9):
            if min(abs(T - t) for t in opening) < 0.2:
                continue
            delta = 1e-3 * T
            lo = capacity_rate(solve_modes(spec, T - delta, cfg)).total
            hi = capacity_rate(solve_modes(spec, T + delta, cfg)).total
            assert abs(hi - lo) < 5e-3

    def test_csv_export(self, curve, tmp_path):
        path = tmp_path / "curve.csv"
        curve.to_csv(path)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        assert header[0] == "T"
        assert "Q" in header and "Q_1" in header
        assert len(lines) == 1 + len(curve.ts)
        opath = tmp_path / "openings.csv"
        curve.openings_to_csv(opath)
        rows = opath.read_text().splitlines()
        assert rows[0] == "n,T_n"
        assert len(rows) == 1 + len(curve.opening_times)


class TestConvergenceTowardsContinuum:
    def test_lorentzian_rate_approaches_limit(self):
        # the gap closes like ln(kT)/kT: 17.7% at kT=25, 3.8% at kT=200
        basis = solve_modes(Lorentzian(1.0, 1.0), 25.0, DiscretizationConfig(n_points=400))
        rel25 = abs(capacity_rate(basis).total - LORENTZIAN_QMAX) / LORENTZIAN_QMAX
        assert rel25 == pytest.approx(0.1767, abs=2e-3)
        basis = solve_modes(Lorentzian(1.0, 1.0), 200.0, DiscretizationConfig(n_points=1200))
        rel200 = abs(capacity_rate(basis).total - LORENTZIAN_QMAX) / LORENTZIAN_QMAX
        assert rel200 < 0.05
        assert rel200 < rel25
