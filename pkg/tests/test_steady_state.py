"""Steady-state solver tests with brute-force scan oracles."""

import numpy as np
import pytest

from ccpt_sim.model import CavityConfig, Drive
from ccpt_sim.steady_state import (
    BistableRegion,
    NoCriticalPointError,
    bistable_region,
    classify_stability,
    critical_point,
    phase_deg,
    photon_number_roots,
    reflection_coefficient,
    response_curve,
)

TWO_PI = 2 * np.pi


def make_config(kerr_hz=-470e3, kappa_int_hz=0.5e6, kappa_ext_hz=1.0e6,
                f0_hz=5.8e9):
    return CavityConfig(
        omega0=TWO_PI * f0_hz,
        kerr=TWO_PI * kerr_hz,
        kappa_int=TWO_PI * kappa_int_hz,
        kappa_ext=TWO_PI * kappa_ext_hz,
    )


def cubic_value(n, config, drive):
    delta = drive.omega_d - config.omega0
    k, kap = config.kerr, config.kappa_tot
    return (k**2 * n**3 - 2 * k * delta * n**2
            + (delta**2 + kap**2 / 4) * n - config.kappa_ext * drive.n_in)


def scan_roots(config, drive, points=1_000_001):
    """Independent sign-change scan of the cubic over a safe bracket."""
    kap = config.kappa_tot
    if config.kerr != 0.0:
        f = abs(config.kerr) * config.kappa_ext * drive.n_in / kap**3
        n_max = (4.0 * f + 3.0) * kap / abs(config.kerr)
    else:
        n_max = 4.0 * config.kappa_ext * drive.n_in / kap**2 + 1.0
    grid = np.linspace(0.0, n_max, points)
    vals = cubic_value(grid, config, drive)
    signs = np.sign(vals)
    crossings = np.where(np.diff(signs) != 0)[0]
    return 0.5 * (grid[crossings] + grid[crossings + 1]), grid[1] - grid[0]


class TestPhotonNumberRoots:
    def test_linear_lorentzian_limit(self):
        cfg = make_config(kerr_hz=0.0, kappa_int_hz=0.75e6, kappa_ext_hz=0.75e6)
        n_in = 1e6
        drive = Drive.at_detuning(cfg, 0.0, n_in)
        (sol,) = photon_number_roots(cfg, drive)
        assert sol.n == pytest.approx(2 * n_in / cfg.kappa_tot, rel=1e-12)
        assert sol.stable

    def test_undriven_cavity(self):
        cfg = make_config()
        (sol,) = photon_number_roots(cfg, Drive.at_detuning(cfg, 0.0, 0.0))
        assert sol.n == 0.0
        assert sol.stable

    def test_three_roots_match_scan_oracle(self):
        # K/kappa = -0.31, Delta = -1.5 kappa, drive 3 dB above critical
        kap_hz = 1.5e6
        cfg = make_config(kerr_hz=-0.31 * kap_hz, kappa_int_hz=0.5e6,
                          kappa_ext_hz=1.0e6)
        n_in = 2.0 * critical_point(cfg).n_in_c
        drive = Drive.at_detuning(cfg, -1.5 * cfg.kappa_tot, n_in)
        sols = photon_number_roots(cfg, drive)
        assert len(sols) == 3
        oracle, cell = scan_roots(cfg, drive)
        assert len(oracle) == 3
        for sol, ref in zip(sols, oracle):
            assert abs(sol.n - ref) < max(cell, 1e-6 * ref)

    def test_alpha_magnitude_matches_root(self):
        cfg = make_config()
        n_in = 3.0 * critical_point(cfg).n_in_c
        drive = Drive.at_detuning(cfg, -2.0 * cfg.kappa_tot, n_in)
        for sol in photon_number_roots(cfg, drive):
            assert abs(abs(sol.alpha) ** 2 - sol.n) <= 1e-12 * max(sol.n, 1e-30)

    def test_residuals_and_counts_fuzz(self):
        rng = np.random.default_rng(42)
        for _ in range(400):
            kap_hz = rng.uniform(0.5e6, 3e6)
            split = rng.uniform(0.2, 0.95)
            cfg = make_config(
                kerr_hz=rng.choice([-1, 1]) * rng.uniform(0.05, 1.0) * kap_hz,
                kappa_int_hz=(1 - split) * kap_hz, kappa_ext_hz=split * kap_hz)
            n_in_c = critical_point(cfg).n_in_c
            drive = Drive.at_detuning(
                cfg, rng.uniform(-6, 6) * cfg.kappa_tot,
                rng.uniform(0.05, 20.0) * n_in_c)
            sols = photon_number_roots(cfg, drive)
            assert len(sols) in (1, 3)
            rhs = cfg.kappa_ext * drive.n_in
            for sol in sols:
                assert abs(cubic_value(sol.n, cfg, drive)) < 1e-9 * rhs
            oracle, _ = scan_roots(cfg, drive, points=20001)
            assert len(oracle) == len(sols)

    def test_roots_sorted_ascending(self):
        cfg = make_config()
        n_in = 5.0 * critical_point(cfg).n_in_c
        drive = Drive.at_detuning(cfg, -3.0 * cfg.kappa_tot, n_in)
        ns = [s.n for s in photon_number_roots(cfg, drive)]
        assert ns == sorted(ns)


class TestStability:
    def test_single_root_always_stable(self):
        cfg = make_config()
        drive = Drive.at_detuning(cfg, 3.0 * cfg.kappa_tot, 1e5)
        (sol,) = photon_number_roots(cfg, drive)
        assert sol.stable

    def test_three_root_pattern(self):
        cfg = make_config()
        n_in = 2.0 * critical_point(cfg).n_in_c
        drive = Drive.at_detuning(cfg, -1.5 * cfg.kappa_tot, n_in)
        sols = photon_number_roots(cfg, drive)
        assert [s.stable for s in sols] == [True, False, True]
        assert [s.branch_label for s in sols] == ["low", "unstable", "high"]

    def test_zero_root_stable(self):
        cfg = make_config()
        assert classify_stability(0.0, cfg, Drive.at_detuning(cfg, 0.0, 0.0))

    def test_pattern_fuzz(self):
        rng = np.random.default_rng(3)
        count3 = 0
        for _ in range(300):
            kap_hz = rng.uniform(0.5e6, 3e6)
            cfg = make_config(
                kerr_hz=rng.choice([-1, 1]) * rng.uniform(0.05, 0.9) * kap_hz,
                kappa_int_hz=0.3 * kap_hz, kappa_ext_hz=0.7 * kap_hz)
            n_in = rng.uniform(1.2, 15.0) * critical_point(cfg).n_in_c
            region = bistable_region(cfg, n_in)
            if not region.exists:
                continue
            delta = rng.uniform(region.delta_lower, region.delta_upper)
            sols = photon_number_roots(cfg, Drive.at_detuning(cfg, delta, n_in))
            if len(sols) == 3:
                count3 += 1
                assert [s.stable for s in sols] == [True, False, True]
        assert count3 > 100


class TestReflection:
    def test_lossless_unit_magnitude(self):
        cfg = make_config(kappa_int_hz=0.0, kappa_ext_hz=1.5e6)
        rng = np.random.default_rng(11)
        for _ in range(50):
            drive = Drive.at_detuning(cfg, rng.uniform(-10, 10) * cfg.kappa_tot, 1e7)
            s11 = reflection_coefficient(cfg, drive, rng.uniform(0, 30))
            assert abs(abs(s11) - 1.0) < 1e-12

    def test_critical_coupling_null(self):
        cfg = make_config(kerr_hz=-470e3, kappa_int_hz=0.75e6, kappa_ext_hz=0.75e6)
        n = 5.0
        drive = Drive.at_detuning(cfg, cfg.kerr * n, 1e7)
        assert abs(reflection_coefficient(cfg, drive, n)) < 1e-12

    def test_far_detuned_limit(self):
        cfg = make_config()
        drive = Drive.at_detuning(cfg, 1e6 * cfg.kappa_tot, 1e7)
        assert reflection_coefficient(cfg, drive, 0.0) == pytest.approx(1.0, abs=1e-5)

    def test_magnitude_bounded_by_unity(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            cfg = make_config(kappa_int_hz=rng.uniform(0.0, 2e6),
                              kappa_ext_hz=rng.uniform(0.1e6, 2e6))
            drive = Drive.at_detuning(cfg, rng.uniform(-5, 5) * cfg.kappa_tot, 1e7)
            s11 = reflection_coefficient(cfg, drive, rng.uniform(0, 40))
            assert abs(s11) <= 1.0 + 1e-15

    def test_phase_convention_range(self):
        assert phase_deg(-1.0 + 0j) == 180.0
        assert phase_deg(1.0 + 0j) == 0.0
        assert -180.0 < phase_deg(-1.0 - 1e-9j) <= 180.0


class TestCriticalPoint:
    def test_sign_follows_kerr(self):
        assert critical_point(make_config(kerr_hz=-470e3)).delta_c < 0
        assert critical_point(make_config(kerr_hz=+470e3)).delta_c > 0

    def test_doubling_kerr_halves_critical_flux(self):
        c1 = critical_point(make_config(kerr_hz=-400e3))
        c2 = critical_point(make_config(kerr_hz=-800e3))
        assert c2.n_in_c == pytest.approx(c1.n_in_c / 2, rel=1e-12)

    def test_no_critical_point_for_linear_cavity(self):
        with pytest.raises(NoCriticalPointError):
            critical_point(make_config(kerr_hz=0.0))

    def test_region_brackets_spinode_power(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            kap_hz = rng.uniform(0.5e6, 3e6)
            cfg = make_config(
                kerr_hz=rng.choice([-1, 1]) * rng.uniform(0.1, 0.9) * kap_hz,
                kappa_int_hz=0.4 * kap_hz, kappa_ext_hz=0.6 * kap_hz)
            n_in_c = critical_point(cfg).n_in_c
            assert bistable_region(cfg, 1.01 * n_in_c).exists
            assert not bistable_region(cfg, 0.99 * n_in_c).exists

    def test_collapsing_interval_midpoint(self):
        cfg = make_config()
        cp = critical_point(cfg)
        region = bistable_region(cfg, 1.01 * cp.n_in_c)
        assert region.exists
        width = region.delta_upper - region.delta_lower
        assert width < 0.05 * cfg.kappa_tot
        midpoint = 0.5 * (region.delta_lower + region.delta_upper)
        assert midpoint == pytest.approx(cp.delta_c, rel=0.02)


class TestBistableRegion:
    def test_below_critical_no_region(self):
        cfg = make_config()
        n_in_c = critical_point(cfg).n_in_c
        assert not bistable_region(cfg, 0.5 * n_in_c).exists

    def test_edges_match_root_count_changes(self):
        cfg = make_config()
        n_in = 4.0 * critical_point(cfg).n_in_c
        region = bistable_region(cfg, n_in)
        assert region.exists
        assert region.delta_lower < region.delta_upper < 0  # K < 0: red side
        eps = 2e-4 * cfg.kappa_tot
        for edge in (region.delta_lower, region.delta_upper):
            inside = 0.5 * (region.delta_lower + region.delta_upper)
            toward = np.sign(inside - edge)
            n_in_roots = len(photon_number_roots(
                cfg, Drive.at_detuning(cfg, edge + toward * eps, n_in)))
            n_out_roots = len(photon_number_roots(
                cfg, Drive.at_detuning(cfg, edge - toward * eps, n_in)))
            assert n_in_roots == 3
            assert n_out_roots == 1

    def test_widening_with_drive(self):
        cfg = make_config()
        n_in_c = critical_point(cfg).n_in_c
        r1 = bistable_region(cfg, 3.0 * n_in_c)
        r2 = bistable_region(cfg, 10.0 * n_in_c)
        assert r2.delta_upper - r2.delta_lower > r1.delta_upper - r1.delta_lower
        assert r2.delta_lower < r1.delta_lower

    def test_undriven_has_no_region(self):
        assert not bistable_region(make_config(), 0.0).exists


class TestResponseCurve:
    def test_linear_cavity_curve(self):
        cfg = make_config(kerr_hz=0.0, kappa_int_hz=0.5e6, kappa_ext_hz=1.0e6)
        grid = np.linspace(-5, 5, 201) * cfg.kappa_tot
        rows = response_curve(cfg, 1e5, grid)
        assert all(len(sols) == 1 for _, sols in rows)
        phases = np.array([phase_deg(sols[0].s11) for _, sols in rows])
        # phase sweeps monotonically through resonance (crossing +-180)
        unwrapped = np.unwrap(phases, period=360.0)
        assert np.all(np.diff(unwrapped) > 0) or np.all(np.diff(unwrapped) < 0)

    def test_three_branch_window_matches_region(self):
        cfg = make_config()
        n_in = 4.0 * critical_point(cfg).n_in_c
        region = bistable_region(cfg, n_in)
        grid = np.linspace(region.delta_lower - 3 * cfg.kappa_tot,
                           region.delta_upper + 3 * cfg.kappa_tot, 801)
        rows = response_curve(cfg, n_in, grid)
        for delta, sols in rows:
            inside = region.delta_lower + 1e-3 * cfg.kappa_tot < delta < \
                region.delta_upper - 1e-3 * cfg.kappa_tot
            if inside:
                assert len(sols) == 3
            elif not (region.delta_lower - 1e-2 * cfg.kappa_tot <= delta
                      <= region.delta_upper + 1e-2 * cfg.kappa_tot):
                assert len(sols) == 1

    def test_softening_shift_vs_fixed_point(self):
        cfg = make_config()
        n_in = 0.05 * critical_point(cfg).n_in_c
        grid = np.linspace(-2, 2, 40001) * cfg.kappa_tot
        rows = response_curve(cfg, n_in, grid)
        ns = np.array([max(s.n for s in sols) for _, sols in rows])
        delta_peak = grid[np.argmax(ns)]
        # fixed-point iteration on Delta = K * n_peak(Delta)
        delta_fp = 0.0
        for _ in range(200):
            drive = Drive.at_detuning(cfg, delta_fp, n_in)
            n_pk = max(s.n for s in photon_number_roots(cfg, drive))
            delta_fp = cfg.kerr * n_pk
        assert abs(delta_peak - delta_fp) < 1e-3 * cfg.kappa_tot + (grid[1] - grid[0])

    def test_grid_validation(self):
        cfg = make_config()
        with pytest.raises(Exception):
            response_curve(cfg, 1e5, np.array([]))
        with pytest.raises(Exception):
            response_curve(cfg, 1e5, np.array([1.0, -1.0]))
