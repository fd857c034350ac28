"""Integrator correctness, determinism, dwell statistics, hysteresis."""

import numpy as np
import pytest

from ccpt_sim import dynamics as dyn
from ccpt_sim.model import CavityConfig, Drive, InvalidArgumentError
from ccpt_sim.steady_state import critical_point, photon_number_roots

TWO_PI = 2 * np.pi


def make_config(kerr_hz=-470e3):
    return CavityConfig(omega0=TWO_PI * 5.8e9, kerr=TWO_PI * kerr_hz,
                        kappa_int=TWO_PI * 0.5e6, kappa_ext=TWO_PI * 1.0e6)


def hold_envelope(config, delta, n_in, duration):
    return dyn.DriveEnvelope(
        [dyn.hold(duration, delta, np.sqrt(n_in))])


class TestEnvelope:
    def test_piecewise_sampling(self):
        env = dyn.DriveEnvelope([
            dyn.ramp(1.0, 0.0, 10.0, 0.0, 2.0),
            dyn.hold(1.0, 10.0, 2.0),
        ])
        t = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
        delta, amp = env.sample(t)
        assert np.allclose(delta, [0.0, 5.0, 10.0, 10.0, 10.0, 10.0])
        assert np.allclose(amp, [0.0, 1.0, 2.0, 2.0, 2.0, 2.0])

    def test_discontinuity_rejected_unless_allowed(self):
        segs = [dyn.hold(1.0, 0.0, 1.0), dyn.hold(1.0, 5.0, 1.0)]
        with pytest.raises(InvalidArgumentError):
            dyn.DriveEnvelope(segs)
        env = dyn.DriveEnvelope(segs, allow_jumps=True)
        assert env.total_duration == 2.0

    def test_zero_duration_rejected(self):
        with pytest.raises(InvalidArgumentError):
            dyn.hold(0.0, 0.0, 1.0)

    def test_hold_must_be_constant(self):
        with pytest.raises(InvalidArgumentError):
            dyn.Segment("hold", 1.0, 0.0, 1.0, 0.0, 0.0)


class TestIntegrate:
    def test_free_decay(self):
        cfg = make_config()
        kap = cfg.kappa_tot
        env = hold_envelope(cfg, 0.0, 0.0, 5.0 / kap)
        traj = dyn.integrate(cfg, env, dyn.NoiseModel.off(),
                             dyn.default_dt(cfg), alpha0=2.0 + 1.0j)
        expected = abs(2.0 + 1.0j) * np.exp(-0.5 * kap * traj.times)
        rel = np.abs(np.abs(traj.alpha) - expected) / expected
        assert rel.max() < 1e-6

    def test_converges_to_monostable_steady_state(self):
        # Kerr softening slows relaxation below kappa/2, so allow 80/kappa
        cfg = make_config()
        kap = cfg.kappa_tot
        n_in = 0.5 * critical_point(cfg).n_in_c
        drive = Drive.at_detuning(cfg, -0.5 * kap, n_in)
        (sol,) = photon_number_roots(cfg, drive)
        env = hold_envelope(cfg, -0.5 * kap, n_in, 80.0 / kap)
        traj = dyn.integrate(cfg, env, dyn.NoiseModel.off(), dyn.default_dt(cfg))
        assert abs(traj.alpha[-1] - sol.alpha) / abs(sol.alpha) < 1e-6

    def test_bistable_basins(self):
        cfg = make_config()
        kap = cfg.kappa_tot
        n_in = 2.0 * critical_point(cfg).n_in_c
        delta = -1.5 * kap
        drive = Drive.at_detuning(cfg, delta, n_in)
        sols = photon_number_roots(cfg, drive)
        env = hold_envelope(cfg, delta, n_in, 60.0 / kap)
        for sol in (sols[0], sols[2]):
            traj = dyn.integrate(cfg, env, dyn.NoiseModel.off(),
                                 dyn.default_dt(cfg), alpha0=1.02 * sol.alpha)
            assert abs(traj.alpha[-1] - sol.alpha) / abs(sol.alpha) < 1e-6

    def test_steady_state_is_conserved(self):
        cfg = make_config()
        kap = cfg.kappa_tot
        n_in = 2.0 * critical_point(cfg).n_in_c
        delta = -1.5 * kap
        sols = photon_number_roots(cfg, Drive.at_detuning(cfg, delta, n_in))
        env = hold_envelope(cfg, delta, n_in, 100.0 / kap)
        traj = dyn.integrate(cfg, env, dyn.NoiseModel.off(),
                             dyn.default_dt(cfg), alpha0=sols[2].alpha)
        dev = np.abs(traj.alpha - sols[2].alpha) / abs(sols[2].alpha)
        assert dev.max() < 1e-8

    def test_halving_dt_order_of_accuracy(self):
        cfg = make_config()
        kap = cfg.kappa_tot
        n_in = 1.5 * critical_point(cfg).n_in_c
        env = hold_envelope(cfg, -2.0 * kap, n_in, 10.0 / kap)
        dt = dyn.default_dt(cfg)
        t1 = dyn.integrate(cfg, env, dyn.NoiseModel.off(), dt)
        t2 = dyn.integrate(cfg, env, dyn.NoiseModel.off(), dt / 2)
        scale = np.abs(t2.alpha[::2]).max()
        diff = np.abs(t1.alpha - t2.alpha[::2]).max() / scale
        assert diff < 1e-6

    def test_bit_identical_reruns_and_seed_independence(self):
        cfg = make_config()
        kap = cfg.kappa_tot
        env = hold_envelope(cfg, -1.0 * kap, 1e6, 5.0 / kap)
        nm = dyn.NoiseModel(2.0)
        dt = dyn.default_dt(cfg)
        a = dyn.integrate(cfg, env, nm, dt, seed=11)
        b = dyn.integrate(cfg, env, nm, dt, seed=11)
        c = dyn.integrate(cfg, env, nm, dt, seed=12)
        assert np.array_equal(a.alpha, b.alpha)
        assert not np.array_equal(a.alpha, c.alpha)

    def test_dt_precondition(self):
        cfg = make_config()
        env = hold_envelope(cfg, 0.0, 0.0, 1e-6)
        with pytest.raises(InvalidArgumentError):
            dyn.integrate(cfg, env, dyn.NoiseModel.off(),
                          0.06 / cfg.kappa_tot)

    def test_trajectory_length(self):
        cfg = make_config()
        dt = dyn.default_dt(cfg)
        env = hold_envelope(cfg, 0.0, 0.0, 1000 * dt)
        traj = dyn.integrate(cfg, env, dyn.NoiseModel.off(), dt)
        assert len(traj.alpha) == 1001
        assert len(traj.times) == 1001

    def test_noise_floor_enforced(self):
        with pytest.raises(InvalidArgumentError):
            dyn.NoiseModel(0.3)
        assert not dyn.NoiseModel.off().enabled


class TestDwellTimes:
    def test_noise_off_no_switches(self):
        cfg = make_config()
        kap = cfg.kappa_tot
        n_in = 2.0 * critical_point(cfg).n_in_c
        delta = -1.5 * kap
        drive = Drive.at_detuning(cfg, delta, n_in)
        sols = photon_number_roots(cfg, drive)
        env = hold_envelope(cfg, delta, n_in, 50.0 / kap)
        traj = dyn.integrate(cfg, env, dyn.NoiseModel.off(),
                             dyn.default_dt(cfg), alpha0=sols[2].alpha)
        stats = dyn.dwell_times(traj, cfg, drive)
        assert stats.switch_count == 0
        assert stats.censored_high
        assert stats.mean_lifetime_high == pytest.approx(
            traj.times[-1], rel=0.01)
        assert np.isnan(stats.mean_lifetime_low)

    def test_synthetic_telegraph_recovery(self):
        cfg = make_config()
        kap = cfg.kappa_tot
        n_in = 2.0 * critical_point(cfg).n_in_c
        delta = -1.5 * kap
        drive = Drive.at_detuning(cfg, delta, n_in)
        sols = photon_number_roots(cfg, drive)
        dt = dyn.default_dt(cfg)
        tau_high, tau_low = 40e-6, 25e-6
        rng = np.random.default_rng(4)
        segments, states = [], []
        state = 1
        total = 0.0
        while total < 120 * (tau_high + tau_low):
            tau = rng.exponential(tau_high if state == 1 else tau_low)
            tau = max(tau, 20 * dt)  # resolvable dwells
            segments.append(tau)
            states.append(state)
            total += tau
            state = -state
        alpha = np.concatenate([
            np.full(max(int(round(tau / dt)), 1),
                    sols[2].alpha if s == 1 else sols[0].alpha)
            for tau, s in zip(segments, states)
        ])
        env = hold_envelope(cfg, delta, n_in, len(alpha) * dt)
        traj = dyn.Trajectory(dt=dt, times=np.arange(len(alpha)) * dt,
                              alpha=alpha, envelope=env, seed=None)
        stats = dyn.dwell_times(traj, cfg, drive)
        # compare against the realized (not nominal) dwell means
        realized_high = np.mean(
            [np.round(t / dt) * dt for t, s in
             list(zip(segments, states))[1:-1] if s == 1])
        realized_low = np.mean(
            [np.round(t / dt) * dt for t, s in
             list(zip(segments, states))[1:-1] if s == -1])
        assert stats.mean_lifetime_high == pytest.approx(realized_high, rel=0.05)
        assert stats.mean_lifetime_low == pytest.approx(realized_low, rel=0.05)
        assert stats.switch_count == len(segments) - 1

    def test_monostable_drive_rejected(self):
        cfg = make_config()
        drive = Drive.at_detuning(cfg, 2.0 * cfg.kappa_tot, 1e5)
        env = hold_envelope(cfg, 2.0 * cfg.kappa_tot, 1e5, 1e-6)
        traj = dyn.integrate(cfg, env, dyn.NoiseModel.off(), dyn.default_dt(cfg))
        with pytest.raises(dyn.MonostableDriveError):
            dyn.dwell_times(traj, cfg, drive)

    def test_switch_count_increases_with_noise(self):
        from ccpt_sim.steady_state import bistable_region

        cfg = make_config()
        kap = cfg.kappa_tot
        n_in = 2.0 * critical_point(cfg).n_in_c
        region = bistable_region(cfg, n_in)
        delta = 0.5 * (region.delta_lower + region.delta_upper)
        drive = Drive.at_detuning(cfg, delta, n_in)
        dt = dyn.default_dt(cfg)
        env = hold_envelope(cfg, delta, n_in, 200.0 / kap)
        totals = {}
        for n_eff in (0.5, 2.0):
            count = 0
            for seed in range(12):
                traj = dyn.integrate(cfg, env, dyn.NoiseModel(n_eff), dt,
                                     seed=seed, alpha0=0j)
                count += dyn.dwell_times(traj, cfg, drive).switch_count
            totals[n_eff] = count
        assert totals[2.0] > totals[0.5]


class TestHysteresis:
    def test_deterministic_loop_and_jump_powers(self):
        # fast ramp, no noise: forward stays low past the upward edge,
        # reverse stays high below it
        cfg = make_config()
        delta = -TWO_PI * 9.5e6
        res = dyn.hysteresis_ramp(cfg, delta, -140.0, -109.0, t_ramp=20e-6,
                                  repetitions=1, noise=dyn.NoiseModel.off(),
                                  t_acq_per_point=20e-6 / 96, seed=0)
        gap = np.abs((res.phase_fwd_deg - res.phase_rev_deg + 180) % 360 - 180)
        assert res.loop_area_deg_dbm > 0
        assert gap.max() > 30.0
        # jump powers bracket the bistable window edges in drive flux
        from ccpt_sim.model import dbm_to_photon_flux
        from ccpt_sim.steady_state import bistable_region
        omega_d = cfg.omega0 + delta
        fwd_jump = res.p_dbm[np.argmax(np.abs(np.diff(res.phase_fwd_deg))) + 1]
        rev_jump = res.p_dbm[np.argmax(np.abs(np.diff(res.phase_rev_deg)))]

        def inside(p_dbm):
            region = bistable_region(cfg, dbm_to_photon_flux(p_dbm, omega_d))
            return region.exists and region.delta_lower < delta < region.delta_upper

        # crossing each jump power toggles bistability at this detuning
        assert inside(fwd_jump - 1.0) and not inside(fwd_jump + 1.0)
        assert inside(rev_jump + 1.0) and not inside(rev_jump - 1.0)

    def test_noise_off_reps_collapse(self):
        cfg = make_config()
        delta = -TWO_PI * 9.5e6
        kwargs = dict(t_ramp=8e-6, t_acq_per_point=8e-6 / 32, seed=3)
        a = dyn.hysteresis_ramp(cfg, delta, -140.0, -109.0, repetitions=1,
                                noise=dyn.NoiseModel.off(), **kwargs)
        b = dyn.hysteresis_ramp(cfg, delta, -140.0, -109.0, repetitions=50,
                                noise=dyn.NoiseModel.off(), **kwargs)
        assert np.array_equal(a.phase_fwd_deg, b.phase_fwd_deg)
        assert b.repetitions == 1

    def test_validation(self):
        cfg = make_config()
        with pytest.raises(InvalidArgumentError):
            dyn.hysteresis_ramp(cfg, 0.0, -100.0, -120.0, 1e-6, 1,
                                dyn.NoiseModel.off(), 1e-7)
        with pytest.raises(InvalidArgumentError):
            dyn.hysteresis_ramp(cfg, 0.0, -140.0, -120.0, 1e-6, 0,
                                dyn.NoiseModel.off(), 1e-7)
