"""The charge-sensing experiment: initialize, stabilize, acquire, repeat.

A shot chirps the drive from the blue monostable side onto a target
detuning, waits out transients, then averages the reflected phase for
t_acq.  Ensembles of shots per detuning build phase histograms, S-curves,
and two-bias comparisons (contrast, optimal drive frequency, fidelity).
Repetition r at detuning index d draws from the RNG stream keyed
(master seed, ..., d, r), so any execution order or batching reproduces
the same histograms.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .measurement import (
    AmplifierChain,
    FidelityReport,
    PhaseHistogram,
    SCurve,
    SigmoidFit,
    contrast,
    extract_p_high,
    fidelity,
    fit_double_gaussian,
    fit_sigmoid,
    IllConditionedFitError,
)
from .model import CavityConfig, Drive, InvalidArgumentError, dbm_to_photon_flux
from .steady_state import critical_point, phase_deg, photon_number_roots

TWO_PI = 2.0 * np.pi

# Monte Carlo batch width for the vectorized integrator.
BATCH_SIZE = 256


@dataclass(frozen=True)
class SenseProtocol:
    """Pulse timing of the sensing protocol.

    delta_start = final detuning - f_ramp unless given explicitly; a
    non-zero f_latch shifts the acquisition drive to latch the attained
    branch (the reference experiment runs f_latch = 0).
    """

    f_ramp: float = -TWO_PI * 41e6
    t_r: float = 530e-9
    t_stab: float = 4.9e-6
    f_latch: float = 0.0
    t_acq: float = 3e-6
    t_down: float = 5e-6
    n_tot: int = 20000
    delta_start: float | None = None

    def __post_init__(self):
        if min(self.t_r, self.t_stab, self.t_acq) <= 0:
            raise InvalidArgumentError("t_r, t_stab, t_acq must be > 0")
        if self.n_tot < 1:
            raise InvalidArgumentError("n_tot must be >= 1")

    @property
    def pulse_duration(self) -> float:
        return self.t_r + self.t_stab + self.t_acq

    def envelope(self, final_detuning: float, flux_amp: float) -> dyn.DriveEnvelope:
        start = (final_detuning - self.f_ramp if self.delta_start is None
                 else self.delta_start)
        segments = [
            dyn.ramp(self.t_r, start, final_detuning, flux_amp, flux_amp),
            dyn.hold(self.t_stab, final_detuning, flux_amp),
            dyn.hold(self.t_acq, final_detuning + self.f_latch, flux_amp),
        ]
        return dyn.DriveEnvelope(segments, allow_jumps=self.f_latch != 0.0)


def _warn_if_below_critical(config: CavityConfig, n_in: float) -> None:
    if config.kerr == 0.0 or n_in < critical_point(config).n_in_c:
        warnings.warn(
            "drive below the critical power: the response is monostable and "
            "the S-curve loses its latched meaning", stacklevel=3)


def _acquire_phases(config: CavityConfig, n_in: float, final_detuning: float,
                    proto: SenseProtocol, noise: dyn.NoiseModel,
                    chain: AmplifierChain, master_seed: int,
                    key: tuple[int, ...], n_shots: int,
                    t_acq_list: tuple[float, ...] | None = None,
                    dt: float | None = None) -> np.ndarray:
    """Averaged acquisition phase per shot, shape (n_shots, len(t_acq_list)).

    Shot r uses the stream keyed (master_seed, *key, r) for its trajectory
    noise first and its amplifier noise second.
    """
    t_acqs = (proto.t_acq,) if t_acq_list is None else tuple(t_acq_list)
    run_proto = proto if max(t_acqs) == proto.t_acq else \
        SenseProtocol(f_ramp=proto.f_ramp, t_r=proto.t_r, t_stab=proto.t_stab,
                      f_latch=proto.f_latch, t_acq=max(t_acqs),
                      t_down=proto.t_down, n_tot=proto.n_tot,
                      delta_start=proto.delta_start)
    amp = np.sqrt(n_in)
    envelope = run_proto.envelope(final_detuning, amp)
    dt = dyn.default_dt(config) if dt is None else dt

    t_init = proto.t_r + proto.t_stab
    i0 = int(np.ceil(t_init / dt - 1e-9))
    n_steps = int(np.ceil(envelope.total_duration / dt - 1e-12))
    i1 = n_steps + 1
    window = np.arange(i0, i1)
    t_window = window * dt
    _, ain_window = envelope.sample(t_window)
    sqrt_ke = np.sqrt(config.kappa_ext)

    # demodulator resampling (block means) when the chain is slower than dt
    stride = 1
    period = dt
    if chain.sample_period is not None and chain.sample_period > dt:
        stride = max(int(round(chain.sample_period / dt)), 1)
        period = stride * dt
    n_samp = len(window) // stride
    if n_samp == 0:
        raise InvalidArgumentError("acquisition window shorter than one sample")
    # sample counts per requested t_acq (acquisition starts at t_init)
    cuts = [min(max(int(round(t / period)), 1), n_samp) for t in t_acqs]

    sigma = (np.sqrt(chain.added_noise_density / (2.0 * period))
             if chain.added_noise_density > 0 else 0.0)
    out = np.empty((n_shots, len(t_acqs)))

    for b0 in range(0, n_shots, BATCH_SIZE):
        nb = min(BATCH_SIZE, n_shots - b0)
        streams = [dyn.rng_stream(master_seed, *key, b0 + r) for r in range(nb)]
        collected = np.empty((nb, len(window)), dtype=np.complex128)

        def observer(start: int, block: np.ndarray) -> None:
            lo = max(start, i0)
            hi = min(start + block.shape[1], i1)
            if lo < hi:
                collected[:, lo - i0:hi - i0] = block[:, lo - start:hi - start]

        dyn._integrate_core(config, envelope, noise, dt,
                            streams if noise.enabled else None,
                            np.zeros(nb, dtype=complex), observer=observer,
                            store=False)
        beta = ain_window - sqrt_ke * collected
        ain = ain_window
        if stride > 1:
            usable = n_samp * stride
            beta = beta[:, :usable].reshape(nb, n_samp, stride).mean(axis=2)
            ain = ain_window[:usable].reshape(n_samp, stride).mean(axis=1)
        if sigma > 0.0:
            for r, stream in enumerate(streams):
                z = stream.standard_normal(2 * n_samp)
                beta[r] += sigma * (z[0::2] + 1j * z[1::2])
        phasors = np.conj(beta) * ain
        mags = np.abs(phasors)
        np.divide(phasors, mags, out=phasors, where=mags > 0)
        sums = np.cumsum(phasors, axis=1)
        for j, cut in enumerate(cuts):
            out[b0:b0 + nb, j] = np.degrees(np.angle(sums[:, cut - 1]))
    return out


def sense_once(config: CavityConfig, drive_power_dbm: float,
               final_detuning: float, proto: SenseProtocol,
               noise: dyn.NoiseModel, chain: AmplifierChain,
               seed: int = 0) -> float:
    """One initialization-stabilization-acquisition shot's averaged phase."""
    omega_d = config.omega0 + final_detuning
    n_in = dbm_to_photon_flux(drive_power_dbm, omega_d)
    _warn_if_below_critical(config, n_in)
    phases = _acquire_phases(config, n_in, final_detuning, proto, noise,
                             chain, seed, (), 1)
    return float(phases[0, 0])


def _branch_phase_refs(config: CavityConfig, n_in: float,
                       detuning: float) -> tuple[float, float]:
    """High/low-branch reference phases for state assignment at one detuning.

    Inside the bistable window both branch phases come from the roots
    there.  In a monostable regime the surviving root keeps its
    branch-continuation label (the blue side continues the high branch,
    the far red side the low branch) and the missing branch's reference is
    taken just inside the nearest window edge.
    """
    from .steady_state import bistable_region

    sols = photon_number_roots(config, Drive.at_detuning(config, detuning, n_in))
    stable = [s for s in sols if s.stable]
    if len(stable) >= 2:
        high = max(stable, key=lambda s: s.n)
        low = min(stable, key=lambda s: s.n)
        return phase_deg(high.s11), phase_deg(low.s11)

    sol = stable[0]
    region = bistable_region(config, n_in)
    if not region.exists:
        phase = phase_deg(sol.s11)
        return phase, phase
    inset = 0.02 * (region.delta_upper - region.delta_lower)
    clamped = float(np.clip(detuning, region.delta_lower + inset,
                            region.delta_upper - inset))
    inner = [s for s in photon_number_roots(
        config, Drive.at_detuning(config, clamped, n_in)) if s.stable]
    if sol.branch_label == "high":
        low = min(inner, key=lambda s: s.n)
        return phase_deg(sol.s11), phase_deg(low.s11)
    high = max(inner, key=lambda s: s.n)
    return phase_deg(high.s11), phase_deg(sol.s11)


def _p_high_from_histogram(hist: PhaseHistogram, ref_high: float,
                           ref_low: float) -> float:
    """High-state weight: double-Gaussian area ratio, assigned by branch.

    Ensembles too small to fit (n_tot < 100) fall back to thresholding the
    counts at the circular midpoint between the branch references.
    """
    if hist.n_tot >= 100:
        return extract_p_high(fit_double_gaussian(hist),
                              phase_high_ref=ref_high, phase_low_ref=ref_low)
    from .measurement import wrap_phase_deg

    centers = hist.bin_centers
    d_high = np.abs(wrap_phase_deg(centers - ref_high))
    d_low = np.abs(wrap_phase_deg(centers - ref_low))
    return float(hist.counts[d_high <= d_low].sum() / max(hist.n_tot, 1))


@dataclass(frozen=True)
class SCurveRun:
    """S-curve with per-detuning histograms and assignment references."""

    scurve: SCurve
    histograms: tuple[PhaseHistogram, ...]
    phase_high_ref: float
    phase_low_ref: float
    master_seed: int


def _detuning_histogram(args) -> PhaseHistogram:
    (config, n_in, delta, proto, noise, chain, seed, key, n_shots, dt) = args
    phases = _acquire_phases(config, n_in, delta, proto, noise, chain,
                             seed, key, n_shots, dt=dt)
    return PhaseHistogram.from_phases(phases[:, 0])


def s_curve(config: CavityConfig, drive_power_dbm: float,
            detuning_grid: np.ndarray, proto: SenseProtocol,
            noise: dyn.NoiseModel, chain: AmplifierChain,
            master_seed: int = 0, threads: int = 1,
            key_prefix: tuple[int, ...] = (),
            dt: float | None = None) -> SCurveRun:
    """High-state probability vs final detuning with a sigmoid fit.

    Each detuning runs proto.n_tot shots; p_high is the double-Gaussian
    weight assigned to the high branch.  Seeds derive from
    (master_seed, *key_prefix, detuning index, repetition).
    """
    detuning_grid = np.asarray(detuning_grid, dtype=float)
    if np.any(np.diff(detuning_grid) <= 0):
        raise InvalidArgumentError("detuning grid must be sorted ascending")
    omega_ref = config.omega0 + float(np.median(detuning_grid))
    n_in = dbm_to_photon_flux(drive_power_dbm, omega_ref)
    _warn_if_below_critical(config, n_in)

    jobs = [(config, n_in, float(delta), proto, noise, chain, master_seed,
             key_prefix + (d,), proto.n_tot, dt)
            for d, delta in enumerate(detuning_grid)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            hists = list(pool.map(_detuning_histogram, jobs))
    else:
        hists = [_detuning_histogram(j) for j in jobs]

    refs = [_branch_phase_refs(config, n_in, float(delta))
            for delta in detuning_grid]
    p_high = np.array([
        _p_high_from_histogram(h, rh, rl)
        for h, (rh, rl) in zip(hists, refs)
    ])
    ref_high, ref_low = refs[len(refs) // 2]
    try:
        fit = fit_sigmoid(detuning_grid, p_high)
    except IllConditionedFitError as err:
        warnings.warn(f"sigmoid fit unavailable: {err}", stacklevel=2)
        fit = None
    return SCurveRun(
        scurve=SCurve(detunings=detuning_grid, p_high=p_high, fit=fit),
        histograms=tuple(hists),
        phase_high_ref=float(ref_high),
        phase_low_ref=float(ref_low),
        master_seed=master_seed,
    )


def high_branch_occupancy(config: CavityConfig, drive_power_dbm: float,
                          detuning: float) -> float:
    """Highest stable steady-state photon number at this drive."""
    omega_d = config.omega0 + detuning
    n_in = dbm_to_photon_flux(drive_power_dbm, omega_d)
    sols = photon_number_roots(config, Drive.at_detuning(config, detuning, n_in))
    return max(s.n for s in sols if s.stable)


@dataclass(frozen=True)
class CompareResult:
    """Two-bias discrimination summary at the contrast-optimal drive."""

    omega_grid: np.ndarray
    scurve_a: SCurve
    scurve_b: SCurve
    contrast: float
    omega_opt: float
    hist_a: PhaseHistogram
    hist_b: PhaseHistogram
    fidelity: FidelityReport
    n_high_a: float
    n_high_b: float
    fidelity_vs_t_acq: tuple[tuple[float, FidelityReport], ...]
    low_distinguishability: bool
    master_seed: int


def _optimal_omega(omega_grid: np.ndarray, diff: np.ndarray,
                   p_a: np.ndarray, n_tot: int) -> float:
    """Deterministic optimum among statistically tied contrast maxima.

    Saturated S-curves leave a plateau of near-equal contrast (within
    binomial noise); take the plateau end toward the rising edge of the
    lower-frequency curve, which maximizes the latched photon-number
    separation between the two biases.
    """
    tol = min(max(4.0 * np.sqrt(0.5 / n_tot), 1e-3), 0.04)
    (candidates,) = np.where(diff >= diff.max() - tol)
    rising = np.polyfit(omega_grid, p_a, 1)[0] >= 0
    pick = candidates[0] if rising else candidates[-1]
    return float(omega_grid[pick])


def compare_bias(config_a: CavityConfig, config_b: CavityConfig,
                 drive_power_dbm: float, omega_grid: np.ndarray,
                 proto: SenseProtocol, noise: dyn.NoiseModel,
                 chain: AmplifierChain, master_seed: int = 0,
                 threads: int = 1,
                 t_acq_sweep: tuple[float, ...] | None = None,
                 dt: float | None = None) -> CompareResult:
    """Compare two bias configs on an absolute drive-frequency grid.

    Builds both S-curves, finds the max-contrast frequency, reruns n_tot
    single shots per bias there, and reports histograms and fidelity.
    Contrast below 0.5 flags low distinguishability (not an error).
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    runs = []
    for bias_idx, config in enumerate((config_a, config_b)):
        run = s_curve(config, drive_power_dbm, omega_grid - config.omega0,
                      proto, noise, chain, master_seed, threads,
                      key_prefix=(bias_idx,), dt=dt)
        runs.append(run)
    run_a, run_b = runs
    curve_a = SCurve(detunings=omega_grid, p_high=run_a.scurve.p_high,
                     fit=run_a.scurve.fit)
    curve_b = SCurve(detunings=omega_grid, p_high=run_b.scurve.p_high,
                     fit=run_b.scurve.fit)
    diff = np.abs(curve_a.p_high - curve_b.p_high)
    max_contrast = float(diff.max())
    omega_opt = _optimal_omega(omega_grid, diff, curve_a.p_high, proto.n_tot)

    sweeps = tuple(t_acq_sweep) if t_acq_sweep else (proto.t_acq,)
    if proto.t_acq not in sweeps:
        sweeps = tuple(sorted(set(sweeps) | {proto.t_acq}))
    hists = {}
    sweep_hists = {t: [] for t in sweeps}
    for bias_idx, config in enumerate((config_a, config_b)):
        n_in = dbm_to_photon_flux(drive_power_dbm, omega_opt)
        phases = _acquire_phases(config, n_in, omega_opt - config.omega0,
                                 proto, noise, chain, master_seed,
                                 (bias_idx, len(omega_grid)), proto.n_tot,
                                 t_acq_list=sweeps, dt=dt)
        for j, t in enumerate(sweeps):
            sweep_hists[t].append(PhaseHistogram.from_phases(phases[:, j]))
        hists[bias_idx] = sweep_hists[proto.t_acq][bias_idx]

    report = fidelity(hists[0], hists[1])
    fid_sweep = tuple(
        (t, fidelity(sweep_hists[t][0], sweep_hists[t][1])) for t in sweeps)
    n_high_a = high_branch_occupancy(config_a, drive_power_dbm,
                                     omega_opt - config_a.omega0)
    n_high_b = high_branch_occupancy(config_b, drive_power_dbm,
                                     omega_opt - config_b.omega0)
    return CompareResult(
        omega_grid=omega_grid,
        scurve_a=curve_a,
        scurve_b=curve_b,
        contrast=max_contrast,
        omega_opt=omega_opt,
        hist_a=hists[0],
        hist_b=hists[1],
        fidelity=report,
        n_high_a=float(n_high_a),
        n_high_b=float(n_high_b),
        fidelity_vs_t_acq=fid_sweep,
        low_distinguishability=bool(max_contrast < 0.5),
        master_seed=master_seed,
    )
