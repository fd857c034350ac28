"""Time-domain semiclassical dynamics in the drive rotating frame.

Integrates
    d(alpha) = {[i(Delta(t) - K|alpha|^2) - kappa_tot/2] alpha
                + sqrt(kappa_ext) alpha_in(t)} dt
               + sqrt(kappa_tot * n_eff / 2) (dW_x + i dW_y)
with exponential Euler-Maruyama when noise is enabled (additive noise,
strong order 1; the stiff rotation factor is integrated exactly) and
classical fourth-order Runge-Kutta when it is not.  Monte Carlo
repetitions own counter-based RNG streams keyed by (master seed, repetition),
so ensembles are order-independent and reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.constants import hbar as HBAR

from .model import (
    CavityConfig,
    Drive,
    InvalidArgumentError,
    NumericalError,
    dbm_to_photon_flux,
    watts_to_dbm,
)

# Steps per RNG/noise block; fixed so stream consumption (and therefore every
# trajectory) is independent of how callers batch or observe the integration.
NOISE_CHUNK = 4096

# Hard stability bound on the step; default is 5x finer.
DT_STABILITY_FACTOR = 0.05
DEFAULT_DT_FACTOR = 0.01


class MonostableDriveError(ValueError):
    """Dwell statistics need a bistable drive."""


@dataclass(frozen=True)
class Segment:
    """One envelope piece: a hold or a linear ramp of detuning/amplitude."""

    kind: str  # "hold" | "linear-ramp"
    duration: float
    detuning_start: float
    detuning_end: float
    flux_amp_start: float
    flux_amp_end: float

    def __post_init__(self):
        if self.kind not in ("hold", "linear-ramp"):
            raise InvalidArgumentError(f"unknown segment kind {self.kind!r}")
        if not self.duration > 0:
            raise InvalidArgumentError("segment durations must be > 0")
        if self.kind == "hold" and (
                self.detuning_start != self.detuning_end
                or self.flux_amp_start != self.flux_amp_end):
            raise InvalidArgumentError("hold segments must be constant")


def hold(duration: float, detuning: float, flux_amp: float) -> Segment:
    return Segment("hold", duration, detuning, detuning, flux_amp, flux_amp)


def ramp(duration: float, detuning_start: float, detuning_end: float,
         flux_amp_start: float, flux_amp_end: float) -> Segment:
    return Segment("linear-ramp", duration, detuning_start, detuning_end,
                   flux_amp_start, flux_amp_end)


@dataclass(frozen=True)
class DriveEnvelope:
    """Piecewise drive program: detuning and input-field amplitude vs time.

    Amplitudes are in sqrt(photons/s).  Segments must join continuously
    unless ``allow_jumps`` is set (used for latched readout plumbing).
    """

    segments: tuple[Segment, ...]
    allow_jumps: bool = False

    def __init__(self, segments: Sequence[Segment], allow_jumps: bool = False):
        object.__setattr__(self, "segments", tuple(segments))
        object.__setattr__(self, "allow_jumps", bool(allow_jumps))
        if not self.segments:
            raise InvalidArgumentError("envelope needs at least one segment")
        if not self.allow_jumps:
            for a, b in zip(self.segments, self.segments[1:]):
                for pa, pb in ((a.detuning_end, b.detuning_start),
                               (a.flux_amp_end, b.flux_amp_start)):
                    if abs(pa - pb) > 1e-9 * max(1.0, abs(pa), abs(pb)):
                        raise InvalidArgumentError(
                            "discontinuous envelope; pass allow_jumps=True "
                            "if intended")

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def sample(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(detuning, flux amplitude) at times t; clamped outside [0, T]."""
        t = np.asarray(t, dtype=float)
        durations = np.array([s.duration for s in self.segments])
        ends = np.cumsum(durations)
        starts = ends - durations
        idx = np.minimum(np.searchsorted(ends, t, side="right"),
                         len(self.segments) - 1)
        frac = np.clip((t - starts[idx]) / durations[idx], 0.0, 1.0)
        d0 = np.array([s.detuning_start for s in self.segments])[idx]
        d1 = np.array([s.detuning_end for s in self.segments])[idx]
        a0 = np.array([s.flux_amp_start for s in self.segments])[idx]
        a1 = np.array([s.flux_amp_end for s in self.segments])[idx]
        return d0 + frac * (d1 - d0), a0 + frac * (a1 - a0)


@dataclass(frozen=True)
class NoiseModel:
    """Additive white-noise intensity: per-quadrature input occupation.

    One calibratable parameter lumps the device's unresolved fluctuation
    sources; n_eff = 0.5 is the vacuum floor.
    """

    n_eff: float
    enabled: bool = True

    def __post_init__(self):
        if self.enabled and self.n_eff < 0.5:
            raise InvalidArgumentError(
                "enabled noise requires n_eff >= 0.5 (vacuum floor)")
        if self.n_eff < 0:
            raise InvalidArgumentError("n_eff must be >= 0")

    @classmethod
    def off(cls) -> "NoiseModel":
        return cls(n_eff=0.0, enabled=False)


@dataclass(frozen=True)
class Trajectory:
    """Integrated intracavity amplitude on a uniform time grid."""

    dt: float
    times: np.ndarray
    alpha: np.ndarray
    envelope: DriveEnvelope
    seed: int | None


def rng_stream(master_seed: int, *spawn_key: int) -> np.random.Generator:
    """Counter-based stream for (master seed, repetition...) keys."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


def default_dt(config: CavityConfig) -> float:
    return DEFAULT_DT_FACTOR / config.kappa_tot


def _check_dt(config: CavityConfig, dt: float) -> None:
    if not dt > 0:
        raise InvalidArgumentError("dt must be > 0")
    if dt > DT_STABILITY_FACTOR / config.kappa_tot:
        raise InvalidArgumentError(
            f"dt = {dt:.3e} s exceeds the stability bound "
            f"{DT_STABILITY_FACTOR / config.kappa_tot:.3e} s "
            "(0.05 / kappa_tot)")


def _integrate_core(
    config: CavityConfig,
    envelope: DriveEnvelope,
    noise: NoiseModel,
    dt: float,
    streams: Sequence[np.random.Generator] | None,
    alpha0: np.ndarray,
    observer: Callable[[int, np.ndarray], None] | None = None,
    store: bool = True,
) -> np.ndarray | None:
    """Batched integration; rows follow `streams`/`alpha0`.

    The observer receives (start_index, block) slabs covering states at
    every grid index 0..n_steps exactly once.  Euler-Maruyama draws two
    standard normals per step per repetition, in fixed NOISE_CHUNK blocks.
    """
    _check_dt(config, dt)
    n_steps = int(np.ceil(envelope.total_duration / dt - 1e-12))
    a = np.array(alpha0, dtype=np.complex128).reshape(-1).copy()
    n_rep = a.size

    t_grid = np.arange(n_steps + 1) * dt
    delta_full, amp_full = envelope.sample(t_grid)
    noisy = noise.enabled and noise.n_eff > 0
    if not noisy:
        delta_half, amp_half = envelope.sample(t_grid[:-1] + 0.5 * dt)
    if noisy and (streams is None or len(streams) != n_rep):
        raise InvalidArgumentError("one RNG stream per repetition required")

    k = config.kerr
    half_kappa = 0.5 * config.kappa_tot
    sqrt_ke = np.sqrt(config.kappa_ext)
    s_noise = np.sqrt(0.5 * config.kappa_tot * noise.n_eff * dt)

    out = np.empty((n_rep, n_steps + 1), dtype=np.complex128) if store else None
    if store:
        out[:, 0] = a

    def drift(alpha, delta, amp):
        return (1j * (delta - k * (alpha.real**2 + alpha.imag**2))
                - half_kappa) * alpha + sqrt_ke * amp

    for k0 in range(0, max(n_steps, 1), NOISE_CHUNK):
        m = min(NOISE_CHUNK, n_steps - k0)
        if noisy and m > 0:
            xi = np.empty((n_rep, m), dtype=np.complex128)
            for r, stream in enumerate(streams):
                z = stream.standard_normal(2 * m)
                xi[r] = z[0::2] + 1j * z[1::2]
        # block[:, j] = state at grid index block_lo + j; the first block
        # additionally carries the initial state so observers see every index
        lead = 1 if k0 == 0 else 0
        block = np.empty((n_rep, m + lead), dtype=np.complex128)
        if lead:
            block[:, 0] = a
        for j in range(m):
            idx = k0 + j
            if noisy:
                # exponential Euler-Maruyama: the rotation/damping factor is
                # integrated exactly, so noise excursions to large |alpha|
                # (fast Kerr rotation) cannot destabilize the step
                z = (1j * (delta_full[idx]
                           - k * (a.real**2 + a.imag**2)) - half_kappa) * dt
                ez = np.exp(z)
                a = (ez * a + dt * ((ez - 1.0) / z) * (sqrt_ke * amp_full[idx])
                     + s_noise * xi[:, j])
            else:
                k1 = drift(a, delta_full[idx], amp_full[idx])
                k2 = drift(a + 0.5 * dt * k1, delta_half[idx], amp_half[idx])
                k3 = drift(a + 0.5 * dt * k2, delta_half[idx], amp_half[idx])
                k4 = drift(a + dt * k3, delta_full[idx + 1], amp_full[idx + 1])
                a = a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if store:
                out[:, idx + 1] = a
            block[:, lead + j] = a
        if not np.isfinite(a).all():
            bad_cols = np.where(~np.isfinite(block))[1]
            bad_idx = (k0 - lead + 1) + int(bad_cols.min())
            raise NumericalError(
                f"non-finite amplitude at step {max(bad_idx, 0)}; "
                "reduce dt or the drive")
        if observer is not None:
            observer(k0 + (0 if lead else 1), block)
        if n_steps == 0:
            break

    return out


def integrate(config: CavityConfig, envelope: DriveEnvelope, noise: NoiseModel,
              dt: float, seed: int | None = None,
              alpha0: complex = 0j) -> Trajectory:
    """Single trajectory; bit-identical for identical (seed, dt, inputs)."""
    streams = [rng_stream(0 if seed is None else seed)] if noise.enabled else None
    alphas = _integrate_core(config, envelope, noise, dt, streams,
                             np.array([alpha0]), store=True)
    n_steps = alphas.shape[1] - 1
    return Trajectory(
        dt=dt,
        times=np.arange(n_steps + 1) * dt,
        alpha=alphas[0],
        envelope=envelope,
        seed=seed,
    )


@dataclass(frozen=True)
class DwellStats:
    """Mean metastable lifetimes from a branch-classified trajectory."""

    mean_lifetime_high: float
    mean_lifetime_low: float
    switch_count: int
    censored_high: bool
    censored_low: bool


def dwell_times(trajectory: Trajectory, config: CavityConfig,
                drive: Drive) -> DwellStats:
    """Classify samples by nearest stable branch and time the dwells.

    Uses a hysteretic dead-band of +-20% of the branch separation around the
    midpoint so in-band chatter never counts as a switch.  Lifetimes come
    from completed dwells; a state with none is reported from its censored
    total occupation and flagged.
    """
    from .steady_state import photon_number_roots

    sols = photon_number_roots(config, drive)
    if len(sols) != 3:
        raise MonostableDriveError(
            "dwell statistics need a bistable drive (3 steady-state roots)")
    n_low, n_high = sols[0].n, sols[2].n
    mid = 0.5 * (n_low + n_high)
    band = 0.2 * (n_high - n_low)

    n_t = np.abs(trajectory.alpha) ** 2
    decided = np.where(n_t > mid + band, 1, np.where(n_t < mid - band, -1, 0))
    decided[0] = 1 if n_t[0] >= mid else -1
    # forward-fill the in-band samples with the last decided state
    idx = np.arange(len(decided))
    filled = idx.copy()
    filled[decided == 0] = 0
    filled = np.maximum.accumulate(filled)
    state = decided[filled]

    change = np.where(np.diff(state) != 0)[0]
    switch_count = len(change)
    dt = trajectory.dt

    seg_bounds = np.concatenate([[0], change + 1, [len(state)]])
    seg_states = state[seg_bounds[:-1]]
    seg_lengths = np.diff(seg_bounds) * dt

    result = {}
    censored = {}
    for s, name in ((1, "high"), (-1, "low")):
        mask = seg_states == s
        if not mask.any():
            result[name] = float("nan")
            censored[name] = True
            continue
        complete = mask.copy()
        complete[0] = False   # first dwell: entry unobserved
        complete[-1] = False  # last dwell: exit unobserved
        if complete.any():
            result[name] = float(seg_lengths[complete].mean())
            censored[name] = False
        else:
            result[name] = float(seg_lengths[mask].sum())
            censored[name] = True
    return DwellStats(
        mean_lifetime_high=result["high"],
        mean_lifetime_low=result["low"],
        switch_count=switch_count,
        censored_high=censored["high"],
        censored_low=censored["low"],
    )


@dataclass(frozen=True)
class HysteresisResult:
    """Phase vs drive power for the forward and reverse amplitude ramps."""

    p_dbm: np.ndarray
    phase_fwd_deg: np.ndarray
    phase_rev_deg: np.ndarray
    loop_area_deg_dbm: float
    t_ramp: float
    repetitions: int


def hysteresis_ramp(config: CavityConfig, delta: float, p_min: float,
                    p_max: float, t_ramp: float, repetitions: int,
                    noise: NoiseModel, t_acq_per_point: float,
                    seed: int = 0, dt: float | None = None) -> HysteresisResult:
    """Triangular drive-amplitude ramp at fixed detuning, up then down.

    Phases are circular means over repetitions within power bins of width
    t_acq_per_point; the loop area integrates |forward - reverse| phase over
    the dBm axis.  Without noise the dynamics are deterministic, so a single
    repetition represents the ensemble.
    """
    if p_min >= p_max:
        raise InvalidArgumentError("p_min must be < p_max")
    if repetitions < 1:
        raise InvalidArgumentError("repetitions must be >= 1")
    dt = default_dt(config) if dt is None else dt
    omega_d = config.omega0 + delta
    amp_min = np.sqrt(dbm_to_photon_flux(p_min, omega_d))
    amp_max = np.sqrt(dbm_to_photon_flux(p_max, omega_d))
    envelope = DriveEnvelope([
        ramp(t_ramp, delta, delta, amp_min, amp_max),
        ramp(t_ramp, delta, delta, amp_max, amp_min),
    ])
    n_points = max(int(round(t_ramp / t_acq_per_point)), 2)
    reps = repetitions if noise.enabled else 1
    streams = [rng_stream(seed, r) for r in range(reps)] if noise.enabled else None

    n_steps = int(np.ceil(envelope.total_duration / dt - 1e-12))
    t_grid = np.arange(n_steps + 1) * dt
    _, amp_grid = envelope.sample(t_grid)
    # map each sample to (direction, power bin); reverse bins share the
    # forward power axis
    fwd = t_grid < t_ramp
    bin_idx = np.empty(n_steps + 1, dtype=int)
    bin_idx[fwd] = np.minimum((t_grid[fwd] / t_acq_per_point).astype(int),
                              n_points - 1)
    rev_t = t_grid[~fwd] - t_ramp
    bin_idx[~fwd] = n_points - 1 - np.minimum(
        (rev_t / t_acq_per_point).astype(int), n_points - 1)

    sqrt_ke = np.sqrt(config.kappa_ext)
    acc = np.zeros((2, n_points), dtype=np.complex128)

    def observer(start: int, block: np.ndarray) -> None:
        sl = slice(start, start + block.shape[1])
        ain = amp_grid[sl]
        beta = ain - sqrt_ke * block
        phasor = np.conj(beta) * ain
        mag = np.abs(phasor)
        np.divide(phasor, mag, out=phasor, where=mag > 0)
        direction = (~fwd[sl]).astype(int)
        flat_bins = direction * n_points + bin_idx[sl]
        acc_flat = np.zeros(2 * n_points, dtype=np.complex128)
        np.add.at(acc_flat, np.broadcast_to(flat_bins, phasor.shape), phasor)
        acc.flat += acc_flat

    _integrate_core(config, envelope, noise, dt, streams,
                    np.zeros(reps, dtype=complex), observer=observer,
                    store=False)

    phase_fwd = np.degrees(np.angle(acc[0]))
    phase_rev = np.degrees(np.angle(acc[1]))
    amp_centers = amp_min + (amp_max - amp_min) * (np.arange(n_points) + 0.5) / n_points
    p_dbm = watts_to_dbm(amp_centers**2 * HBAR * omega_d)
    gap = np.abs((phase_fwd - phase_rev + 180.0) % 360.0 - 180.0)
    loop_area = float(np.trapezoid(gap, p_dbm))
    return HysteresisResult(
        p_dbm=p_dbm,
        phase_fwd_deg=phase_fwd,
        phase_rev_deg=phase_rev,
        loop_area_deg_dbm=loop_area,
        t_ramp=t_ramp,
        repetitions=reps,
    )
