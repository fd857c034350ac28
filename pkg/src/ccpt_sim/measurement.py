"""Heterodyne emulation and statistical analysis of phase records.

Covers the output-field demodulation with amplifier added noise, circular
phase averaging, double-Gaussian and sigmoid fits, state-assignment
probabilities, fidelity, contrast, and the charge-sensitivity figure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .dynamics import Trajectory, rng_stream
from .model import CavityConfig, InvalidArgumentError

# 2*ln(9): makes gamma the 10%-90% width of the sigmoid (quoted as 4.3944)
SIGMOID_WIDTH_FACTOR = 2.0 * np.log(9.0)


class UndefinedPhaseError(ValueError):
    """Reflection phase is undefined without an input tone."""


class IllConditionedFitError(RuntimeError):
    """Fit data do not constrain the model."""


def wrap_phase_deg(phase):
    """Fold angles into (-180, 180]."""
    return 180.0 - np.mod(180.0 - np.asarray(phase, dtype=float), 360.0)


@dataclass(frozen=True)
class AmplifierChain:
    """Input-referred added noise of the measurement chain.

    added_noise_density is in photons/Hz (per-quadrature occupation spectral
    density); the quantum floor for a phase-insensitive chain is 0.5, lower
    values are for idealized tests.  sample_period sets the demodulator
    sample spacing; None means one sample per trajectory step.
    """

    added_noise_density: float
    sample_period: float | None = None

    def __post_init__(self):
        if self.added_noise_density < 0:
            raise InvalidArgumentError("added_noise_density must be >= 0")
        if self.sample_period is not None and self.sample_period <= 0:
            raise InvalidArgumentError("sample_period must be > 0")

    @classmethod
    def noiseless(cls) -> "AmplifierChain":
        return cls(added_noise_density=0.0)


@dataclass(frozen=True)
class PhaseSamples:
    """Demodulated per-sample reflection phases over a time window."""

    times: np.ndarray
    phases_deg: np.ndarray
    sample_period: float


def demodulate(trajectory: Trajectory, config: CavityConfig,
               chain: AmplifierChain, window: tuple[float, float],
               seed: int | None = None,
               rng: np.random.Generator | None = None) -> PhaseSamples:
    """Reflected-tone phase samples over `window`.

    beta_out(t) = alpha_in(t) - sqrt(kappa_ext) alpha(t), plus complex
    Gaussian chain noise of per-quadrature variance
    added_noise_density / (2 * sample_period); the returned phase follows
    the reflection-coefficient convention, arg((beta_out/alpha_in)*), so a
    steady branch reproduces the steady-state S11 phase exactly.
    """
    t_start, t_end = window
    if not (0.0 <= t_start < t_end <= trajectory.times[-1] + trajectory.dt):
        raise InvalidArgumentError("window must lie within the trajectory")
    mask = (trajectory.times >= t_start) & (trajectory.times < t_end)
    if not mask.any():
        raise InvalidArgumentError("window contains no samples")
    times = trajectory.times[mask]
    alpha = trajectory.alpha[mask]
    _, ain = trajectory.envelope.sample(times)
    if np.any(ain == 0.0):
        raise UndefinedPhaseError("alpha_in vanishes inside the window")

    beta = ain - np.sqrt(config.kappa_ext) * alpha
    period = trajectory.dt
    if chain.sample_period is not None and chain.sample_period > trajectory.dt:
        stride = max(int(round(chain.sample_period / trajectory.dt)), 1)
        usable = (len(beta) // stride) * stride
        if usable == 0:
            raise InvalidArgumentError("window shorter than one chain sample")
        beta = beta[:usable].reshape(-1, stride).mean(axis=1)
        ain = ain[:usable].reshape(-1, stride).mean(axis=1)
        times = times[:usable:stride]
        period = stride * trajectory.dt
    if chain.added_noise_density > 0:
        if rng is None:
            rng = rng_stream(0 if seed is None else seed)
        sigma = np.sqrt(chain.added_noise_density / (2.0 * period))
        z = rng.standard_normal(2 * len(beta))
        beta = beta + sigma * (z[0::2] + 1j * z[1::2])
    phases = np.degrees(np.angle(np.conj(beta) * ain))
    return PhaseSamples(times=times, phases_deg=wrap_phase_deg(phases),
                        sample_period=period)


def circular_mean_deg(phases_deg: np.ndarray) -> float:
    """Argument of the mean unit phasor, in (-180, 180]."""
    phases = np.radians(np.asarray(phases_deg, dtype=float))
    if phases.size == 0:
        raise InvalidArgumentError("no samples to average")
    mean = np.exp(1j * phases).mean()
    return float(wrap_phase_deg(np.degrees(np.angle(mean))))


def averaged_phase(samples: PhaseSamples, t_acq: float | None = None) -> float:
    """Circular mean of the unit phasors over the first t_acq of the window."""
    phases = samples.phases_deg
    if t_acq is not None:
        cutoff = samples.times[0] + t_acq
        phases = phases[samples.times < cutoff]
        if phases.size == 0:
            raise InvalidArgumentError("no samples inside t_acq")
    return circular_mean_deg(phases)


@dataclass(frozen=True)
class PhaseHistogram:
    """Counts over (-180, 180] with uniform bins."""

    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if len(self.bin_edges) != len(self.counts) + 1:
            raise InvalidArgumentError("bin_edges must be one longer than counts")

    @property
    def n_tot(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @classmethod
    def from_phases(cls, phases_deg: Sequence[float],
                    bin_width: float = 1.0) -> "PhaseHistogram":
        nbins = int(round(360.0 / bin_width))
        edges = np.linspace(-180.0, 180.0, nbins + 1)
        wrapped = wrap_phase_deg(phases_deg)
        counts, _ = np.histogram(wrapped, bins=edges)
        # (-180, 180]: exact -180 values belong to the top bin
        exact_low = np.count_nonzero(wrapped == -180.0)
        if exact_low:
            counts[0] -= exact_low
            counts[-1] += exact_low
        return cls(bin_edges=edges, counts=counts)


@dataclass(frozen=True)
class DoubleGaussFit:
    """Two-component Gaussian fit of a phase histogram (mu1 < mu2)."""

    mu1: float
    sigma1: float
    w1: float
    mu2: float
    sigma2: float
    w2: float
    goodness: float
    single_peak: bool = False

    @property
    def separation(self) -> float:
        return self.mu2 - self.mu1


def _gauss(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))


def _initial_peak_pairs(centers: np.ndarray, density: np.ndarray,
                        min_separation: float = 12.0) -> list[tuple[float, float]]:
    """Candidate (mu_a, mu_b) starts from local maxima of the smoothed bins.

    Returns up to three distinct pairs: the strongest maximum with the
    strongest sufficiently-separated partner, the most-separated pair of
    qualifying maxima, and a one-clump fallback.  The least-squares fit
    runs from each start and keeps the best, so a broad minor population
    cannot lose to bin noise on the dominant clump.
    """
    kernel = np.array([1.0, 2.0, 3.0, 2.0, 1.0])
    smooth = np.convolve(density, kernel / kernel.sum(), mode="same")
    interior = (smooth[1:-1] > smooth[:-2]) & (smooth[1:-1] >= smooth[2:])
    (peaks,) = np.where(interior)
    peaks += 1
    peaks = peaks[smooth[peaks] > 0.05 * smooth.max()]
    if len(peaks) == 0:
        peaks = np.array([int(np.argmax(smooth))])
    order = peaks[np.argsort(smooth[peaks])[::-1]]
    first = float(centers[order[0]])
    pairs = []
    far = order[np.abs(centers[order] - first) >= min_separation]
    if len(far) > 0:
        pairs.append((first, float(centers[far[0]])))
    if len(peaks) >= 2:
        lo, hi = centers[peaks].min(), centers[peaks].max()
        if hi - lo >= min_separation and (first, lo) != (first, hi):
            pairs.append((float(lo), float(hi)))
    pairs.append((first, first + 25.0))
    seen, unique = set(), []
    for pair in pairs:
        key = tuple(sorted(np.round(pair, 3)))
        if key not in seen:
            seen.add(key)
            unique.append(pair)
    return unique


def fit_double_gaussian(hist: PhaseHistogram) -> DoubleGaussFit:
    """Least-squares w1*N(mu1,s1) + (1-w1)*N(mu2,s2) fit to bin densities.

    The histogram is rotated so its circular mean sits at zero before
    fitting, which keeps peaks away from the +-180 branch cut.  A histogram
    without two resolvable maxima comes back flagged single_peak with the
    minor weight below 0.01.
    """
    if hist.n_tot < 100:
        raise InvalidArgumentError("need n_tot >= 100 to fit")
    width = hist.bin_width
    density = hist.counts / (hist.n_tot * width)
    rough = circular_mean_deg(np.repeat(hist.bin_centers, hist.counts))
    shift_bins = int(round(rough / width))
    density_r = np.roll(density, -shift_bins)
    centers = hist.bin_centers

    def model(params):
        mu1, s1, mu2, s2, w_logit = params
        w = 1.0 / (1.0 + np.exp(-w_logit))
        return w * _gauss(centers, mu1, s1) + (1 - w) * _gauss(centers, mu2, s2)

    def residual(params):
        return model(params) - density_r

    lower = [-200.0, 0.1 * width, -200.0, 0.1 * width, -12.0]
    upper = [200.0, 360.0, 200.0, 360.0, 12.0]
    sol = None
    for mu_a, mu_b in _initial_peak_pairs(centers, density_r):
        mu_a, mu_b = sorted((mu_a, mu_b))
        sig0 = max(2.0 * width, 0.25 * (mu_b - mu_a), 1e-3)
        x0 = np.array([mu_a, sig0, mu_b, sig0, 0.0])
        trial = least_squares(residual, x0, bounds=(lower, upper), ftol=1e-10,
                              xtol=1e-12, gtol=1e-12)
        if sol is None or trial.cost < sol.cost:
            sol = trial
    mu1, s1, mu2, s2, w_logit = sol.x
    w1 = 1.0 / (1.0 + np.exp(-w_logit))
    # undo the rotation, order by center
    comps = sorted([(mu1 + shift_bins * width, s1, w1),
                    (mu2 + shift_bins * width, s2, 1.0 - w1)])
    (mu1, s1, w1), (mu2, s2, w2) = comps
    mu1 = float(wrap_phase_deg(mu1)) if abs(mu1) > 180 else float(mu1)
    mu2 = float(wrap_phase_deg(mu2)) if abs(mu2) > 180 else float(mu2)
    if mu2 < mu1:
        (mu1, s1, w1), (mu2, s2, w2) = (mu2, s2, w2), (mu1, s1, w1)
    single = min(w1, w2) < 0.01 or abs(mu2 - mu1) < max(s1, s2)
    return DoubleGaussFit(mu1=mu1, sigma1=float(s1), w1=float(w1),
                          mu2=float(mu2), sigma2=float(s2), w2=float(w2),
                          goodness=float(np.linalg.norm(sol.fun)),
                          single_peak=bool(single))


def extract_p_high(fit: DoubleGaussFit,
                   phase_high_ref: float | None = None,
                   phase_low_ref: float | None = None) -> float:
    """Weight of the high-oscillation-state Gaussian.

    With branch reference phases the component nearer the high-branch
    reference is chosen (robust to either sign convention); without them the
    lower-phase component is taken, matching the area-ratio convention.
    A single-peak fit snaps to 0 or 1 by which reference the peak is near.
    """

    def circ_dist(a, b):
        return abs(wrap_phase_deg(a - b))

    if phase_high_ref is None:
        return fit.w1 if not fit.single_peak else (
            1.0 if fit.w1 >= fit.w2 else 0.0)
    if phase_low_ref is None:
        raise InvalidArgumentError("provide both reference phases or neither")
    if fit.single_peak:
        mu = fit.mu1 if fit.w1 >= fit.w2 else fit.mu2
        return 1.0 if circ_dist(mu, phase_high_ref) <= circ_dist(mu, phase_low_ref) else 0.0
    # each component independently joins its nearer branch: an overfit
    # single-state clump then lands entirely on one side
    p = 0.0
    for mu, w in ((fit.mu1, fit.w1), (fit.mu2, fit.w2)):
        if circ_dist(mu, phase_high_ref) <= circ_dist(mu, phase_low_ref):
            p += w
    return p


@dataclass(frozen=True)
class SigmoidFit:
    delta0: float
    gamma: float


@dataclass(frozen=True)
class SCurve:
    """High-state probability vs drive detuning with its sigmoid fit."""

    detunings: np.ndarray
    p_high: np.ndarray
    fit: SigmoidFit | None


def sigmoid(omega: np.ndarray, delta0: float, gamma: float) -> np.ndarray:
    z = SIGMOID_WIDTH_FACTOR * (omega - delta0) / gamma
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def fit_sigmoid(detunings: np.ndarray, p_high: np.ndarray) -> SigmoidFit:
    """Fit P = 1 / (1 + exp(-2 ln9 (x - delta0)/gamma)).

    gamma's sign follows the data's direction; its magnitude is the
    10%-90% width.  Demands points spanning p below 0.2 and above 0.8.
    """
    x = np.asarray(detunings, dtype=float)
    p = np.asarray(p_high, dtype=float)
    if x.size < 5:
        raise IllConditionedFitError("need at least 5 points")
    if p.min() > 0.2 or p.max() < 0.8:
        raise IllConditionedFitError(
            f"data span p = [{p.min():.3f}, {p.max():.3f}]; need coverage "
            "below 0.2 and above 0.8")
    scale = x.max() - x.min()
    rising = np.polyfit(x, p, 1)[0] >= 0

    def residual(params):
        return sigmoid(x, params[0], params[1]) - p

    # crossing-point initialization plus two bracketing starts
    mid = x[np.argmin(np.abs(p - 0.5))]
    sign = 1.0 if rising else -1.0
    best = None
    for gamma0 in (0.1 * scale, 0.3 * scale, 0.8 * scale):
        sol = least_squares(residual, np.array([mid, sign * gamma0]),
                            ftol=1e-12, xtol=1e-14, gtol=1e-14)
        if best is None or sol.cost < best.cost:
            best = sol
    delta0, gamma = best.x
    return SigmoidFit(delta0=float(delta0), gamma=float(gamma))


@dataclass(frozen=True)
class FidelityReport:
    """Single-shot discrimination quality between two phase histograms."""

    phi_th: float
    f_a: float
    f_b: float
    f_avg: float
    separation: float
    gauss_width: float
    low_distinguishability: bool


def _fraction_beyond(hist: PhaseHistogram, phi_th: float, above: bool) -> float:
    """Fraction of counts beyond phi_th, splitting the straddling bin."""
    edges, counts = hist.bin_edges, hist.counts.astype(float)
    total = counts.sum()
    if total == 0:
        return 0.0
    frac_above = 0.0
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        if lo >= phi_th:
            frac_above += c
        elif hi > phi_th:
            frac_above += c * (hi - phi_th) / (hi - lo)
    frac_above /= total
    return frac_above if above else 1.0 - frac_above


def _dominant_center(hist: PhaseHistogram) -> tuple[float, float]:
    if hist.n_tot < 100:
        # too few counts for the two-component fit: circular moments
        phases = np.radians(np.repeat(hist.bin_centers, hist.counts))
        mean = np.exp(1j * phases).mean()
        spread = np.sqrt(max(-2.0 * np.log(max(abs(mean), 1e-12)), 0.0))
        return (float(wrap_phase_deg(np.degrees(np.angle(mean)))),
                float(np.degrees(spread)))
    fit = fit_double_gaussian(hist)
    if fit.w1 >= fit.w2:
        return fit.mu1, fit.sigma1
    return fit.mu2, fit.sigma2


def fidelity(hist_a: PhaseHistogram, hist_b: PhaseHistogram) -> FidelityReport:
    """Threshold discrimination between state-A and state-B histograms.

    phi_th is the midpoint of the dominant fitted Gaussian centers; each
    error rate is the fraction of a histogram's counts on the other state's
    side of the threshold, directly from stored counts.
    """
    if not np.array_equal(hist_a.bin_edges, hist_b.bin_edges):
        raise InvalidArgumentError("histograms must share binning")
    mu_a, sig_a = _dominant_center(hist_a)
    mu_b, sig_b = _dominant_center(hist_b)
    phi_th = 0.5 * (mu_a + mu_b)
    a_above = mu_a > mu_b
    f_a = 1.0 - _fraction_beyond(hist_a, phi_th, above=not a_above)
    f_b = 1.0 - _fraction_beyond(hist_b, phi_th, above=a_above)
    f_avg = 0.5 * (f_a + f_b)
    return FidelityReport(
        phi_th=float(phi_th),
        f_a=float(f_a),
        f_b=float(f_b),
        f_avg=float(f_avg),
        separation=float(abs(mu_a - mu_b)),
        gauss_width=float(0.5 * (sig_a + sig_b)),
        low_distinguishability=bool(f_avg < 0.75),
    )


def contrast(scurve_a: SCurve, scurve_b: SCurve) -> tuple[float, float]:
    """Max |p_a - p_b| over the common grid and its argmax detuning."""
    if not np.array_equal(scurve_a.detunings, scurve_b.detunings):
        raise InvalidArgumentError("S-curves must share a detuning grid")
    diff = np.abs(scurve_a.p_high - scurve_b.p_high)
    idx = int(np.argmax(diff))
    return float(diff[idx]), float(scurve_a.detunings[idx])


def charge_sensitivity(delta_ng: float, t_acq: float) -> float:
    """Charge sensitivity per unit bandwidth: delta_ng * sqrt(t_acq), e/rtHz."""
    if delta_ng <= 0 or t_acq <= 0:
        raise InvalidArgumentError("delta_ng and t_acq must be > 0")
    return delta_ng * np.sqrt(t_acq)
