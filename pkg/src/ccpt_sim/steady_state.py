"""Steady states of the driven Kerr oscillator.

Solves the photon-number cubic
    K^2 n^3 - 2 K Delta n^2 + (Delta^2 + kappa_tot^2/4) n = kappa_ext * n_in,
classifies branch stability, evaluates the reflection coefficient, and
locates the critical (spinode) point and the bistable detuning window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.constants import hbar as HBAR

from .model import CavityConfig, Drive, InvalidArgumentError, NumericalError

SQRT3 = np.sqrt(3.0)


class NoCriticalPointError(ValueError):
    """The configuration has no bifurcation (K = 0 is monostable for all drives)."""


@dataclass(frozen=True)
class BranchSolution:
    """One steady-state branch: photon number, field, reflection, stability."""

    n: float
    alpha: complex
    s11: complex
    stable: bool
    branch_label: str  # "low" | "unstable" | "high"
    boundary: bool = False  # True when this root sat at a fold tangency


class BistableRegion(NamedTuple):
    delta_lower: float
    delta_upper: float
    exists: bool


class CriticalPoint(NamedTuple):
    delta_c: float
    p_c: float
    n_in_c: float


def _cubic_coeffs(config: CavityConfig, drive: Drive):
    delta = drive.detuning(config)
    k = config.kerr
    kap = config.kappa_tot
    a = k * k
    b = -2.0 * k * delta
    c = delta * delta + 0.25 * kap * kap
    d = -config.kappa_ext * drive.n_in
    return a, b, c, d, delta, k


def _real_cubic_roots(a: float, b: float, c: float, d: float) -> np.ndarray:
    """Real roots of a*x^3 + b*x^2 + c*x + d (a != 0), trig/Cardano form."""
    bn, cn, dn = b / a, c / a, d / a
    shift = bn / 3.0
    p = cn - bn * bn / 3.0
    q = 2.0 * bn**3 / 27.0 - bn * cn / 3.0 + dn
    disc = -4.0 * p**3 - 27.0 * q * q
    if disc > 0.0:
        # three distinct real roots: trigonometric form
        r = np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (2.0 * p * r), -1.0, 1.0)
        theta = np.arccos(arg)
        t = 2.0 * r * np.cos((theta - 2.0 * np.pi * np.arange(3.0)) / 3.0)
        return np.sort(t - shift)
    # one real root (or a tangency, disc == 0): stable Cardano
    if p == 0.0 and q == 0.0:
        return np.array([-shift])
    half_q = 0.5 * q
    rad = np.sqrt(half_q * half_q + (p / 3.0) ** 3) if disc <= 0 else 0.0
    u = np.cbrt(-half_q + rad) if -half_q + rad != 0 else np.cbrt(-half_q - rad)
    t0 = u - p / (3.0 * u) if u != 0 else 0.0
    return np.array([t0 - shift])


def _polish_root(n: float, a: float, b: float, c: float, d: float,
                 scale: float) -> float:
    """Guarded Newton refinement; usually a single step."""
    for _ in range(4):
        f = ((a * n + b) * n + c) * n + d
        if abs(f) <= 1e-13 * scale:
            break
        fp = (3.0 * a * n + 2.0 * b) * n + c
        if fp == 0.0:
            break
        step = f / fp
        n = n - step
        if abs(step) <= 1e-15 * max(abs(n), 1.0):
            break
    return n


def _intracavity_field(config: CavityConfig, drive: Drive, n: float) -> complex:
    """alpha with |alpha|^2 = n exactly and the steady-state phase."""
    delta = drive.detuning(config)
    denom = 0.5 * config.kappa_tot - 1j * (delta - config.kerr * n)
    phase = np.angle(np.sqrt(config.kappa_ext * drive.n_in) / denom)
    return complex(np.sqrt(n) * np.exp(1j * phase))


def classify_stability(n: float, config: CavityConfig, drive: Drive) -> bool:
    """True when the linearized dynamics around the root are stable.

    The root is unstable iff K^2 n^2 - (Delta - 2 K n)^2 > kappa_tot^2 / 4.
    """
    delta = drive.detuning(config)
    k = config.kerr
    growth = k * k * n * n - (delta - 2.0 * k * n) ** 2
    return not growth > 0.25 * config.kappa_tot**2


def _branch_label(n: float, config: CavityConfig, drive: Drive) -> str:
    """Monostable-branch label: which bistable branch this root continues."""
    if config.kerr == 0.0:
        return "low"
    x = drive.detuning(config) - config.kerr * n
    return "high" if np.sign(config.kerr) * x < 0 else "low"


def photon_number_roots(config: CavityConfig, drive: Drive) -> list[BranchSolution]:
    """Real, non-negative steady-state photon numbers, sorted ascending.

    Returns 1 or 3 branches; a fold tangency collapses to the surviving
    monostable branch with ``boundary=True``.
    """
    a, b, c, d, delta, k = _cubic_coeffs(config, drive)
    rhs = config.kappa_ext * drive.n_in
    if rhs == 0.0:
        return [BranchSolution(0.0, 0j, reflection_coefficient(config, drive, 0.0),
                               True, _branch_label(0.0, config, drive))]
    if k == 0.0:
        roots = np.array([rhs / c])
    else:
        roots = _real_cubic_roots(a, b, c, d)
        roots = np.array([_polish_root(r, a, b, c, d, rhs) for r in roots])
    # clamp rounding negatives, drop genuinely negative roots
    roots = roots[roots > -1e-12]
    roots = np.where(roots < 0.0, 0.0, roots)
    roots = np.sort(roots)
    boundary = False
    if len(roots) == 3:
        span = max(roots[-1], 1.0)
        if roots[1] - roots[0] < 1e-9 * span or roots[2] - roots[1] < 1e-9 * span:
            # tangency: keep the simple root, report monostable
            gaps = (roots[1] - roots[0], roots[2] - roots[1])
            keep = roots[2] if gaps[0] < gaps[1] else roots[0]
            roots = np.array([keep])
            boundary = True
    elif len(roots) == 2:
        # double root exactly at a fold with the third negative/complex
        roots = np.array([roots[np.argmax(np.abs(np.diff(roots)))]])
        boundary = True

    sols = []
    for i, n in enumerate(roots):
        stable = classify_stability(n, config, drive)
        if len(roots) == 3:
            label = ("low", "unstable", "high")[i]
        else:
            label = _branch_label(n, config, drive)
        sols.append(BranchSolution(
            n=float(n),
            alpha=_intracavity_field(config, drive, float(n)),
            s11=reflection_coefficient(config, drive, float(n)),
            stable=stable,
            branch_label=label,
            boundary=boundary,
        ))
    return sols


def reflection_coefficient(config: CavityConfig, drive: Drive, n: float) -> complex:
    """S11 = [(D - Kn) - i(k_int - k_ext)/2] / [(D - Kn) - i(k_int + k_ext)/2]."""
    if n < 0:
        raise InvalidArgumentError("photon number must be >= 0")
    x = drive.detuning(config) - config.kerr * n
    num = x - 0.5j * (config.kappa_int - config.kappa_ext)
    den = x - 0.5j * (config.kappa_int + config.kappa_ext)
    return num / den


def phase_deg(z: complex | np.ndarray) -> float | np.ndarray:
    """Argument in degrees on (-180, 180]."""
    deg = np.degrees(np.angle(z))
    wrapped = 180.0 - np.mod(180.0 - deg, 360.0)
    if np.isscalar(wrapped):
        return float(wrapped)
    return wrapped


def critical_point(config: CavityConfig) -> CriticalPoint:
    """Spinode: the drive where the bistable region is born.

    delta_c = sgn(K) * (sqrt(3)/2) * kappa_tot and
    n_in_c = (sqrt(3)/9) * kappa_tot^3 / (|K| * kappa_ext).
    """
    if config.kerr == 0.0:
        raise NoCriticalPointError(
            "K = 0: the cavity is monostable at every drive")
    kap = config.kappa_tot
    delta_c = np.sign(config.kerr) * 0.5 * SQRT3 * kap
    n_in_c = (SQRT3 / 9.0) * kap**3 / (abs(config.kerr) * config.kappa_ext)
    p_c = n_in_c * HBAR * (config.omega0 + delta_c)
    return CriticalPoint(delta_c=float(delta_c), p_c=float(p_c), n_in_c=float(n_in_c))


def _reduced_discriminant(dr: np.ndarray, f: float) -> np.ndarray:
    """Discriminant of m^3 - 2*dr*m^2 + (dr^2 + 1/4)*m - f in reduced units.

    dr = sgn(K)*Delta/kappa_tot, f = |K|*kappa_ext*n_in/kappa_tot^3; positive
    discriminant means three distinct real roots.
    """
    b = -2.0 * dr
    c = dr * dr + 0.25
    d = -f
    return (18.0 * b * c * d - 4.0 * b**3 * d + b * b * c * c
            - 4.0 * c**3 - 27.0 * d * d)


def bistable_region(config: CavityConfig, n_in: float,
                    resolution: float = 1e-4) -> BistableRegion:
    """Detuning window with three real non-negative roots.

    Edges from bisection on the cubic discriminant, resolved to
    ``resolution * kappa_tot``.
    """
    if n_in < 0:
        raise InvalidArgumentError("n_in must be >= 0")
    if config.kerr == 0.0 or n_in == 0.0:
        return BistableRegion(np.nan, np.nan, False)
    kap = config.kappa_tot
    f = abs(config.kerr) * config.kappa_ext * n_in / kap**3
    # three positive roots require sgn(K)*Delta > 0; the window lives in
    # reduced detuning dr between the spinode and just past the far fold
    hi = 4.0 * f + 2.0
    grid = np.linspace(0.0, hi, 4096)
    disc = _reduced_discriminant(grid, f)
    pos = disc > 0.0
    if not pos.any():
        return BistableRegion(np.nan, np.nan, False)
    changes = np.where(np.diff(pos.astype(int)) != 0)[0]

    def bisect(lo: float, hi_: float) -> float:
        flo = _reduced_discriminant(np.array([lo]), f)[0]
        while hi_ - lo > resolution:
            mid = 0.5 * (lo + hi_)
            fm = _reduced_discriminant(np.array([mid]), f)[0]
            if (flo > 0) == (fm > 0):
                lo, flo = mid, fm
            else:
                hi_ = mid
        return 0.5 * (lo + hi_)

    edges = [bisect(grid[i], grid[i + 1]) for i in changes]
    if len(edges) < 2:
        return BistableRegion(np.nan, np.nan, False)
    dr_edges = np.sort(np.array(edges[:2]))
    deltas = np.sign(config.kerr) * dr_edges * kap
    return BistableRegion(float(deltas.min()), float(deltas.max()), True)


def response_curve(config: CavityConfig, n_in: float,
                   delta_grid: np.ndarray) -> list[tuple[float, list[BranchSolution]]]:
    """Branch solutions over a sorted detuning grid, for plotting/export."""
    delta_grid = np.asarray(delta_grid, dtype=float)
    if delta_grid.size == 0:
        raise InvalidArgumentError("detuning grid must be non-empty")
    if np.any(np.diff(delta_grid) < 0):
        raise InvalidArgumentError("detuning grid must be sorted ascending")
    out = []
    for delta in delta_grid:
        drive = Drive.at_detuning(config, float(delta), n_in)
        out.append((float(delta), photon_number_roots(config, drive)))
    return out
