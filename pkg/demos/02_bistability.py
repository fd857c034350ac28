"""Driven steady states: one branch below the critical power, three above.

Solves the photon-number cubic across detuning at three drive powers,
marking stability, and locates the spinode (critical point) and the
bistable detuning window.
"""

import numpy as np

from ccpt_sim import BiasPoint, paper_device, resolve_bias
from ccpt_sim.model import dbm_to_photon_flux, watts_to_dbm
from ccpt_sim.steady_state import (
    bistable_region,
    critical_point,
    phase_deg,
    response_curve,
)

TWO_PI = 2 * np.pi
config = resolve_bias(paper_device(), BiasPoint(0.0, 0.0))

cp = critical_point(config)
print(f"critical point: Delta_c/2pi = {cp.delta_c / TWO_PI / 1e6:.3f} MHz, "
      f"P_c = {watts_to_dbm(cp.p_c):.1f} dBm")

for p_dbm in (-141.0, -131.8, -125.0):
    n_in = dbm_to_photon_flux(p_dbm, config.omega0)
    region = bistable_region(config, n_in)
    tag = ("bistable for Delta/2pi in "
           f"[{region.delta_lower / TWO_PI / 1e6:.2f}, "
           f"{region.delta_upper / TWO_PI / 1e6:.2f}] MHz"
           if region.exists else "monostable everywhere")
    print(f"P_in = {p_dbm:6.1f} dBm ({n_in / cp.n_in_c:5.2f} x critical): {tag}")

# branch structure at the strongest drive
n_in = dbm_to_photon_flux(-125.0, config.omega0)
grid = TWO_PI * np.linspace(-10e6, 2e6, 13)
print("\nDelta (MHz) | roots n (label, stable)")
for delta, sols in response_curve(config, n_in, grid):
    desc = ", ".join(f"{s.n:6.2f} ({s.branch_label}"
                     f"{'' if s.stable else ', unstable'})" for s in sols)
    print(f"  {delta / TWO_PI / 1e6:+7.2f} | {desc}")

try:
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6), constrained_layout=True)
    grid = TWO_PI * np.linspace(-12e6, 4e6, 801)
    for p_dbm, color in ((-141.0, "tab:red"), (-131.8, "tab:blue"),
                         (-125.0, "tab:green")):
        n_in = dbm_to_photon_flux(p_dbm, config.omega0)
        rows = response_curve(config, n_in, grid)
        for panel, value in zip(axes, (
                lambda s: s.n, lambda s: abs(s.s11),
                lambda s: phase_deg(s.s11))):
            for delta, sols in rows:
                for s in sols:
                    panel.plot(delta / TWO_PI / 1e6, value(s),
                               "." if s.stable else "o",
                               ms=1.5 if s.stable else 3,
                               mfc="none", color=color)
    for panel, label in zip(axes, ("$n$", "$|S_{11}|$", "phase (deg)")):
        panel.set_xlabel("$\\Delta/2\\pi$ (MHz)")
        panel.set_ylabel(label)
    fig.savefig("demos_bistability.png", dpi=150)
    print("\nwrote demos_bistability.png")
except ImportError:
    pass
