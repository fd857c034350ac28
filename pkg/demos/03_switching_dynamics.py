"""Fluctuation-induced switching between the metastable branches.

Integrates the noisy Langevin dynamics at a fixed drive inside the bistable
window and times the dwell periods in each state with the hysteretic
classifier.
"""

import numpy as np

from ccpt_sim import BiasPoint, Drive, paper_device, resolve_bias
from ccpt_sim import dynamics as dyn
from ccpt_sim.steady_state import bistable_region, critical_point, photon_number_roots

TWO_PI = 2 * np.pi
config = resolve_bias(paper_device(), BiasPoint(0.0, 0.0))

n_in = 2.0 * critical_point(config).n_in_c
region = bistable_region(config, n_in)
delta = 0.5 * (region.delta_lower + region.delta_upper)
drive = Drive.at_detuning(config, delta, n_in)
sols = photon_number_roots(config, drive)
print("mid-window roots:", ", ".join(
    f"{s.n:.2f} ({s.branch_label})" for s in sols))

kap = config.kappa_tot
envelope = dyn.DriveEnvelope([dyn.hold(400 / kap, delta, np.sqrt(n_in))])
dt = dyn.default_dt(config)

for n_eff in (0.5, 1.0, 2.0):
    switches, tau_h, tau_l = 0, [], []
    for seed in range(6):
        traj = dyn.integrate(config, envelope, dyn.NoiseModel(n_eff), dt,
                             seed=seed)
        stats = dyn.dwell_times(traj, config, drive)
        switches += stats.switch_count
        if not stats.censored_high:
            tau_h.append(stats.mean_lifetime_high)
        if not stats.censored_low:
            tau_l.append(stats.mean_lifetime_low)
    mean = lambda xs: f"{np.mean(xs) * 1e6:.2f} us" if xs else "censored"
    print(f"n_eff = {n_eff}: {switches:4d} switches over 6 x "
          f"{400 / kap * 1e6:.0f} us; tau_high ~ {mean(tau_h)}, "
          f"tau_low ~ {mean(tau_l)}")

try:
    import matplotlib.pyplot as plt

    traj = dyn.integrate(config, envelope, dyn.NoiseModel(1.0), dt, seed=1)
    fig, ax = plt.subplots(figsize=(8, 3), constrained_layout=True)
    ax.plot(traj.times * 1e6, np.abs(traj.alpha) ** 2, lw=0.6)
    for s in sols:
        ax.axhline(s.n, ls="--" if not s.stable else "-", color="k", lw=0.8,
                   alpha=0.5)
    ax.set_xlabel("t ($\\mu$s)")
    ax.set_ylabel("$|\\alpha|^2$ (photons)")
    fig.savefig("demos_switching.png", dpi=150)
    print("wrote demos_switching.png")
except ImportError:
    pass
