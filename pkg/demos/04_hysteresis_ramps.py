"""Hysteresis loops shrink as the amplitude ramp slows down.

Triangular drive-amplitude ramps at fixed red detuning: a fast ramp traces
the full deterministic loop; slower ramps give spontaneous switching enough
time to mix the branches, pulling the forward and reverse phases together.
"""

import numpy as np

from ccpt_sim import BiasPoint, paper_device, resolve_bias
from ccpt_sim import dynamics as dyn

TWO_PI = 2 * np.pi
config = resolve_bias(paper_device(), BiasPoint(0.0, 0.0))
delta = -TWO_PI * 9.5e6

results = []
for t_ramp in (2e-6, 8e-6, 16e-6, 28e-6):
    res = dyn.hysteresis_ramp(config, delta, -140.0, -109.0, t_ramp,
                              repetitions=200, noise=dyn.NoiseModel(0.5),
                              t_acq_per_point=t_ramp / 128, seed=1)
    results.append(res)
    print(f"t_ramp = {t_ramp * 1e6:5.1f} us: loop area = "
          f"{res.loop_area_deg_dbm:8.1f} deg*dBm over {res.repetitions} reps")

try:
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4), constrained_layout=True)
    colors = plt.cm.coolwarm(np.linspace(0.95, 0.05, len(results)))
    for res, color in zip(results, colors):
        ax.plot(res.p_dbm, res.phase_fwd_deg, color=color,
                label=f"{res.t_ramp * 1e6:.0f} $\\mu$s")
        ax.plot(res.p_dbm, res.phase_rev_deg, "--", color=color)
    ax.set_xlabel("$P_{in}$ (dBm)")
    ax.set_ylabel("phase (deg)")
    ax.legend(title="ramp time", fontsize=8)
    fig.savefig("demos_hysteresis.png", dpi=150)
    print("wrote demos_hysteresis.png")
except ImportError:
    pass
