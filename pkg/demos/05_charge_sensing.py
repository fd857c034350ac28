"""The full charge-sensing experiment, downsized for a quick run.

Two gate biases 0.09e apart are compared on a shared drive-frequency grid:
chirp-initialize, stabilize, acquire the reflected phase, repeat.  The two
S-curves separate by the charge dispersion; at the contrast-optimal tone a
single shot reads the charge state in 3 us.

The shipped full-scale configuration lives in configs/compare_paper.json
(n_tot = 20,000); here n_tot = 300 keeps the demo under a minute.
"""

import numpy as np

from ccpt_sim import BiasPoint, paper_device, resolve_bias
from ccpt_sim import dynamics as dyn
from ccpt_sim.measurement import AmplifierChain, charge_sensitivity
from ccpt_sim.protocol import SenseProtocol, compare_bias

TWO_PI = 2 * np.pi
device = paper_device()
kappa = dict(kappa_int=TWO_PI * 0.05e6, kappa_ext=TWO_PI * 1.15e6)
config_a = resolve_bias(device, BiasPoint(0.62, 0.0), **kappa)
config_b = resolve_bias(device, BiasPoint(0.71, 0.0), **kappa)

proto = SenseProtocol(t_r=2e-6, n_tot=300, t_acq=3e-6)
grid = TWO_PI * np.linspace(5.7985e9, 5.8140e9, 16)
result = compare_bias(config_a, config_b, -128.0, grid, proto,
                      dyn.NoiseModel(0.5),
                      AmplifierChain(added_noise_density=4.67),
                      master_seed=1)

print(f"contrast:        {result.contrast * 100:.2f} %")
print(f"optimal tone:    {result.omega_opt / TWO_PI / 1e9:.4f} GHz")
print(f"fidelity:        F = {result.fidelity.f_avg * 100:.2f} % "
      f"(F_a = {result.fidelity.f_a * 100:.1f}, "
      f"F_b = {result.fidelity.f_b * 100:.1f})")
print(f"peak separation: {result.fidelity.separation:.1f} deg, "
      f"widths ~ {result.fidelity.gauss_width:.1f} deg")
print(f"high-branch occupancy at optimum: "
      f"{result.n_high_a:.1f} / {result.n_high_b:.1f} photons")
print(f"charge sensitivity (0.09 e in 3 us): "
      f"{charge_sensitivity(0.09, 3e-6) * 1e6:.2f} microe/rtHz")

try:
    import matplotlib.pyplot as plt

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6),
                                      constrained_layout=True)
    f_ghz = result.omega_grid / TWO_PI / 1e9
    top.plot(f_ghz, result.scurve_a.p_high, "o-", color="tab:pink",
             label="$n_g$ = 0.62")
    top.plot(f_ghz, result.scurve_b.p_high, "o-", color="tab:green",
             label="$n_g$ = 0.71")
    top.axvline(result.omega_opt / TWO_PI / 1e9, color="k", ls=":",
                label="optimal tone")
    top.set_xlabel("$\\omega_d/2\\pi$ (GHz)")
    top.set_ylabel("$P(\\omega_d)$")
    top.legend(fontsize=8)
    centers = result.hist_a.bin_centers
    bottom.bar(centers, result.hist_a.counts, width=1.0, alpha=0.7,
               color="tab:blue", label="$N^{(0.62)}$")
    bottom.bar(centers, result.hist_b.counts, width=1.0, alpha=0.7,
               color="tab:red", label="$N^{(0.71)}$")
    bottom.axvline(result.fidelity.phi_th, color="k", ls="--",
                   label="$\\phi_{th}$")
    occupied = np.where((result.hist_a.counts + result.hist_b.counts) > 0)[0]
    bottom.set_xlim(centers[occupied[0]] - 10, centers[occupied[-1]] + 10)
    bottom.set_xlabel("$\\phi$ (deg)")
    bottom.set_ylabel("counts")
    bottom.legend(fontsize=8)
    fig.savefig("demos_charge_sensing.png", dpi=150)
    print("wrote demos_charge_sensing.png")
except ImportError:
    pass
