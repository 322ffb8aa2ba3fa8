"""Tracer magnetization model: Langevin response and convolution kernels.

Plots the equilibrium magnetization curve, its field derivative, and the
two convolution kernels (mean moment and its derivative, evaluated against
displacement) that shape the factorized forward operator.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fflmpi import ScanConfig, TracerModel, langevin, langevin_derivative, \
    mean_moment, mean_moment_derivative

config = ScanConfig()
tracer = TracerModel()
print(f"single-particle moment  m = {tracer.particle_moment:.4e} A*m^2")
print(f"Langevin argument scale beta = {tracer.langevin_beta:.4e} m/A")
print(f"beta * A = {tracer.langevin_beta * config.amplitude:.2f} "
      "(saturation at the rim of the field of view)")

lam = np.linspace(-30, 30, 1001)
fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
axes[0].plot(lam, langevin(lam))
axes[0].set(title="Langevin function", xlabel="argument", ylabel="L")
axes[1].plot(lam, langevin_derivative(lam))
axes[1].set(title="derivative", xlabel="argument", ylabel="L'")

# kernels against FFL-to-line displacement: mbar'(G d) is the narrow bump
# that makes the drive term a sharp convolution; mbar(G d) saturates and
# never decays, which is why the orientation term sees every particle
d = np.linspace(-config.r_fov, config.r_fov, 2001)
axes[2].plot(d * 1e3, mean_moment_derivative(config.gradient * d, tracer)
             / mean_moment_derivative(0, tracer), label="moment derivative")
axes[2].plot(d * 1e3, mean_moment(config.gradient * d, tracer)
             / tracer.particle_moment, label="mean moment")
axes[2].set(title="kernels vs displacement", xlabel="displacement (mm)")
axes[2].legend()
fig.tight_layout()
fig.savefig("demo01_langevin.png", dpi=130)
print("wrote demo01_langevin.png")
