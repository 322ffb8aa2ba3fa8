"""Field-free-line magnetic particle imaging toolkit.

Forward simulation from the ideal FFL signal equation, its factorization
through (weighted) Radon transforms, magnitude bounds for the
rotation-induced terms, and joint TV-regularized reconstruction of the
particle concentration and its Radon data.
"""

from .core import (AVOGADRO, KB, MU0, ConfigError, DegenerateScaleError, Disk,
                   GeometryError, ImageGrid, ModeError, OutOfSupportError,
                   PhysicsConstants, ScanConfig, SignalTrace, Sinogram, SolverError,
                   Square, TracerModel, make_grid, make_phantom, phantom_from_file,
                   total_particles)
from .physics import (FflState, excitation, ffl_state, langevin,
                      langevin_derivative, mean_moment, mean_moment_derivative,
                      speed_ratio, speed_ratio_envelope)
from .projection import (ProjectionGeometry, build_full_sinogram,
                         build_sequential_sinogram, build_simultaneous_sinogram,
                         radon_adjoint, radon_apply, sequential_geometry,
                         simultaneous_dashed_geometry, simultaneous_full_geometry,
                         weighted_radon_apply)
from .forward import (BoundReport, KernelOperators, add_noise, bound_report,
                      forward_direct, forward_factorized, k1_apply, k2_apply,
                      k3_apply, kernel_operators, normalize, normalized_terms)

__version__ = "0.1.0"
