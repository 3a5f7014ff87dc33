"""Structure-preserving simulation of sphere-valued stochastic flows in 1D.

Simulates the precession flow u_t = u x u'' on the unit sphere and its
damped, multiplicatively forced variants on an interval with zero-flux
boundary conditions, estimates stationary statistics over trajectory
ensembles, and verifies the conservation laws, moment identities and
probability bounds those flows satisfy.
"""

__version__ = "0.1.0"

from .bound import BoundInput, lower_bound_cosine, lower_bound_general
from .dynamics import ModelSpec, drift_model, drift_sme, ito_correction, noise_coefficient
from .fields import (
    Curve,
    NoiseIntensity,
    SphereField,
    h_moments,
    make_initial,
    project_sphere,
)
from .grid import Grid1D, d1_neumann, d2_neumann, inner_l2, norm_l2_sq, norm_l4_4, space_average
from .rng import derive_substream
from .schemes import (
    SchemeConfig,
    TrajectoryState,
    integrate,
    noise_substep,
    rotation_step,
    step,
)
from .statistics import EnsembleStats, ObservableRecord, observe, stationary_estimate
from .transforms import bcf_residual, bcf_transform, hashimoto

__all__ = [
    "__version__",
    "Grid1D",
    "SphereField",
    "NoiseIntensity",
    "Curve",
    "ModelSpec",
    "SchemeConfig",
    "TrajectoryState",
    "EnsembleStats",
    "ObservableRecord",
    "BoundInput",
    "d1_neumann",
    "d2_neumann",
    "norm_l2_sq",
    "norm_l4_4",
    "inner_l2",
    "space_average",
    "make_initial",
    "project_sphere",
    "h_moments",
    "drift_sme",
    "drift_model",
    "noise_coefficient",
    "ito_correction",
    "rotation_step",
    "noise_substep",
    "step",
    "integrate",
    "observe",
    "stationary_estimate",
    "lower_bound_general",
    "lower_bound_cosine",
    "bcf_transform",
    "bcf_residual",
    "hashimoto",
    "derive_substream",
]
