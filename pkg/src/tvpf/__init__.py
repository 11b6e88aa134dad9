"""Estimation of time-varying source amplitudes in 1D transport models.

Offline, a 1D advection or heat problem is reduced to a banded linear ODE
system by central finite differences; online, a particle filter jointly
tracks the discretized solution, the source amplitude, and the
amplitude's random-walk scale from sparse noisy measurements, with
credible intervals throughout.
"""

from tvpf.filtering import (
    DegenerateWeightsError,
    Ensemble,
    FilterConfig,
    FilterSummary,
    run_filter,
)
from tvpf.integrate import IntegratorConfig, step_constant_theta, step_varying_theta
from tvpf.mesh import (
    BoundaryCondition,
    LinearOdeSystem,
    SpatialMesh,
    assemble_advection,
    assemble_heat,
    build_mesh,
)
from tvpf.models import ProblemSpec, advection_benchmark, heat_benchmark
from tvpf.synthdata import (
    Dataset,
    ObservationSchedule,
    calibrate_noise,
    generate_observations,
    simulate_truth,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "SpatialMesh",
    "LinearOdeSystem",
    "build_mesh",
    "assemble_advection",
    "assemble_heat",
    "IntegratorConfig",
    "step_constant_theta",
    "step_varying_theta",
    "ProblemSpec",
    "advection_benchmark",
    "heat_benchmark",
    "ObservationSchedule",
    "Dataset",
    "simulate_truth",
    "calibrate_noise",
    "generate_observations",
    "FilterConfig",
    "Ensemble",
    "FilterSummary",
    "DegenerateWeightsError",
    "run_filter",
    "__version__",
]
