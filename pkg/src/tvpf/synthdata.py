"""Synthetic ground truth and noisy partial observations.

Truth trajectories are produced on the same grid the filter uses (a
deliberate, documented choice: the benchmarks are defined directly on the
discretized system; a finer truth grid is available through the config's
``truth_refinement`` option).  The observation noise level follows a
fixed rule: 20% of the average per-node temporal standard deviation of
the truth, measured over the observation times and excluding t = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tvpf.integrate import IntegratorConfig, step_varying_theta
from tvpf.mesh import LinearOdeSystem, SpatialMesh, assemble_advection, assemble_heat
from tvpf.models import ProblemSpec

__all__ = [
    "ObservationSchedule",
    "Dataset",
    "assemble_system",
    "simulate_truth",
    "calibrate_noise",
    "generate_observations",
]

NOISE_FRACTION = 0.2


@dataclass(frozen=True)
class ObservationSchedule:
    """Which state components are observed, and when.

    An empty time grid is legal and means "no data" (the filter then
    reports the prior alone).
    """

    observed_indices: np.ndarray   # strictly increasing indices into the state vector
    times: np.ndarray              # t_1 < ... < t_J, all positive

    def __post_init__(self):
        idx = np.asarray(self.observed_indices)
        times = np.asarray(self.times, dtype=float)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("need at least one observed state index")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("observed indices must be strictly increasing")
        if np.any(idx < 0):
            raise ValueError("observed indices must be nonnegative")
        if times.ndim != 1:
            raise ValueError("observation times must be a 1D array")
        if times.size and (times[0] <= 0 or np.any(np.diff(times) <= 0)):
            raise ValueError("observation times must be strictly increasing and positive")
        object.__setattr__(self, "observed_indices", idx.astype(int))
        object.__setattr__(self, "times", times)


@dataclass(frozen=True)
class Dataset:
    """Measurements plus the (hidden) truth they were generated from.

    ``truth_states`` and ``truth_theta`` exist for prior construction and
    scoring only; the filter never sees them beyond the t=0 prior ranges.
    """

    schedule: ObservationSchedule
    measurements: np.ndarray       # (J, m)
    sigma_noise: float
    truth_states: np.ndarray       # (J+1, d), row 0 at t = 0
    truth_theta: np.ndarray        # (J+1,)

    def __post_init__(self):
        meas = np.asarray(self.measurements, dtype=float)
        J = self.schedule.times.size
        m = self.schedule.observed_indices.size
        if meas.shape != (J, m):
            raise ValueError(f"measurements must have shape ({J}, {m}), got {meas.shape}")
        if not np.all(np.isfinite(meas)):
            raise ValueError("measurements must be finite")
        if not self.sigma_noise >= 0:
            raise ValueError("noise level must be nonnegative")
        object.__setattr__(self, "measurements", meas)
        object.__setattr__(self, "truth_states", np.asarray(self.truth_states, dtype=float))
        object.__setattr__(self, "truth_theta", np.asarray(self.truth_theta, dtype=float))


def assemble_system(problem: ProblemSpec, mesh: SpatialMesh) -> LinearOdeSystem:
    """Build the semi-discrete operator for a benchmark problem."""
    if problem.kind == "advection":
        return assemble_advection(mesh, problem.velocity)
    return assemble_heat(mesh, problem.diffusivity, problem.source_profile)


def simulate_truth(
    problem: ProblemSpec,
    mesh: SpatialMesh,
    cfg: IntegratorConfig,
    times: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the reference trajectory through all observation times.

    Returns ``(truth_states, truth_theta)`` of shapes (J+1, d) and (J+1,),
    with row 0 holding the initial condition at t = 0 and the amplitude
    path evaluated with its configured parameters.
    """
    times = np.asarray(times, dtype=float)
    system = assemble_system(problem, mesh)
    xs = mesh.nodes[system.state_nodes]
    u = np.array([float(problem.initial_condition(x)) for x in xs])

    def theta_fn(t):
        return problem.theta_true(t, **problem.theta_params)

    states = np.empty((times.size + 1, system.dim))
    states[0] = u
    t_prev = 0.0
    for j, t in enumerate(times, start=1):
        u = step_varying_theta(system, u, theta_fn, t_prev, float(t), cfg)
        states[j] = u
        t_prev = float(t)
    theta = np.array([float(theta_fn(t)) for t in np.concatenate(([0.0], times))])
    return states, theta


def calibrate_noise(truth_window: np.ndarray) -> float:
    """Noise level from the truth: 20% of the mean per-node temporal std.

    ``truth_window`` holds one row per time sample (at least two) and one
    column per node; the standard deviation is the population form.
    """
    window = np.asarray(truth_window, dtype=float)
    if window.ndim != 2 or window.shape[0] < 2:
        raise ValueError("noise calibration needs at least 2 time samples")
    return NOISE_FRACTION * float(window.std(axis=0, ddof=0).mean())


def generate_observations(
    truth_states: np.ndarray,
    truth_theta: np.ndarray,
    schedule: ObservationSchedule,
    sigma_noise: float,
    seed: int,
) -> Dataset:
    """Select the observed components and corrupt them with Gaussian noise.

    Deterministic for a given seed: the same seed yields bit-identical
    measurement matrices.
    """
    if sigma_noise < 0:
        raise ValueError("noise level must be nonnegative")
    truth_states = np.asarray(truth_states, dtype=float)
    J = schedule.times.size
    rng = np.random.default_rng(seed)
    clean = truth_states[1:, schedule.observed_indices]
    noise = rng.normal(0.0, sigma_noise, size=clean.shape)
    return Dataset(
        schedule=schedule,
        measurements=clean + noise,
        sigma_noise=float(sigma_noise),
        truth_states=truth_states,
        truth_theta=np.asarray(truth_theta, dtype=float),
    )
