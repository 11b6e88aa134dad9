"""Experiment configuration: parsing, validation, canned setups, builders.

Configs are YAML files with five blocks (problem, mesh, observation,
filter, integrator) plus a top-level seed and optional output directory.
Two canned configs ship with the package: ``advection_logistic`` (periodic
advection, logistic amplitude) and ``heat_sine`` (Dirichlet heat,
sinusoidal amplitude).  The builders in this module turn a parsed config
into the concrete problem, mesh, system, schedule, dataset, and filter
configuration.

The config hash covers everything except the seed and the output
directory: it guards model/schedule compatibility between the simulate
and estimate phases, while the seed is recorded separately as run
identity.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from tvpf.filtering import FilterConfig
from tvpf.integrate import IntegratorConfig
from tvpf.mesh import (
    LinearOdeSystem,
    SpatialMesh,
    build_mesh,
    state_index_for_location,
)
from tvpf.models import (
    ProblemSpec,
    gaussian_source_profile,
    initial_advection,
    initial_heat,
    initial_zero,
    theta_constant,
    theta_logistic,
    theta_sine,
    uniform_source_profile,
)
from tvpf.synthdata import (
    Dataset,
    ObservationSchedule,
    assemble_system,
    calibrate_noise,
    generate_observations,
    simulate_truth,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "config_hash",
    "canned_config_names",
    "make_problem",
    "make_mesh",
    "make_system",
    "make_schedule",
    "make_integrator",
    "make_dataset",
    "make_filter_config",
    "scaled_prior_range",
]

CANNED_CONFIGS = ("advection_logistic", "heat_sine")

_THETA_FUNCTIONS = {
    "logistic": theta_logistic,
    "sine": theta_sine,
    "constant": theta_constant,
}

_INITIAL_CONDITIONS = {
    "gaussian_pulse": initial_advection,
    "parabolic_arch": initial_heat,
    "zero": initial_zero,
}

_DEFAULT_INITIAL = {"advection": "gaussian_pulse", "heat": "parabolic_arch"}

# Multiplicative prior rule: zero truth values get this fallback half-width.
_ZERO_TRUTH_HALF_WIDTH = 0.05
_ZERO_TRUTH_CUTOFF = 1e-8


class ConfigError(ValueError):
    """A configuration file failed validation; the message names the field."""


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"{context}.{key} is required")
    return mapping[key]


def _as_float(value, context: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{context} must be a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{context} must be finite, got {value!r}")
    return out


def _as_int(value, context: str) -> int:
    if isinstance(value, bool) or (not isinstance(value, int) and int(value) != value):
        raise ConfigError(f"{context} must be an integer, got {value!r}")
    return int(value)


def _as_pair(value, context: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{context} must be a [low, high] pair, got {value!r}")
    lo = _as_float(value[0], f"{context}[0]")
    hi = _as_float(value[1], f"{context}[1]")
    if lo > hi:
        raise ConfigError(f"{context} has low > high: {value!r}")
    return (lo, hi)


def _parse_locations(value, context: str) -> tuple[float, ...]:
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{context} range must look like 'start:step:stop', got {value!r}")
        start, step, stop = (_as_float(p, context) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"{context} range must have step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(count))
    if isinstance(value, (list, tuple)) and value:
        return tuple(_as_float(v, f"{context}[{i}]") for i, v in enumerate(value))
    raise ConfigError(f"{context} must be a nonempty list or 'start:step:stop' string")


@dataclass(frozen=True)
class ProblemBlock:
    kind: str
    length: float
    t_final: float
    velocity: float | None = None
    diffusivity: float | None = None
    theta_true: str = "constant"
    theta_params: dict = field(default_factory=dict)
    initial_condition: str | None = None
    source_mu: float | None = None
    source_gamma: float | None = None


@dataclass(frozen=True)
class MeshBlock:
    intervals: int


@dataclass(frozen=True)
class ObservationBlock:
    x_locations: tuple[float, ...]
    dt_obs: float
    noise_rule: str = "calibrated"      # "calibrated" | "explicit"
    sigma_noise: float | None = None
    truth_refinement: int = 1


@dataclass(frozen=True)
class FilterBlock:
    n_particles: int
    delta: float
    sigma_c: float
    sigma_d: float
    state_prior: object = "truth_scaled"      # rule name or [low, high] pair
    theta_prior: object = "truth_scaled"
    sigma_e_prior: tuple[float, float] = (0.05, 10.0)
    resampler: str = "multinomial"


@dataclass(frozen=True)
class IntegratorBlock:
    substeps: int = 4


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemBlock
    mesh: MeshBlock
    observation: ObservationBlock
    filter: FilterBlock
    integrator: IntegratorBlock
    seed: int = 0
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        unknown = set(data) - {"problem", "mesh", "observation", "filter", "integrator", "seed", "output_dir"}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        problem = _parse_problem(_require(data, "problem", "config"))
        mesh = _parse_mesh(_require(data, "mesh", "config"))
        observation = _parse_observation(_require(data, "observation", "config"))
        filt = _parse_filter(_require(data, "filter", "config"))
        integrator = _parse_integrator(data.get("integrator", {}))
        seed = _as_int(data.get("seed", 0), "seed")
        output_dir = data.get("output_dir")
        if output_dir is not None and not isinstance(output_dir, str):
            raise ConfigError("output_dir must be a string path")
        _cross_validate(problem, observation)
        return cls(problem, mesh, observation, filt, integrator, seed, output_dir)

    def to_dict(self) -> dict:
        p = self.problem
        problem: dict = {"kind": p.kind, "L": p.length, "T_final": p.t_final}
        if p.velocity is not None:
            problem["v"] = p.velocity
        if p.diffusivity is not None:
            problem["alpha"] = p.diffusivity
        problem["theta_true"] = p.theta_true
        problem["theta_params"] = {k: p.theta_params[k] for k in sorted(p.theta_params)}
        problem["initial_condition"] = p.initial_condition
        if p.source_mu is not None:
            problem["source_mu"] = p.source_mu
        if p.source_gamma is not None:
            problem["source_gamma"] = p.source_gamma

        o = self.observation
        observation: dict = {
            "x_locations": list(o.x_locations),
            "dt_obs": o.dt_obs,
            "noise_rule": o.noise_rule,
        }
        if o.sigma_noise is not None:
            observation["sigma_noise"] = o.sigma_noise
        if o.truth_refinement != 1:
            observation["truth_refinement"] = o.truth_refinement

        f = self.filter
        prior = lambda v: list(v) if isinstance(v, tuple) else v
        filt = {
            "N": f.n_particles,
            "delta": f.delta,
            "sigma_C": f.sigma_c,
            "sigma_D": f.sigma_d,
            "state_prior": prior(f.state_prior),
            "theta_prior": prior(f.theta_prior),
            "sigmaE_prior": list(f.sigma_e_prior),
            "resampler": f.resampler,
        }

        out = {
            "problem": problem,
            "mesh": {"M": self.mesh.intervals},
            "observation": observation,
            "filter": filt,
            "integrator": {"K": self.integrator.substeps},
            "seed": self.seed,
        }
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out


def _parse_problem(data: dict) -> ProblemBlock:
    kind = _require(data, "kind", "problem")
    if kind not in ("advection", "heat"):
        raise ConfigError(f"problem.kind must be 'advection' or 'heat', got {kind!r}")
    length = _as_float(_require(data, "L", "problem"), "problem.L")
    t_final = _as_float(_require(data, "T_final", "problem"), "problem.T_final")
    if length <= 0 or t_final <= 0:
        raise ConfigError("problem.L and problem.T_final must be positive")

    velocity = diffusivity = None
    if kind == "advection":
        velocity = _as_float(_require(data, "v", "problem"), "problem.v")
        if "alpha" in data:
            raise ConfigError("problem.alpha does not apply to an advection problem")
    else:
        diffusivity = _as_float(_require(data, "alpha", "problem"), "problem.alpha")
        if diffusivity <= 0:
            raise ConfigError("problem.alpha must be positive")
        if "v" in data:
            raise ConfigError("problem.v does not apply to a heat problem")

    theta_true = data.get("theta_true", "constant")
    if theta_true not in _THETA_FUNCTIONS:
        raise ConfigError(
            f"problem.theta_true must be one of {sorted(_THETA_FUNCTIONS)}, got {theta_true!r}"
        )
    theta_params = data.get("theta_params", {}) or {}
    if not isinstance(theta_params, dict):
        raise ConfigError("problem.theta_params must be a mapping")
    theta_params = {str(k): _as_float(v, f"problem.theta_params.{k}") for k, v in theta_params.items()}
    try:
        _THETA_FUNCTIONS[theta_true](0.0, **theta_params)
    except TypeError:
        raise ConfigError(
            f"problem.theta_params {sorted(theta_params)} do not match theta_true={theta_true!r}"
        ) from None

    initial = data.get("initial_condition") or _DEFAULT_INITIAL[kind]
    if initial not in _INITIAL_CONDITIONS:
        raise ConfigError(
            f"problem.initial_condition must be one of {sorted(_INITIAL_CONDITIONS)}"
        )

    source_mu = data.get("source_mu")
    source_gamma = data.get("source_gamma")
    if kind == "heat":
        source_mu = _as_float(_require(data, "source_mu", "problem"), "problem.source_mu")
        source_gamma = _as_float(_require(data, "source_gamma", "problem"), "problem.source_gamma")
        if source_gamma == 0:
            raise ConfigError("problem.source_gamma must be nonzero")
    elif source_mu is not None or source_gamma is not None:
        raise ConfigError("problem.source_mu/source_gamma apply to heat problems only")

    return ProblemBlock(
        kind=kind,
        length=length,
        t_final=t_final,
        velocity=velocity,
        diffusivity=diffusivity,
        theta_true=theta_true,
        theta_params=theta_params,
        initial_condition=initial,
        source_mu=source_mu,
        source_gamma=source_gamma,
    )


def _parse_mesh(data: dict) -> MeshBlock:
    m = _as_int(_require(data, "M", "mesh"), "mesh.M")
    if m < 2:
        raise ConfigError("mesh.M must be at least 2")
    return MeshBlock(intervals=m)


def _parse_observation(data: dict) -> ObservationBlock:
    xs = _parse_locations(_require(data, "x_locations", "observation"), "observation.x_locations")
    dt_obs = _as_float(_require(data, "dt_obs", "observation"), "observation.dt_obs")
    if dt_obs <= 0:
        raise ConfigError("observation.dt_obs must be positive")
    sigma_noise = data.get("sigma_noise")
    noise_rule = data.get("noise_rule")
    if sigma_noise is not None:
        sigma_noise = _as_float(sigma_noise, "observation.sigma_noise")
        if sigma_noise < 0:
            raise ConfigError("observation.sigma_noise must be nonnegative")
        if noise_rule not in (None, "explicit"):
            raise ConfigError("observation.noise_rule conflicts with explicit sigma_noise")
        noise_rule = "explicit"
    else:
        noise_rule = noise_rule or "calibrated"
        if noise_rule != "calibrated":
            raise ConfigError(
                f"observation.noise_rule must be 'calibrated' or 'explicit', got {noise_rule!r}"
            )
    refinement = _as_int(data.get("truth_refinement", 1), "observation.truth_refinement")
    if refinement < 1:
        raise ConfigError("observation.truth_refinement must be a positive integer")
    return ObservationBlock(
        x_locations=xs,
        dt_obs=dt_obs,
        noise_rule=noise_rule,
        sigma_noise=sigma_noise,
        truth_refinement=refinement,
    )


def _parse_prior(value, context: str):
    if isinstance(value, str):
        if value not in ("truth_scaled", "truth_exact"):
            raise ConfigError(
                f"{context} must be 'truth_scaled', 'truth_exact', or a [low, high] pair"
            )
        return value
    return _as_pair(value, context)


def _parse_filter(data: dict) -> FilterBlock:
    n = _as_int(_require(data, "N", "filter"), "filter.N")
    if n < 1:
        raise ConfigError("filter.N must be at least 1")
    delta = _as_float(_require(data, "delta", "filter"), "filter.delta")
    if not (1.0 / 3.0 < delta < 1.0):
        raise ConfigError("filter.delta must lie in (1/3, 1)")
    sigma_c = _as_float(_require(data, "sigma_C", "filter"), "filter.sigma_C")
    sigma_d = _as_float(_require(data, "sigma_D", "filter"), "filter.sigma_D")
    if sigma_c < 0 or sigma_d <= 0:
        raise ConfigError("filter.sigma_C must be >= 0 and filter.sigma_D > 0")
    state_prior = _parse_prior(data.get("state_prior", "truth_scaled"), "filter.state_prior")
    theta_prior = _parse_prior(data.get("theta_prior", "truth_scaled"), "filter.theta_prior")
    sigma_e_prior = _as_pair(data.get("sigmaE_prior", [0.05, 10.0]), "filter.sigmaE_prior")
    if sigma_e_prior[0] < 0:
        raise ConfigError("filter.sigmaE_prior must be nonnegative")
    resampler = data.get("resampler", "multinomial")
    if resampler not in ("multinomial", "systematic"):
        raise ConfigError("filter.resampler must be 'multinomial' or 'systematic'")
    return FilterBlock(
        n_particles=n,
        delta=delta,
        sigma_c=sigma_c,
        sigma_d=sigma_d,
        state_prior=state_prior,
        theta_prior=theta_prior,
        sigma_e_prior=sigma_e_prior,
        resampler=resampler,
    )


def _parse_integrator(data: dict) -> IntegratorBlock:
    k = _as_int(data.get("K", 4), "integrator.K")
    if k < 1:
        raise ConfigError("integrator.K must be a positive integer")
    return IntegratorBlock(substeps=k)


def _cross_validate(problem: ProblemBlock, observation: ObservationBlock):
    for x in observation.x_locations:
        if x < 0 or x > problem.length:
            raise ConfigError(f"observation.x_locations entry {x!r} lies outside [0, L]")
    if observation.dt_obs > problem.t_final:
        raise ConfigError("observation.dt_obs exceeds the time horizon")


def canned_config_names() -> tuple[str, ...]:
    return CANNED_CONFIGS


def load_config(source: str | Path) -> ExperimentConfig:
    """Load a config from a YAML path or a canned config name."""
    if isinstance(source, str) and source in CANNED_CONFIGS:
        text = resources.files("tvpf.configs").joinpath(f"{source}.yaml").read_text()
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"config is not valid YAML: {err}") from None
    return ExperimentConfig.from_dict(data)


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the resolved config, excluding seed and output directory."""
    data = cfg.to_dict()
    data.pop("seed", None)
    data.pop("output_dir", None)
    blob = json.dumps(data, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Builders: resolved config -> domain objects
# ---------------------------------------------------------------------------


def make_problem(cfg: ExperimentConfig) -> ProblemSpec:
    p = cfg.problem
    theta_fn = _THETA_FUNCTIONS[p.theta_true]
    initial = _INITIAL_CONDITIONS[p.initial_condition]
    if p.kind == "advection":
        source = uniform_source_profile
    else:
        source = lambda x: gaussian_source_profile(x, mu=p.source_mu, gamma=p.source_gamma)
    return ProblemSpec(
        kind=p.kind,
        length=p.length,
        t_final=p.t_final,
        velocity=p.velocity,
        diffusivity=p.diffusivity,
        initial_condition=initial,
        source_profile=source,
        theta_true=theta_fn,
        theta_params=dict(p.theta_params),
    )


def make_mesh(cfg: ExperimentConfig) -> SpatialMesh:
    return build_mesh(cfg.problem.length, cfg.mesh.intervals)


def make_system(cfg: ExperimentConfig, problem: ProblemSpec | None = None,
                mesh: SpatialMesh | None = None) -> LinearOdeSystem:
    problem = problem if problem is not None else make_problem(cfg)
    mesh = mesh if mesh is not None else make_mesh(cfg)
    return assemble_system(problem, mesh)


def make_integrator(cfg: ExperimentConfig) -> IntegratorConfig:
    return IntegratorConfig(substeps=cfg.integrator.substeps)


def make_schedule(cfg: ExperimentConfig, mesh: SpatialMesh,
                  system: LinearOdeSystem) -> ObservationSchedule:
    dt = cfg.observation.dt_obs
    t_final = cfg.problem.t_final
    count = int(round(t_final / dt))
    if count < 1 or abs(count * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ConfigError(
            f"observation.dt_obs={dt!r} must tile the horizon T_final={t_final!r}"
        )
    times = np.arange(1, count + 1) * dt
    indices = []
    for x in sorted(cfg.observation.x_locations):
        try:
            indices.append(state_index_for_location(mesh, system.boundary, x))
        except ValueError as err:
            raise ConfigError(f"observation.x_locations: {err}") from None
    indices = np.asarray(indices)
    if np.any(np.diff(indices) <= 0):
        raise ConfigError(
            "observation.x_locations must map to distinct states in increasing order"
        )
    return ObservationSchedule(observed_indices=indices, times=times)


def make_dataset(cfg: ExperimentConfig, seed: int | None = None) -> Dataset:
    """Simulate truth, calibrate (or accept) the noise level, draw observations.

    ``seed`` overrides the config seed when given.  With
    ``truth_refinement`` r > 1, the truth is integrated on a mesh r times
    finer and then restricted to the filter's grid.
    """
    seed = cfg.seed if seed is None else seed
    problem = make_problem(cfg)
    mesh = make_mesh(cfg)
    system = make_system(cfg, problem, mesh)
    schedule = make_schedule(cfg, mesh, system)
    integrator = make_integrator(cfg)

    refine = cfg.observation.truth_refinement
    if refine == 1:
        truth_states, truth_theta = simulate_truth(problem, mesh, integrator, schedule.times)
    else:
        fine_mesh = build_mesh(problem.length, cfg.mesh.intervals * refine)
        fine_states, truth_theta = simulate_truth(problem, fine_mesh, integrator, schedule.times)
        fine_system = assemble_system(problem, fine_mesh)
        fine_cols = np.searchsorted(
            fine_system.state_nodes, system.state_nodes * refine
        )
        truth_states = fine_states[:, fine_cols]

    if cfg.observation.noise_rule == "explicit":
        sigma_noise = float(cfg.observation.sigma_noise)
    else:
        sigma_noise = calibrate_noise(truth_states[1:])
    return generate_observations(truth_states, truth_theta, schedule, sigma_noise, seed)


def scaled_prior_range(truth_value: float) -> tuple[float, float]:
    """Multiplicative prior rule: 0.5x to 1.25x the truth value.

    Ordered so it works for negative truth values; truth values at zero
    (where a multiplicative range collapses) fall back to a small
    symmetric interval.
    """
    c = float(truth_value)
    if abs(c) < _ZERO_TRUTH_CUTOFF:
        return (-_ZERO_TRUTH_HALF_WIDTH, _ZERO_TRUTH_HALF_WIDTH)
    lo, hi = 0.5 * c, 1.25 * c
    return (min(lo, hi), max(lo, hi))


def _prior_ranges(rule, truth_values: np.ndarray) -> np.ndarray:
    truth_values = np.atleast_1d(np.asarray(truth_values, dtype=float))
    if rule == "truth_scaled":
        return np.array([scaled_prior_range(c) for c in truth_values])
    if rule == "truth_exact":
        return np.column_stack([truth_values, truth_values])
    lo, hi = rule
    return np.tile([[lo, hi]], (truth_values.size, 1))


def make_filter_config(cfg: ExperimentConfig, dataset: Dataset,
                       system: LinearOdeSystem, seed: int | None = None) -> FilterConfig:
    """Resolve prior rules against the truth at t = 0 and build the filter config."""
    if dataset.truth_states.shape[1] != system.dim:
        raise ConfigError(
            f"dataset carries {dataset.truth_states.shape[1]} states, system has {system.dim}"
        )
    f = cfg.filter
    state_prior = _prior_ranges(f.state_prior, dataset.truth_states[0])
    theta_prior = _prior_ranges(f.theta_prior, dataset.truth_theta[0])
    drift_prior = np.array([list(f.sigma_e_prior)])
    return FilterConfig(
        n_particles=f.n_particles,
        delta=f.delta,
        sigma_c=f.sigma_c,
        sigma_d=f.sigma_d,
        state_prior=state_prior,
        theta_prior=theta_prior,
        drift_prior=drift_prior,
        seed=cfg.seed if seed is None else seed,
        resampler=f.resampler,
    )
