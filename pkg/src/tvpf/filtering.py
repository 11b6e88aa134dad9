"""Joint particle tracking of states, a drifting source amplitude, and the
amplitude's random-walk scale.

The filter carries N particles of (state vector, amplitude theta, drift
std sigma) with normalized weights.  Each assimilation cycle, in order:
shrink the drift-std particles toward their weighted mean (discount-factor
shrinkage), propagate states through the forward model with each
particle's amplitude frozen over the interval, score predictor fitness
against the new measurement, resample auxiliary indices from the fitness,
gather all particle arrays, innovate states, jitter the drift stds with
variance compensating the shrinkage (r^2 = 1 - a^2), random-walk the
amplitudes using each particle's own drift std, reweight by the
innovated-vs-predictor likelihood ratio, and refresh the drift-std
weighted moments.

All randomness comes from per-(step, purpose) substreams spawned from one
seed, with each particle consuming its own row of the vectorized draws,
so reruns are bit-identical no matter how the per-particle work is
scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tvpf.integrate import IntegratorConfig, step_constant_theta
from tvpf.mesh import LinearOdeSystem
from tvpf.stats import BAND_68, BAND_95, weighted_quantiles
from tvpf.synthdata import Dataset

__all__ = [
    "FilterConfig",
    "Ensemble",
    "FilterSummary",
    "DegenerateWeightsError",
    "shrinkage_factor",
    "init_ensemble",
    "shrink_drift",
    "propagate_states",
    "fitness_weights",
    "resample_indices",
    "systematic_indices",
    "reshuffle",
    "innovate_states",
    "jitter_drift",
    "propagate_tvp",
    "reweight",
    "update_drift_moments",
    "run_filter",
]

DEFAULT_SIGMA_FLOOR = 1e-6

# Substream purposes, keyed by (step, purpose) from the config seed.
_DRAW_INIT = 0
_DRAW_RESAMPLE = 1
_DRAW_STATE = 2
_DRAW_DRIFT = 3
_DRAW_TVP = 4


class DegenerateWeightsError(RuntimeError):
    """Every particle weight underflowed; the filter cannot continue."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


def shrinkage_factor(delta: float) -> float:
    """Shrinkage a = (3 delta - 1) / (2 delta) for discount delta in (1/3, 1)."""
    return (3.0 * delta - 1.0) / (2.0 * delta)


def _as_ranges(name: str, ranges) -> np.ndarray:
    arr = np.asarray(ranges, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a (k, 2) array of [low, high] rows")
    if np.any(arr[:, 0] > arr[:, 1]):
        raise ValueError(f"{name} has a lower bound above its upper bound")
    return arr


@dataclass(frozen=True)
class FilterConfig:
    """Tuning knobs and priors for one filter run.

    Priors are per-component uniform ranges; degenerate [c, c] rows pin a
    component exactly (used by the deterministic sanity configs).
    """

    n_particles: int
    delta: float
    sigma_c: float                 # state innovation std
    sigma_d: float                 # observation noise std used by the likelihood
    state_prior: np.ndarray        # (d, 2)
    theta_prior: np.ndarray        # (p, 2)
    drift_prior: np.ndarray        # (p, 2), uniform range for the drift std
    seed: int = 0
    resampler: str = "multinomial"
    sigma_floor: float = DEFAULT_SIGMA_FLOOR

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ValueError(f"need at least one particle, got {self.n_particles}")
        if not (1.0 / 3.0 < self.delta < 1.0):
            raise ValueError(f"discount factor must lie in (1/3, 1), got {self.delta}")
        if self.sigma_c < 0:
            raise ValueError("state innovation std must be nonnegative")
        if not self.sigma_d > 0:
            raise ValueError("observation noise std must be positive")
        if self.resampler not in ("multinomial", "systematic"):
            raise ValueError(f"unknown resampler {self.resampler!r}")
        if not self.sigma_floor > 0:
            raise ValueError("drift-std floor must be positive")
        object.__setattr__(self, "state_prior", _as_ranges("state_prior", self.state_prior))
        object.__setattr__(self, "theta_prior", _as_ranges("theta_prior", self.theta_prior))
        drift = _as_ranges("drift_prior", self.drift_prior)
        if np.any(drift[:, 0] < 0):
            raise ValueError("drift-std prior must be nonnegative")
        object.__setattr__(self, "drift_prior", drift)

    @property
    def state_dim(self) -> int:
        return self.state_prior.shape[0]

    @property
    def theta_dim(self) -> int:
        return self.theta_prior.shape[0]


@dataclass(frozen=True)
class Ensemble:
    """One weighted particle population plus cached drift-std moments."""

    states: np.ndarray        # (N, d)
    thetas: np.ndarray        # (N, p)
    drift_sigmas: np.ndarray  # (N, p), nonnegative
    weights: np.ndarray       # (N,), normalized
    drift_mean: np.ndarray    # (p,)
    drift_cov: np.ndarray     # (p, p)

    def __post_init__(self):
        n = self.states.shape[0]
        p = self.thetas.shape[1]
        if self.states.ndim != 2 or self.thetas.shape[0] != n:
            raise ValueError("states and thetas must have one row per particle")
        if self.drift_sigmas.shape != (n, p):
            raise ValueError("drift stds must match the theta layout")
        if self.weights.shape != (n,):
            raise ValueError("weights must be one per particle")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {self.weights.sum()!r}")
        if np.any(self.drift_sigmas < 0):
            raise ValueError("drift stds must be nonnegative")
        if self.drift_mean.shape != (p,) or self.drift_cov.shape != (p, p):
            raise ValueError("drift moments must have shapes (p,) and (p, p)")

    @property
    def n_particles(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class FilterSummary:
    """Per-step weighted means and credible bounds, plus the final drift-std
    posterior sample.

    Row 0 of every array summarizes the prior ensemble at t = 0; row j
    summarizes the post-reweight posterior at observation time j.
    """

    times: np.ndarray         # (J+1,)
    state_mean: np.ndarray    # (J+1, d)
    state_lo68: np.ndarray
    state_hi68: np.ndarray
    state_lo95: np.ndarray
    state_hi95: np.ndarray
    theta_mean: np.ndarray    # (J+1, p)
    theta_lo68: np.ndarray
    theta_hi68: np.ndarray
    theta_lo95: np.ndarray
    theta_hi95: np.ndarray
    drift_mean: np.ndarray    # (J+1, p)
    drift_lo68: np.ndarray
    drift_hi68: np.ndarray
    drift_lo95: np.ndarray
    drift_hi95: np.ndarray
    final_drift_values: np.ndarray  # (N, p)
    final_weights: np.ndarray       # (N,)


def _substream(seed: int, step: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(step, purpose)))


def _uniform(rng: np.random.Generator, ranges: np.ndarray, n: int) -> np.ndarray:
    return rng.uniform(ranges[:, 0], ranges[:, 1], size=(n, ranges.shape[0]))


def init_ensemble(cfg: FilterConfig, rng: np.random.Generator) -> Ensemble:
    """Draw the initial population from the per-component uniform priors."""
    n = cfg.n_particles
    states = _uniform(rng, cfg.state_prior, n)
    thetas = _uniform(rng, cfg.theta_prior, n)
    sigmas = _uniform(rng, cfg.drift_prior, n)
    weights = np.full(n, 1.0 / n)
    mean, cov = update_drift_moments(sigmas, weights)
    return Ensemble(states, thetas, sigmas, weights, mean, cov)


def shrink_drift(ensemble: Ensemble, delta: float) -> np.ndarray:
    """Pull every drift-std particle toward the weighted mean.

    The linear map a*sigma + (1-a)*mean leaves the weighted mean itself
    unchanged while contracting the spread by a.
    """
    a = shrinkage_factor(delta)
    return a * ensemble.drift_sigmas + (1.0 - a) * ensemble.drift_mean[None, :]


def propagate_states(
    ensemble: Ensemble,
    system: LinearOdeSystem,
    integrator: IntegratorConfig,
    t0: float,
    t1: float,
) -> np.ndarray:
    """Push all state particles through the forward model.

    Each particle's amplitude is held at its current value across the
    interval; the whole batch shares a single implicit factorization.
    """
    return step_constant_theta(
        system, ensemble.states, ensemble.thetas[:, 0], t0, t1, integrator
    )


def _normalize_log(log_w: np.ndarray, step: int | None) -> np.ndarray:
    peak = np.max(log_w)
    if not np.isfinite(peak):
        raise DegenerateWeightsError(
            "all particle weights vanished (non-finite likelihoods)", step=step
        )
    w = np.exp(log_w - peak)
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        raise DegenerateWeightsError("all particle weights vanished", step=step)
    return w / total


def _sq_residuals(states: np.ndarray, y: np.ndarray, observed: np.ndarray) -> np.ndarray:
    resid = y[None, :] - states[:, observed]
    return np.einsum("nm,nm->n", resid, resid)


def fitness_weights(
    weights: np.ndarray,
    predictor_states: np.ndarray,
    y: np.ndarray,
    observed_indices: np.ndarray,
    sigma_d: float,
    step: int | None = None,
) -> np.ndarray:
    """Likelihood-weighted fitness g_n = w_n * N(y; G u_n, sigma_d^2 I), normalized.

    Everything runs in the log domain with peak subtraction, so shared
    constants cancel and moderate observation counts cannot underflow.
    """
    sq = _sq_residuals(predictor_states, y, observed_indices)
    with np.errstate(divide="ignore"):
        log_g = np.log(weights) - sq / (2.0 * sigma_d**2)
    return _normalize_log(log_g, step)


def resample_indices(g: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Multinomial draws with replacement: P(index = k) = g_k."""
    return rng.choice(g.size, size=g.size, replace=True, p=g)


def systematic_indices(g: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Systematic (low-variance) resampling; opt-in via the config."""
    n = g.size
    positions = (rng.random() + np.arange(n)) / n
    return np.minimum(np.searchsorted(np.cumsum(g), positions), n - 1)


def reshuffle(
    ensemble: Ensemble,
    shrunk_sigmas: np.ndarray,
    predictor_states: np.ndarray,
    indices: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gather states, amplitudes, shrunk drift stds, and predictors by index."""
    indices = np.asarray(indices)
    if indices.shape != (ensemble.n_particles,):
        raise ValueError("need exactly one auxiliary index per particle")
    if np.any(indices < 0) or np.any(indices >= ensemble.n_particles):
        raise ValueError("auxiliary index out of range")
    return (
        ensemble.states[indices],
        ensemble.thetas[indices],
        shrunk_sigmas[indices],
        predictor_states[indices],
    )


def innovate_states(
    predictor_states: np.ndarray, sigma_c: float, rng: np.random.Generator
) -> np.ndarray:
    """Add isotropic Gaussian innovation noise to the predictor states."""
    return predictor_states + rng.normal(0.0, sigma_c, size=predictor_states.shape)


def jitter_drift(
    shrunk_sigmas: np.ndarray,
    drift_cov: np.ndarray,
    a: float,
    rng: np.random.Generator,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> np.ndarray:
    """Jitter shrunk drift stds with covariance (1 - a^2) * drift_cov.

    The jitter variance exactly restores the spread removed by shrinkage.
    A zero covariance is a no-op (the values pass through untouched, so
    exactly-pinned drift stds stay pinned); otherwise jittered values are
    reflected to their magnitude and floored at ``sigma_floor`` to keep
    the random-walk scale positive.
    """
    r2 = 1.0 - a * a
    cov = np.asarray(drift_cov, dtype=float)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.clip(eigvals, 0.0, None)
    if r2 * eigvals.max(initial=0.0) <= 0.0:
        return shrunk_sigmas
    scale = np.sqrt(r2 * eigvals)
    z = rng.standard_normal(shrunk_sigmas.shape)
    jittered = shrunk_sigmas + (z * scale[None, :]) @ eigvecs.T
    return np.maximum(sigma_floor, np.abs(jittered))


def propagate_tvp(
    thetas: np.ndarray, drift_sigmas: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Random-walk the amplitude particles, each with its own drift std."""
    return thetas + drift_sigmas * rng.standard_normal(thetas.shape)


def reweight(
    states: np.ndarray,
    predictor_states: np.ndarray,
    y: np.ndarray,
    observed_indices: np.ndarray,
    sigma_d: float,
    step: int | None = None,
) -> np.ndarray:
    """Normalized likelihood ratio of innovated states to their predictors.

    The predictor likelihood already entered through the resampling
    fitness, so only the ratio remains; Gaussian constants cancel exactly.
    """
    sq_new = _sq_residuals(states, y, observed_indices)
    sq_pred = _sq_residuals(predictor_states, y, observed_indices)
    log_w = (sq_pred - sq_new) / (2.0 * sigma_d**2)
    return _normalize_log(log_w, step)


def update_drift_moments(
    drift_sigmas: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean and covariance of the drift-std sample (no bias correction)."""
    mean = weights @ drift_sigmas
    dev = drift_sigmas - mean[None, :]
    cov = np.einsum("n,ni,nj->ij", weights, dev, dev)
    return mean, 0.5 * (cov + cov.T)


_QS = BAND_68 + BAND_95  # (0.16, 0.84, 0.025, 0.975)


class _SummaryTrace:
    def __init__(self):
        self.times = []
        self.rows = {name: [] for name in ("state", "theta", "drift")}

    def record(self, t: float, ensemble: Ensemble):
        self.times.append(t)
        for name, values in (
            ("state", ensemble.states),
            ("theta", ensemble.thetas),
            ("drift", ensemble.drift_sigmas),
        ):
            mean = ensemble.weights @ values
            lo68, hi68, lo95, hi95 = weighted_quantiles(values, ensemble.weights, _QS)
            self.rows[name].append((mean, lo68, hi68, lo95, hi95))

    def build(self, final: Ensemble) -> FilterSummary:
        fields = {"times": np.asarray(self.times)}
        for name, rows in self.rows.items():
            stacked = [np.stack([row[i] for row in rows]) for i in range(5)]
            for suffix, arr in zip(("mean", "lo68", "hi68", "lo95", "hi95"), stacked):
                fields[f"{name}_{suffix}"] = arr
        return FilterSummary(
            final_drift_values=final.drift_sigmas.copy(),
            final_weights=final.weights.copy(),
            **fields,
        )


def run_filter(
    system: LinearOdeSystem,
    dataset: Dataset,
    cfg: FilterConfig,
    integrator: IntegratorConfig,
) -> FilterSummary:
    """Assimilate every observation in order and summarize each posterior.

    Raises DegenerateWeightsError (with the offending step index) if every
    particle's weight underflows at some observation.
    """
    schedule = dataset.schedule
    if cfg.state_dim != system.dim:
        raise ValueError(
            f"state prior has dimension {cfg.state_dim}, system has {system.dim}"
        )
    if cfg.theta_dim != 1:
        raise ValueError("the scalar-amplitude forward model needs a 1D theta prior")
    if schedule.observed_indices[-1] >= system.dim:
        raise ValueError("observed index exceeds the state dimension")

    a = shrinkage_factor(cfg.delta)
    pick = resample_indices if cfg.resampler == "multinomial" else systematic_indices

    ensemble = init_ensemble(cfg, _substream(cfg.seed, 0, _DRAW_INIT))
    trace = _SummaryTrace()
    trace.record(0.0, ensemble)

    t_prev = 0.0
    for j, t_j in enumerate(schedule.times, start=1):
        y = dataset.measurements[j - 1]
        shrunk = shrink_drift(ensemble, cfg.delta)
        predictors = propagate_states(ensemble, system, integrator, t_prev, float(t_j))
        g = fitness_weights(
            ensemble.weights, predictors, y, schedule.observed_indices, cfg.sigma_d, step=j
        )
        indices = pick(g, _substream(cfg.seed, j, _DRAW_RESAMPLE))
        _, thetas_r, shrunk_r, predictors_r = reshuffle(ensemble, shrunk, predictors, indices)
        states = innovate_states(predictors_r, cfg.sigma_c, _substream(cfg.seed, j, _DRAW_STATE))
        sigmas = jitter_drift(
            shrunk_r, ensemble.drift_cov, a, _substream(cfg.seed, j, _DRAW_DRIFT), cfg.sigma_floor
        )
        thetas = propagate_tvp(thetas_r, sigmas, _substream(cfg.seed, j, _DRAW_TVP))
        weights = reweight(
            states, predictors_r, y, schedule.observed_indices, cfg.sigma_d, step=j
        )
        drift_mean, drift_cov = update_drift_moments(sigmas, weights)
        ensemble = Ensemble(states, thetas, sigmas, weights, drift_mean, drift_cov)
        trace.record(float(t_j), ensemble)
        t_prev = float(t_j)

    return trace.build(ensemble)
