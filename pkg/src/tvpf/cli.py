"""Command-line front end: simulate, estimate, report.

Exit codes: 0 on success, 2 on configuration/validation problems, 3 when
the filter aborts with fully degenerate weights.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from tvpf import io
from tvpf.config import (
    CANNED_CONFIGS,
    ConfigError,
    config_hash,
    load_config,
    make_dataset,
    make_filter_config,
    make_integrator,
    make_mesh,
    make_problem,
    make_schedule,
    make_system,
)
from tvpf.filtering import DegenerateWeightsError, run_filter
from tvpf.synthdata import Dataset
from tvpf.report import (
    DEFAULT_BURN_IN_FRACTION,
    compute_metrics,
    default_probes,
    render_plots,
    sigma_histogram,
)

EXIT_VALIDATION = 2
EXIT_DEGENERATE = 3


def _fail_validation(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_VALIDATION)


def _load(config_src: str):
    try:
        return load_config(config_src)
    except ConfigError as err:
        _fail_validation(str(err))


@click.group()
def main():
    """Estimate time-varying source amplitudes in 1D transport models.

    The workflow is simulate (generate truth and noisy observations),
    estimate (run the particle filter), report (score and summarize).
    Pass --config a YAML path or one of the canned names:
    advection_logistic, heat_sine.
    """


@main.command()
@click.option("--config", "config_src", required=True,
              help=f"Config path or canned name ({', '.join(CANNED_CONFIGS)}).")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
def simulate(config_src: str, out_dir: Path, seed: int | None):
    """Generate ground truth and noisy observations."""
    cfg = _load(config_src)
    seed = cfg.seed if seed is None else seed
    try:
        problem = make_problem(cfg)
        mesh = make_mesh(cfg)
        system = make_system(cfg, problem, mesh)
        schedule = make_schedule(cfg, mesh, system)
        dataset = make_dataset(cfg, seed=seed)
    except (ConfigError, ValueError) as err:
        _fail_validation(str(err))

    out_dir.mkdir(parents=True, exist_ok=True)
    times = np.concatenate(([0.0], schedule.times))
    full = system.full_field(dataset.truth_states)
    io.write_field(out_dir / "truth.csv", times, mesh.nodes, full)
    io.write_series(out_dir / "theta_true.csv", times, dataset.truth_theta)
    observed_x = mesh.nodes[system.state_nodes[schedule.observed_indices]]
    io.write_field(out_dir / "observations.csv", schedule.times, observed_x,
                   dataset.measurements, value_name="y")
    io.write_meta(out_dir / "meta.json", {
        "config_hash": config_hash(cfg),
        "seed": seed,
        "sigma_noise": dataset.sigma_noise,
        "problem_kind": cfg.problem.kind,
        "L": cfg.problem.length,
        "T_final": cfg.problem.t_final,
        "M": cfg.mesh.intervals,
        "dt_obs": cfg.observation.dt_obs,
        "n_observations": int(schedule.times.size),
        "observed_x": [float(x) for x in observed_x],
    })
    click.echo(
        f"wrote {schedule.times.size} observation times x {observed_x.size} locations "
        f"to {out_dir} (noise std {dataset.sigma_noise:.6g})"
    )


def _check_cfl(cfg, mesh):
    if cfg.problem.kind != "advection":
        return
    dt_sub = cfg.observation.dt_obs / cfg.integrator.substeps
    courant = abs(cfg.problem.velocity) * dt_sub / mesh.spacing
    if courant > 1.0:
        click.echo(
            f"warning: advective Courant number {courant:.3g} exceeds 1; the implicit "
            "scheme stays stable but accuracy may suffer (raise integrator.K)",
            err=True,
        )


@main.command()
@click.option("--config", "config_src", required=True,
              help=f"Config path or canned name ({', '.join(CANNED_CONFIGS)}).")
@click.option("--data", "data_dir", required=True,
              type=click.Path(exists=False, file_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--force", is_flag=True, help="Skip the config-hash compatibility check.")
def estimate(config_src: str, data_dir: Path, out_dir: Path, seed: int | None, force: bool):
    """Run the particle filter against a simulated dataset."""
    cfg = _load(config_src)
    seed = cfg.seed if seed is None else seed
    if not data_dir.is_dir():
        _fail_validation(f"data directory {data_dir} does not exist")
    try:
        meta = io.read_meta(data_dir / "meta.json")
    except FileNotFoundError:
        _fail_validation(f"{data_dir} is missing meta.json (not a simulate output?)")
    if not force and meta.get("config_hash") != config_hash(cfg):
        _fail_validation(
            "config hash does not match the data directory "
            "(rerun simulate, or pass --force to override)"
        )

    try:
        problem = make_problem(cfg)
        mesh = make_mesh(cfg)
        system = make_system(cfg, problem, mesh)
        schedule = make_schedule(cfg, mesh, system)
        dataset = _load_dataset(data_dir, cfg, mesh, system, schedule)
        filter_cfg = make_filter_config(cfg, dataset, system, seed=seed)
        integrator = make_integrator(cfg)
    except (ConfigError, ValueError) as err:
        _fail_validation(str(err))

    _check_cfl(cfg, mesh)
    try:
        summary = run_filter(system, dataset, filter_cfg, integrator)
    except DegenerateWeightsError as err:
        click.echo(
            f"error: particle weights degenerated at observation step {err.step}; "
            "consider raising filter.sigma_D or filter.N",
            err=True,
        )
        sys.exit(EXIT_DEGENERATE)

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_estimates(out_dir, cfg, mesh, system, summary)
    click.echo(f"assimilated {schedule.times.size} observations; wrote estimates to {out_dir}")


def _load_dataset(data_dir: Path, cfg, mesh, system, schedule):
    """Rebuild a Dataset from a simulate output directory."""
    _, _, full = io.read_field(data_dir / "truth.csv")
    _, truth_theta = io.read_series(data_dir / "theta_true.csv")
    _, _, measurements = io.read_field(data_dir / "observations.csv", value_name="y")
    meta = io.read_meta(data_dir / "meta.json")
    truth_states = full[:, system.state_nodes]
    return Dataset(
        schedule=schedule,
        measurements=measurements,
        sigma_noise=float(meta["sigma_noise"]),
        truth_states=truth_states,
        truth_theta=truth_theta,
    )


def _write_estimates(out_dir: Path, cfg, mesh, system, summary):
    state_xs = mesh.nodes[system.state_nodes]
    theta_bands = {
        "mean": summary.theta_mean[:, 0],
        "lo68": summary.theta_lo68[:, 0],
        "hi68": summary.theta_hi68[:, 0],
        "lo95": summary.theta_lo95[:, 0],
        "hi95": summary.theta_hi95[:, 0],
    }
    io.write_theta_bands(out_dir / "estimate_theta.csv", summary.times, theta_bands)
    state_bands = {
        "mean": summary.state_mean,
        "lo68": summary.state_lo68,
        "hi68": summary.state_hi68,
        "lo95": summary.state_lo95,
        "hi95": summary.state_hi95,
    }
    io.write_state_bands(out_dir / "estimate_states.csv", summary.times, state_xs, state_bands)
    io.write_weighted_sample(
        out_dir / "sigmaE_posterior.csv",
        summary.final_drift_values[:, 0],
        summary.final_weights,
    )
    full_mean = system.full_field(summary.state_mean)
    io.write_field(out_dir / "estimate_field.csv", summary.times, mesh.nodes, full_mean)


@main.command()
@click.option("--data", "data_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@click.option("--est", "est_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@click.option("--burn-in", "burn_in", type=float, default=DEFAULT_BURN_IN_FRACTION,
              show_default=True, help="Fraction of the horizon to drop before scoring.")
@click.option("--probe", "probes", type=float, multiple=True,
              help="Probe location(s); defaults depend on the problem kind.")
@click.option("--plots", is_flag=True, help="Also render PNG plots (needs matplotlib).")
def report(data_dir: Path, est_dir: Path, out_dir: Path, burn_in: float,
           probes: tuple[float, ...], plots: bool):
    """Score an estimate against stored truth and write summary artifacts."""
    for d in (data_dir, est_dir):
        if not d.is_dir():
            _fail_validation(f"directory {d} does not exist")
    try:
        meta = io.read_meta(data_dir / "meta.json")
        times, nodes, truth_full = io.read_field(data_dir / "truth.csv")
        _, truth_theta = io.read_series(data_dir / "theta_true.csv")
        est_times, theta_bands = io.read_theta_bands(est_dir / "estimate_theta.csv")
        _, state_xs, state_bands = io.read_state_bands(est_dir / "estimate_states.csv")
        drift_values, drift_weights = io.read_weighted_sample(est_dir / "sigmaE_posterior.csv")
    except (FileNotFoundError, ValueError) as err:
        _fail_validation(str(err))

    if times.size != est_times.size or not np.allclose(times, est_times):
        _fail_validation("estimate and data directories cover different time grids")

    # Restrict the full-node truth field to the state locations.
    cols = [int(np.argmin(np.abs(nodes - x))) for x in state_xs]
    truth_states = truth_full[:, cols]

    if not probes:
        probes = default_probes(meta["problem_kind"])
    try:
        metrics = compute_metrics(
            times, truth_theta,
            theta_bands["mean"], theta_bands["lo95"], theta_bands["hi95"],
            truth_states,
            state_bands["mean"], state_bands["lo95"], state_bands["hi95"],
            state_xs, probes, drift_values, drift_weights,
            burn_in_fraction=burn_in,
        )
    except ValueError as err:
        _fail_validation(str(err))

    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_field(out_dir / "error_field.csv", times, state_xs,
                   np.abs(truth_states - state_bands["mean"]), value_name="abs_error")
    edges, masses = sigma_histogram(drift_values, drift_weights)
    io.write_histogram(out_dir / "sigmaE_histogram.csv", edges, masses)
    io.write_meta(out_dir / "metrics.json", metrics)

    if plots:
        render_plots(out_dir, times, truth_theta, theta_bands, state_xs,
                     truth_states, state_bands, probes, drift_values, drift_weights)

    click.echo(
        f"theta RMSE (post burn-in): {metrics['theta_rmse_post_burn_in']:.4g}; "
        f"theta 95% coverage: {metrics['theta_coverage95_post_burn_in']:.3f}; "
        f"normalized field error: {metrics['normalized_field_error']:.4g}"
    )


if __name__ == "__main__":
    main()
