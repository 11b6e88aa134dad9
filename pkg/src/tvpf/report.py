"""Scoring of filter output against stored truth, and optional plots.

Metrics follow a fixed recipe: a burn-in fraction of the horizon is
dropped (default 10%), amplitude tracking is scored by RMSE and by the
fraction of steps whose 95% band contains the truth, state tracking by
band coverage at probe locations, and field reconstruction by the mean
absolute error normalized by the RMS of the truth field.
"""

from __future__ import annotations

import numpy as np

from tvpf.stats import WeightedSample, coverage, error_field, rmse, weighted_mean, weighted_quantile

__all__ = [
    "DEFAULT_BURN_IN_FRACTION",
    "default_probes",
    "compute_metrics",
    "sigma_histogram",
    "render_plots",
]

DEFAULT_BURN_IN_FRACTION = 0.1
DEFAULT_HISTOGRAM_BINS = 30

# Probe trajectories scored per problem family: one observed location and
# one unobserved location each.
_PROBES = {"advection": (2.0, 3.3), "heat": (0.5, 1.5)}


def default_probes(kind: str) -> tuple[float, ...]:
    try:
        return _PROBES[kind]
    except KeyError:
        raise ValueError(f"no default probes for problem kind {kind!r}") from None


def _probe_column(state_xs: np.ndarray, probe: float) -> int:
    gap = np.abs(state_xs - probe)
    col = int(np.argmin(gap))
    spacing = np.min(np.diff(np.sort(state_xs))) if state_xs.size > 1 else 1.0
    if gap[col] > 1e-6 * spacing:
        raise ValueError(f"probe x={probe!r} does not match any state location")
    return col


def compute_metrics(
    times: np.ndarray,
    truth_theta: np.ndarray,
    theta_mean: np.ndarray,
    theta_lo95: np.ndarray,
    theta_hi95: np.ndarray,
    truth_states: np.ndarray,
    state_mean: np.ndarray,
    state_lo95: np.ndarray,
    state_hi95: np.ndarray,
    state_xs: np.ndarray,
    probes,
    drift_values: np.ndarray,
    drift_weights: np.ndarray,
    burn_in_fraction: float = DEFAULT_BURN_IN_FRACTION,
) -> dict:
    """Assemble the scoring summary as a JSON-ready dict."""
    times = np.asarray(times, dtype=float)
    horizon = times[-1]
    keep = times >= burn_in_fraction * horizon

    theta_err = rmse(theta_mean, truth_theta)
    theta_err_burn = rmse(theta_mean[keep], truth_theta[keep])
    theta_cov = coverage(truth_theta[keep], theta_lo95[keep], theta_hi95[keep])

    probe_cov = {}
    for probe in probes:
        col = _probe_column(np.asarray(state_xs, dtype=float), probe)
        probe_cov[f"{probe:g}"] = coverage(
            truth_states[keep, col], state_lo95[keep, col], state_hi95[keep, col]
        )

    abs_err = error_field(truth_states, state_mean)
    truth_rms = float(np.sqrt(np.mean(truth_states**2)))
    mean_abs = float(abs_err.mean())

    sample = WeightedSample(np.asarray(drift_values, dtype=float).ravel(), drift_weights)
    drift_lo = weighted_quantile(sample, 0.025)
    drift_hi = weighted_quantile(sample, 0.975)

    return {
        "burn_in_fraction": float(burn_in_fraction),
        "theta_rmse": theta_err,
        "theta_rmse_post_burn_in": theta_err_burn,
        "theta_coverage95_post_burn_in": theta_cov,
        "probe_coverage95_post_burn_in": probe_cov,
        "drift_std_mean_final": weighted_mean(sample),
        "drift_std_interval95_final": [drift_lo, drift_hi],
        "drift_std_interval95_width_final": drift_hi - drift_lo,
        "field_mean_abs_error": mean_abs,
        "truth_field_rms": truth_rms,
        "normalized_field_error": mean_abs / truth_rms if truth_rms > 0 else float("inf"),
    }


def sigma_histogram(drift_values, drift_weights, bins: int = DEFAULT_HISTOGRAM_BINS):
    """Weighted histogram of the final drift-std sample: (edges, masses)."""
    sample = WeightedSample(np.asarray(drift_values, dtype=float).ravel(), drift_weights)
    from tvpf.stats import weighted_histogram

    return weighted_histogram(sample, bins)


def render_plots(
    out_dir,
    times,
    truth_theta,
    theta_bands: dict,
    state_xs,
    truth_states,
    state_bands: dict,
    probes,
    drift_values,
    drift_weights,
):
    """Static PNG renderings of the main summaries (requires matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir.mkdir(parents=True, exist_ok=True)
    times = np.asarray(times, dtype=float)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.fill_between(times, theta_bands["lo95"], theta_bands["hi95"],
                    color="0.85", label="95% band")
    ax.fill_between(times, theta_bands["lo68"], theta_bands["hi68"],
                    color="0.6", label="68% band")
    ax.plot(times, theta_bands["mean"], "r-", lw=1.5, label="filter mean")
    ax.plot(times, truth_theta, "k--", lw=1.2, label="truth")
    ax.set_xlabel("t")
    ax.set_ylabel("source amplitude")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_dir / "theta_bands.png", dpi=150)
    plt.close(fig)

    fig, axes = plt.subplots(1, len(probes), figsize=(5 * len(probes), 3.5), squeeze=False)
    for ax, probe in zip(axes[0], probes):
        col = _probe_column(np.asarray(state_xs, dtype=float), probe)
        ax.fill_between(times, state_bands["lo95"][:, col], state_bands["hi95"][:, col],
                        color="0.85")
        ax.fill_between(times, state_bands["lo68"][:, col], state_bands["hi68"][:, col],
                        color="0.6")
        ax.plot(times, state_bands["mean"][:, col], "r-", lw=1.2)
        ax.plot(times, truth_states[:, col], "k--", lw=1.0)
        ax.set_title(f"x = {probe:g}")
        ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out_dir / "probe_trajectories.png", dpi=150)
    plt.close(fig)

    edges, masses = sigma_histogram(drift_values, drift_weights)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(edges[:-1], masses, width=np.diff(edges), align="edge", color="0.4")
    ax.set_xlabel("drift std")
    ax.set_ylabel("posterior mass")
    fig.tight_layout()
    fig.savefig(out_dir / "drift_std_hist.png", dpi=150)
    plt.close(fig)

    err = np.abs(truth_states - state_bands["mean"])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    pcm = ax.pcolormesh(times, np.asarray(state_xs, dtype=float), err.T, shading="auto")
    fig.colorbar(pcm, ax=ax, label="|error|")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    fig.tight_layout()
    fig.savefig(out_dir / "error_field.png", dpi=150)
    plt.close(fig)
