"""Benchmark problem definitions.

Two 1D transport problems drive everything: a periodic advection equation
with a spatially uniform source whose amplitude ramps up along a logistic
curve, and a heat equation with a Gaussian-in-space source whose amplitude
oscillates sinusoidally.  Each is captured as plain data plus pure
functions so the same definition feeds both truth simulation and the
filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ProblemSpec",
    "theta_logistic",
    "theta_sine",
    "theta_constant",
    "initial_advection",
    "initial_heat",
    "gaussian_source_profile",
    "uniform_source_profile",
    "advection_benchmark",
    "heat_benchmark",
]


def theta_logistic(t, scale=2.0, rate=0.5, center=7.5, offset=0.1):
    """Shifted logistic ramp: scale / (1 + exp(-rate (t - center))) + offset."""
    t = np.asarray(t, dtype=float)
    # exp may overflow to inf far in the past; the limit 0 is still correct
    with np.errstate(over="ignore"):
        return scale / (1.0 + np.exp(-rate * (t - center))) + offset


def theta_sine(t, amplitude=0.5, angular_freq=math.pi / 6.0, offset=0.5):
    """Sinusoidal amplitude: amplitude * sin(angular_freq * t) + offset."""
    t = np.asarray(t, dtype=float)
    return amplitude * np.sin(angular_freq * t) + offset


def theta_constant(t, value=1.0):
    """Time-invariant amplitude (handy for sanity and oracle runs)."""
    return value + 0.0 * np.asarray(t, dtype=float)


def initial_advection(x, center=2.0, width=0.5):
    """Gaussian pulse exp(-((x - center)/width)^2)."""
    x = np.asarray(x, dtype=float)
    return np.exp(-(((x - center) / width) ** 2))


def initial_heat(x, length=3.0):
    """Parabolic arch x (length - x), zero at both endpoints."""
    x = np.asarray(x, dtype=float)
    return x * (length - x)


def initial_zero(x):
    x = np.asarray(x, dtype=float)
    return 0.0 * x


def gaussian_source_profile(x, mu, gamma):
    """Spatial source shape exp(-(x - mu)^2 / gamma^2)."""
    if gamma == 0:
        raise ValueError("source width gamma must be nonzero")
    x = np.asarray(x, dtype=float)
    return np.exp(-(((x - mu) / gamma) ** 2))


def uniform_source_profile(x):
    """Spatially uniform source shape (identically one)."""
    return 1.0 + 0.0 * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class ProblemSpec:
    """A complete benchmark problem: domain, coefficients, and truth functions.

    ``velocity`` applies to advection problems, ``diffusivity`` to heat
    problems; the unused one is None.  ``theta_true`` is the reference
    amplitude path used only for data generation and scoring.
    """

    kind: str
    length: float
    t_final: float
    velocity: float | None
    diffusivity: float | None
    initial_condition: Callable
    source_profile: Callable
    theta_true: Callable
    theta_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("advection", "heat"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if not self.length > 0:
            raise ValueError(f"domain length must be positive, got {self.length}")
        if not self.t_final > 0:
            raise ValueError(f"final time must be positive, got {self.t_final}")
        if self.kind == "advection" and self.velocity is None:
            raise ValueError("advection problem needs a velocity")
        if self.kind == "heat":
            if self.diffusivity is None or not self.diffusivity > 0:
                raise ValueError("heat problem needs a positive diffusivity")
            for endpoint in (0.0, self.length):
                value = float(self.initial_condition(endpoint))
                if abs(value) > 1e-12 * max(1.0, self.length**2):
                    raise ValueError(
                        f"heat initial condition must vanish at x={endpoint}, got {value}"
                    )


def advection_benchmark(theta_true: Callable | None = None, theta_params: dict | None = None) -> ProblemSpec:
    """Periodic advection on [0, 5] over t in [0, 15], v = 0.2.

    Gaussian initial pulse centered at x = 2 with width 0.5; the default
    amplitude path is the logistic ramp.
    """
    return ProblemSpec(
        kind="advection",
        length=5.0,
        t_final=15.0,
        velocity=0.2,
        diffusivity=None,
        initial_condition=initial_advection,
        source_profile=uniform_source_profile,
        theta_true=theta_true if theta_true is not None else theta_logistic,
        theta_params=dict(theta_params or {}),
    )


def heat_benchmark(theta_true: Callable | None = None, theta_params: dict | None = None) -> ProblemSpec:
    """Dirichlet heat problem on [0, 3] over t in [0, 50], alpha = 0.2.

    Parabolic initial arch; Gaussian source shape centered at x = 1.5 with
    width 1; the default amplitude path is the sinusoid.
    """
    return ProblemSpec(
        kind="heat",
        length=3.0,
        t_final=50.0,
        velocity=None,
        diffusivity=0.2,
        initial_condition=initial_heat,
        source_profile=lambda x: gaussian_source_profile(x, mu=1.5, gamma=1.0),
        theta_true=theta_true if theta_true is not None else theta_sine,
        theta_params=dict(theta_params or {}),
    )
