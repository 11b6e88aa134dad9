"""Implicit trapezoidal stepping for banded linear ODE systems.

Each substep of du/dt = A u + theta * b solves

    (I - dt/2 A) u' = (I + dt/2 A) u + dt * theta * b,

an A-stable, second-order update that is exact on linear invariants.  The
left-hand matrix is factorized once per step size and then shared by every
right-hand side, so propagating a whole particle ensemble costs a single
O(d) elimination plus O(d) back-substitutions per particle.  Periodic
corner entries are folded in with a rank-one (Sherman-Morrison) correction
on top of a plain tridiagonal elimination:

    M = T + g e_0 v^T,   M x = f  =>  x = y - (v . y)/(1 + v . z) * z

with T tridiagonal, z = T^-1 g e_0-column precomputed at factorization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from tvpf.mesh import LinearOdeSystem

__all__ = [
    "IntegratorConfig",
    "SolverFailure",
    "TrapezoidalFactorization",
    "step_constant_theta",
    "step_varying_theta",
]

_PIVOT_TOL = 1e-13


class SolverFailure(RuntimeError):
    """The implicit system could not be solved (near-singular matrix)."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator settings: K substeps per observation interval."""

    substeps: int = 4
    scheme: str = "trapezoidal"

    def __post_init__(self):
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be a positive integer, got {self.substeps}")
        if self.scheme != "trapezoidal":
            raise ValueError(f"unknown scheme {self.scheme!r}")


class TrapezoidalFactorization:
    """LU factors of (I - dt/2 A) reusable across many right-hand sides."""

    def __init__(self, system: LinearOdeSystem, dt: float):
        if not dt > 0:
            raise ValueError(f"substep must be positive, got {dt}")
        half = 0.5 * dt
        d = system.dim
        b = 1.0 - half * system.diag
        a = -half * system.lower
        c = -half * system.upper
        cu = -half * system.corner_upper
        cl = -half * system.corner_lower

        self.dim = d
        self._cyclic = d > 1 and (cu != 0.0 or cl != 0.0)
        if self._cyclic:
            # Pull the corners out as a rank-one term: M = T + p q^T with
            # p = (gamma, 0, .., 0, cl) and q = (1, 0, .., 0, cu/gamma).
            gamma = -b[0] if b[0] != 0.0 else 1.0
            b = b.copy()
            b[0] -= gamma
            b[-1] -= cl * cu / gamma
            self._vlast = cu / gamma
            self._factor(a, b, c)
            p = np.zeros(d)
            p[0] = gamma
            p[-1] = cl
            self._z = self._thomas(p[:, None])[:, 0]
            self._denom = 1.0 + self._z[0] + self._vlast * self._z[-1]
            if not np.isfinite(self._denom) or abs(self._denom) < _PIVOT_TOL:
                raise SolverFailure("cyclic correction is singular")
        else:
            self._factor(a, b, c)

    def _factor(self, a, b, c):
        d = self.dim
        scale = 1.0 + float(np.max(np.abs(b))) if d else 1.0
        beta = np.empty(d)
        g = np.empty(max(d - 1, 0))
        beta[0] = b[0]
        for i in range(d - 1):
            if abs(beta[i]) < _PIVOT_TOL * scale:
                raise SolverFailure(f"zero pivot at row {i}")
            g[i] = c[i] / beta[i]
            beta[i + 1] = b[i + 1] - a[i] * g[i]
        if abs(beta[d - 1]) < _PIVOT_TOL * scale:
            raise SolverFailure(f"zero pivot at row {d - 1}")
        self._a = a
        self._beta = beta
        self._g = g

    def _thomas(self, F: np.ndarray) -> np.ndarray:
        a, beta, g = self._a, self._beta, self._g
        d = self.dim
        y = np.empty_like(F)
        y[0] = F[0] / beta[0]
        for i in range(1, d):
            y[i] = (F[i] - a[i - 1] * y[i - 1]) / beta[i]
        for i in range(d - 2, -1, -1):
            y[i] -= g[i] * y[i + 1]
        return y

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (I - dt/2 A) x = rhs for rhs of shape (d,) or (d, n)."""
        rhs = np.asarray(rhs, dtype=float)
        vec = rhs.ndim == 1
        F = rhs[:, None] if vec else rhs
        X = self._thomas(F)
        if self._cyclic:
            corr = (X[0] + self._vlast * X[-1]) / self._denom
            X = X - corr[None, :] * self._z[:, None]
        return X[:, 0] if vec else X


def _as_columns(system: LinearOdeSystem, u, theta):
    """Normalize state/amplitude inputs to a (d, n) work layout."""
    u_arr = np.asarray(u, dtype=float)
    batch = u_arr.ndim == 2
    if u_arr.ndim not in (1, 2) or u_arr.shape[-1] != system.dim:
        raise ValueError(
            f"state must have trailing dimension {system.dim}, got shape {u_arr.shape}"
        )
    U = u_arr.T.copy() if batch else u_arr[:, None].copy()
    n = U.shape[1]
    th = np.asarray(theta, dtype=float)
    if th.ndim == 0:
        th = np.full(n, float(th))
    elif th.shape != (n,):
        raise ValueError(f"theta must be scalar or shape ({n},), got {th.shape}")
    return U, th, batch


def step_constant_theta(
    system: LinearOdeSystem,
    u: np.ndarray,
    theta,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
) -> np.ndarray:
    """Advance u from t0 to t1 with the source amplitude held fixed.

    ``u`` may be a single state (d,) or a batch (n, d) of states with a
    matching scalar or (n,) amplitude; the batch shares one factorization.
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    U, th, batch = _as_columns(system, u, theta)
    dt = (t1 - t0) / cfg.substeps
    half = 0.5 * dt
    fact = TrapezoidalFactorization(system, dt)
    src = dt * system.loading[:, None] * th[None, :]
    for _ in range(cfg.substeps):
        U = fact.solve(U + half * system.apply(U) + src)
    return U.T if batch else U[:, 0]


def step_varying_theta(
    system: LinearOdeSystem,
    u: np.ndarray,
    theta_fn: Callable[[float], float],
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
) -> np.ndarray:
    """Advance u from t0 to t1 with a time-dependent source amplitude.

    The amplitude is sampled at each substep midpoint, which keeps the
    overall update second-order accurate.
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    U, _, batch = _as_columns(system, u, 0.0)
    dt = (t1 - t0) / cfg.substeps
    half = 0.5 * dt
    fact = TrapezoidalFactorization(system, dt)
    for k in range(cfg.substeps):
        theta_mid = float(theta_fn(t0 + (k + 0.5) * dt))
        src = dt * system.loading[:, None] * theta_mid
        U = fact.solve(U + half * system.apply(U) + src)
    return U.T if batch else U[:, 0]
