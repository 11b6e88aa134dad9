"""Spatial meshes and central-difference assembly of linear ODE systems.

The offline half of the pipeline: discretize a 1D transport problem on an
equispaced grid, approximate the spatial derivatives with second-order
central differences, fold in the boundary conditions, and return a banded
linear system du/dt = A u + theta(t) * b ready for time integration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "BoundaryCondition",
    "SpatialMesh",
    "LinearOdeSystem",
    "build_mesh",
    "assemble_advection",
    "assemble_heat",
    "central_diff_check",
    "state_index_for_location",
]

# Observation locations must sit on a node to within this fraction of h.
NODE_MATCH_TOL = 1e-9


class BoundaryCondition(enum.Enum):
    """Domain closure applied when eliminating boundary unknowns."""

    PERIODIC = "periodic"            # u(0,t) = u(L,t); states live on nodes 1..M
    DIRICHLET_ZERO = "dirichlet_zero"  # u(0,t) = u(L,t) = 0; states on nodes 1..M-1


@dataclass(frozen=True)
class SpatialMesh:
    """Equispaced grid x_i = i*h for i = 0..M on [0, L]."""

    length: float
    intervals: int
    spacing: float
    nodes: np.ndarray


def build_mesh(length: float, intervals: int) -> SpatialMesh:
    """Create an equispaced mesh with ``intervals`` cells covering [0, length].

    Endpoints are exact; interior nodes are uniform to rounding.
    """
    if not length > 0:
        raise ValueError(f"mesh length must be positive, got {length}")
    if int(intervals) != intervals or intervals < 2:
        raise ValueError(f"mesh needs an integer number of intervals >= 2, got {intervals}")
    intervals = int(intervals)
    nodes = np.linspace(0.0, float(length), intervals + 1)
    return SpatialMesh(
        length=float(length),
        intervals=intervals,
        spacing=float(length) / intervals,
        nodes=nodes,
    )


@dataclass(frozen=True)
class LinearOdeSystem:
    """Banded semi-discrete system du/dt = A u + theta(t) * b.

    A is tridiagonal, optionally with wrap-around corner entries A[0, d-1]
    and A[d-1, 0] from a periodic closure.  Nothing downstream assumes a
    dense matrix: `apply` and the implicit-step solver work on the bands.

    ``state_nodes[i]`` is the mesh node index carrying state component i.
    """

    dim: int
    diag: np.ndarray
    lower: np.ndarray          # entries A[i+1, i], length d-1
    upper: np.ndarray          # entries A[i, i+1], length d-1
    corner_upper: float        # A[0, d-1]
    corner_lower: float        # A[d-1, 0]
    loading: np.ndarray        # source loading vector b, length d
    state_nodes: np.ndarray    # length d, increasing node indices
    node_count: int            # M + 1
    boundary: BoundaryCondition

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Matrix-vector product A @ u for u of shape (d,) or (d, n)."""
        u = np.asarray(u, dtype=float)
        vec = u.ndim == 1
        U = u[:, None] if vec else u
        if U.shape[0] != self.dim:
            raise ValueError(f"state has leading dimension {U.shape[0]}, expected {self.dim}")
        out = self.diag[:, None] * U
        if self.dim > 1:
            out[:-1] += self.upper[:, None] * U[1:]
            out[1:] += self.lower[:, None] * U[:-1]
            if self.corner_upper != 0.0:
                out[0] += self.corner_upper * U[-1]
            if self.corner_lower != 0.0:
                out[-1] += self.corner_lower * U[0]
        return out[:, 0] if vec else out

    def to_dense(self) -> np.ndarray:
        """Materialize A as a dense matrix (testing / small systems only)."""
        A = np.diag(self.diag)
        if self.dim > 1:
            A += np.diag(self.upper, 1) + np.diag(self.lower, -1)
            A[0, -1] += self.corner_upper
            A[-1, 0] += self.corner_lower
        return A

    def full_field(self, states: np.ndarray) -> np.ndarray:
        """Expand state values (..., d) to all M+1 mesh nodes.

        Periodic closure copies the last state onto node 0 (its alias);
        Dirichlet closure pads zeros at both ends.
        """
        states = np.asarray(states, dtype=float)
        out = np.zeros(states.shape[:-1] + (self.node_count,))
        out[..., self.state_nodes] = states
        if self.boundary is BoundaryCondition.PERIODIC:
            out[..., 0] = states[..., -1]
        return out


def assemble_advection(mesh: SpatialMesh, velocity: float) -> LinearOdeSystem:
    """Central-difference transport operator with periodic closure.

    States are u_1..u_M (node 0 aliases node M).  The resulting matrix is
    circulant and antisymmetric with rows 0.5*v/h * (-1, 0, +1); the
    loading vector is all ones (a spatially uniform source).
    """
    d = mesh.intervals
    c = velocity / (2.0 * mesh.spacing)
    return LinearOdeSystem(
        dim=d,
        diag=np.zeros(d),
        lower=np.full(d - 1, +c),
        upper=np.full(d - 1, -c),
        corner_upper=+c,
        corner_lower=-c,
        loading=np.ones(d),
        state_nodes=np.arange(1, d + 1),
        node_count=mesh.intervals + 1,
        boundary=BoundaryCondition.PERIODIC,
    )


def assemble_heat(
    mesh: SpatialMesh,
    diffusivity: float,
    source_profile: Callable[[float], float],
) -> LinearOdeSystem:
    """Second-difference diffusion operator with zero Dirichlet closure.

    States are the interior nodes u_1..u_{M-1}; the matrix is symmetric
    tridiagonal with diagonal -2*alpha/h^2 and off-diagonals +alpha/h^2.
    The loading vector samples ``source_profile`` at the interior nodes.
    """
    if not diffusivity > 0:
        raise ValueError(f"diffusivity must be positive, got {diffusivity}")
    d = mesh.intervals - 1
    k = diffusivity / mesh.spacing**2
    interior = mesh.nodes[1:-1]
    loading = np.array([float(source_profile(x)) for x in interior])
    return LinearOdeSystem(
        dim=d,
        diag=np.full(d, -2.0 * k),
        lower=np.full(max(d - 1, 0), k),
        upper=np.full(max(d - 1, 0), k),
        corner_upper=0.0,
        corner_lower=0.0,
        loading=loading,
        state_nodes=np.arange(1, d + 1),
        node_count=mesh.intervals + 1,
        boundary=BoundaryCondition.DIRICHLET_ZERO,
    )


def central_diff_check(f: Callable[[float], float], x: float, h: float) -> tuple[float, float]:
    """Pointwise central-difference estimates of f'(x) and f''(x).

    Test utility for validating assembled operators against the raw
    stencils; exact for quadratics, O(h^2) otherwise.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    fp, fm, f0 = f(x + h), f(x - h), f(x)
    return (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / h**2


def state_index_for_location(
    mesh: SpatialMesh, boundary: BoundaryCondition, x: float
) -> int:
    """Map a spatial location to the state-vector index observing it.

    The location must coincide with a mesh node to within
    ``NODE_MATCH_TOL * h``; off-node locations are rejected rather than
    interpolated.  Under periodic closure x=0 aliases x=L.
    """
    h = mesh.spacing
    node = int(round(x / h))
    if abs(x - node * h) > NODE_MATCH_TOL * h:
        raise ValueError(f"location x={x!r} does not lie on a mesh node (h={h!r})")
    if node < 0 or node > mesh.intervals:
        raise ValueError(f"location x={x!r} lies outside the domain [0, {mesh.length!r}]")
    if boundary is BoundaryCondition.PERIODIC:
        if node == 0:
            node = mesh.intervals
        return node - 1
    if node == 0 or node == mesh.intervals:
        raise ValueError(
            f"location x={x!r} is a Dirichlet boundary node and carries no state"
        )
    return node - 1
