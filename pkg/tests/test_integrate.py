import math

import numpy as np
import pytest

from tvpf.integrate import (
    IntegratorConfig,
    SolverFailure,
    TrapezoidalFactorization,
    step_constant_theta,
    step_varying_theta,
)
from tvpf.mesh import (
    BoundaryCondition,
    LinearOdeSystem,
    assemble_advection,
    assemble_heat,
    build_mesh,
)


def scalar_system(a, b=0.0):
    return LinearOdeSystem(
        dim=1,
        diag=np.array([a]),
        lower=np.zeros(0),
        upper=np.zeros(0),
        corner_upper=0.0,
        corner_lower=0.0,
        loading=np.array([b]),
        state_nodes=np.array([1]),
        node_count=3,
        boundary=BoundaryCondition.DIRICHLET_ZERO,
    )


def random_system(rng, d, cyclic):
    return LinearOdeSystem(
        dim=d,
        diag=rng.normal(size=d),
        lower=rng.normal(size=max(d - 1, 0)),
        upper=rng.normal(size=max(d - 1, 0)),
        corner_upper=rng.normal() if cyclic else 0.0,
        corner_lower=rng.normal() if cyclic else 0.0,
        loading=rng.normal(size=d),
        state_nodes=np.arange(1, d + 1),
        node_count=d + 2,
        boundary=BoundaryCondition.PERIODIC if cyclic else BoundaryCondition.DIRICHLET_ZERO,
    )


class TestConfig:
    def test_defaults(self):
        cfg = IntegratorConfig()
        assert cfg.substeps == 4
        assert cfg.scheme == "trapezoidal"

    @pytest.mark.parametrize("k", [0, -1, 1.5])
    def test_invalid_substeps(self, k):
        with pytest.raises(ValueError):
            IntegratorConfig(substeps=k)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            IntegratorConfig(scheme="rk4")


class TestFactorization:
    @pytest.mark.parametrize("d", [1, 2, 3, 6, 11])
    @pytest.mark.parametrize("cyclic", [False, True])
    def test_matches_dense_solve(self, d, cyclic):
        if cyclic and d < 2:
            pytest.skip("corners need d >= 2")
        rng = np.random.default_rng(d + 100 * cyclic)
        system = random_system(rng, d, cyclic)
        dt = 0.29
        fact = TrapezoidalFactorization(system, dt)
        M = np.eye(d) - 0.5 * dt * system.to_dense()
        rhs = rng.normal(size=(d, 7))
        assert np.allclose(fact.solve(rhs), np.linalg.solve(M, rhs), atol=1e-10)
        vec = rng.normal(size=d)
        assert np.allclose(fact.solve(vec), np.linalg.solve(M, vec), atol=1e-10)

    def test_singular_matrix_reported(self):
        # I - dt/2 * A becomes exactly singular for A = 2/dt
        dt = 0.5
        with pytest.raises(SolverFailure):
            TrapezoidalFactorization(scalar_system(2.0 / dt), dt)


class TestConstantTheta:
    def test_exponential_decay(self):
        out = step_constant_theta(
            scalar_system(-1.0), np.array([1.0]), 0.0, 0.0, 1.0, IntegratorConfig(substeps=64)
        )
        assert out[0] == pytest.approx(math.exp(-1.0), abs=1e-4)

    def test_second_order_in_substeps(self):
        errs = []
        for k in (8, 16, 32):
            out = step_constant_theta(
                scalar_system(-1.0), np.array([1.0]), 0.0, 0.0, 1.0, IntegratorConfig(substeps=k)
            )
            errs.append(abs(out[0] - math.exp(-1.0)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)

    def test_mass_conserved_on_advection_any_step(self):
        system = assemble_advection(build_mesh(5.0, 20), 0.9)
        rng = np.random.default_rng(0)
        u = rng.normal(size=20)
        for dt in (0.01, 1.0, 25.0):
            out = step_constant_theta(system, u, 0.0, 0.0, dt, IntegratorConfig(substeps=1))
            assert abs(out.sum() - u.sum()) <= 1e-10 * abs(u.sum())

    def test_pure_quadrature_when_matrix_zero(self):
        system = scalar_system(0.0, b=1.0)
        out = step_constant_theta(system, np.array([2.0]), 3.0, 0.0, 4.0, IntegratorConfig(substeps=5))
        assert out[0] == pytest.approx(2.0 + 3.0 * 4.0, rel=1e-14)

    def test_batch_matches_single_calls_bitwise(self):
        system = assemble_heat(build_mesh(3.0, 12), 0.2, lambda x: x)
        rng = np.random.default_rng(5)
        U = rng.normal(size=(6, system.dim))
        thetas = rng.normal(size=6)
        cfg = IntegratorConfig(substeps=3)
        batch = step_constant_theta(system, U, thetas, 0.0, 0.4, cfg)
        for n in range(6):
            single = step_constant_theta(system, U[n], thetas[n], 0.0, 0.4, cfg)
            assert np.array_equal(batch[n], single)

    def test_rejects_bad_interval_and_shape(self):
        system = scalar_system(-1.0)
        with pytest.raises(ValueError):
            step_constant_theta(system, np.array([1.0]), 0.0, 1.0, 1.0, IntegratorConfig())
        with pytest.raises(ValueError):
            step_constant_theta(system, np.ones(3), 0.0, 0.0, 1.0, IntegratorConfig())


class TestVaryingTheta:
    def test_constant_function_is_bit_identical_to_constant_path(self):
        system = assemble_advection(build_mesh(5.0, 16), 0.3)
        rng = np.random.default_rng(1)
        u = rng.normal(size=16)
        a = step_constant_theta(system, u, 0.7, 0.0, 0.5, IntegratorConfig())
        b = step_varying_theta(system, u, lambda t: 0.7, 0.0, 0.5, IntegratorConfig())
        assert np.array_equal(a, b)

    def test_midpoint_quadrature(self):
        # With A = 0, b = [1], theta(t) = t, one substep over [0, 1] adds 0.5
        system = scalar_system(0.0, b=1.0)
        out = step_varying_theta(system, np.array([1.0]), lambda t: t, 0.0, 1.0, IntegratorConfig(substeps=1))
        assert out[0] == pytest.approx(1.5, rel=1e-14)

    def test_self_convergence_second_order_heat(self):
        system = assemble_heat(build_mesh(3.0, 30), 0.2, lambda x: math.exp(-((x - 1.5) ** 2)))
        mesh = build_mesh(3.0, 30)
        xs = mesh.nodes[system.state_nodes]
        u0 = xs * (3.0 - xs)
        theta = lambda t: 0.5 * math.sin(math.pi * t / 6.0) + 0.5
        ref = step_varying_theta(system, u0, theta, 0.0, 1.0, IntegratorConfig(substeps=64))
        e1 = np.linalg.norm(step_varying_theta(system, u0, theta, 0.0, 1.0, IntegratorConfig(substeps=4)) - ref)
        e2 = np.linalg.norm(step_varying_theta(system, u0, theta, 0.0, 1.0, IntegratorConfig(substeps=8)) - ref)
        assert 3.4 <= e1 / e2 <= 4.6


class TestStability:
    def test_heat_norm_never_grows(self):
        system = assemble_heat(build_mesh(3.0, 30), 0.2, lambda x: 0.0)
        rng = np.random.default_rng(2)
        u = rng.normal(size=system.dim)
        for dt in (0.001, 0.1, 10.0, 1000.0):
            out = step_constant_theta(system, u, 0.0, 0.0, dt, IntegratorConfig(substeps=1))
            assert np.linalg.norm(out) <= np.linalg.norm(u) * (1 + 1e-12)
