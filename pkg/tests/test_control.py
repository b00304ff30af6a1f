import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cho.control import (
    BoxBounds,
    ControlPair,
    ControlProblem,
    CostSpec,
    OptimizerOptions,
    control_norm,
    cost,
    optimality_bilinear,
    project_box,
    projected_gradient,
    validate_Uad,
    vi_residual,
)
from cho.errors import ValidationError
from cho.forward import solve
from cho.spaces import PairField

from conftest import cosine_ic, make_problem

BOX = BoxBounds(u_min=-1.0, u_max=1.0, uG_min=-1.0, uG_max=1.0)


def make_pair(problem, value=0.0):
    return ControlPair.constant(problem.mesh, problem.grid, value)


class TestCost:
    def test_zero_when_on_target_with_zero_control(self):
        problem = make_problem()
        mesh, grid = problem.mesh, problem.grid
        traj = solve(problem, PairField.constant(mesh, 0.3),
                     ControlPair.constant(mesh, grid, 0.3))
        # gamma(u - phi) = 0 keeps phi = 0.3 exactly; track that value.
        spec = CostSpec(alphas=(1, 1, 1, 1, 0, 0), phiQ=0.3, phiS=0.3,
                        phiO=0.3, phiG=0.3)
        assert cost(spec, traj, ControlPair.zeros(mesh, grid), problem.ops) < 1e-20

    def test_pure_control_penalty_integrates_exactly(self):
        # a5/2 int_Q |u|^2 with a5 = 2, u = 1, |Q| = 1 x 1 -> J = 1.
        problem = make_problem(n_cells=8, T=1.0, N=10)
        traj = solve(problem, PairField.constant(problem.mesh, 0.0),
                     ControlPair.zeros(problem.mesh, problem.grid))
        spec = CostSpec(alphas=(0, 0, 0, 0, 2.0, 0))
        u = make_pair(problem, 1.0)
        assert np.isclose(cost(spec, traj, u, problem.ops), 1.0, rtol=1e-12)

    def test_linear_in_weights(self, generic_run):
        problem, phi0, controls, traj = generic_run
        base = CostSpec(alphas=(1, 0.5, 0.8, 0.3, 0.2, 0.1), phiQ=0.1)
        double = CostSpec(alphas=tuple(2 * a for a in base.alphas), phiQ=0.1)
        J1 = cost(base, traj, controls, problem.ops)
        J2 = cost(double, traj, controls, problem.ops)
        assert np.isclose(J2, 2 * J1, rtol=1e-13)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            CostSpec(alphas=(1, 1, 1, 1, -0.1, 1))


class TestProjectBox:
    def test_interior_unchanged(self):
        problem = make_problem(N=4)
        u = make_pair(problem, 0.3)
        proj = project_box(u, BOX)
        assert np.array_equal(proj.u, u.u)
        assert np.array_equal(proj.uG, u.uG)

    def test_clamps_to_bounds(self):
        problem = make_problem(N=4)
        proj = project_box(make_pair(problem, 5.0), BOX)
        assert np.all(proj.u == 1.0)
        assert np.all(proj.uG == 1.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        pair = ControlPair(rng.uniform(-3, 3, (4, 7)), rng.uniform(-3, 3, (4, 2)))
        once = project_box(pair, BOX)
        twice = project_box(once, BOX)
        assert np.array_equal(once.u, twice.u)
        assert np.array_equal(once.uG, twice.uG)

    def test_infeasible_box_rejected(self):
        with pytest.raises(ValidationError, match="infeasible"):
            BoxBounds(u_min=1.0, u_max=-1.0, uG_min=0.0, uG_max=0.0)


class TestValidateUad:
    def test_time_constant_passes(self):
        problem = make_problem(N=6)
        report = validate_Uad(make_pair(problem, 0.5), BOX, problem.grid, problem.ops)
        assert report.passed and report.h1_norm_u == 0.0

    def test_alternating_slabs_fail_small_budget(self):
        problem = make_problem(T=0.08, N=8)   # dt = 0.01
        signs = np.resize([1.0, -1.0], 8)
        u = ControlPair(
            np.repeat(signs[:, None], problem.mesh.n_bulk, axis=1),
            np.repeat(signs[:, None], problem.mesh.n_boundary, axis=1),
        )
        tight = BoxBounds(u_min=-1, u_max=1, uG_min=-1, uG_max=1, M_prime=10.0)
        report = validate_Uad(u, tight, problem.grid, problem.ops)
        assert not report.h1_ok
        # Difference quotients of +-1 slabs scale like 2/dt.
        assert report.h1_norm_u > 2.0 / problem.grid.dt * 0.1

    def test_out_of_box_reported(self):
        problem = make_problem(N=4)
        report = validate_Uad(make_pair(problem, 2.0), BOX, problem.grid, problem.ops)
        assert not report.box_ok
        assert "box" in report.message


class TestViResidual:
    def test_zero_gradient_interior(self):
        problem = make_problem(N=4)
        u = make_pair(problem, 0.2)
        g = make_pair(problem, 0.0)
        assert vi_residual(u, g, BOX, problem.ops, problem.grid.dt) == 0.0

    def test_at_lower_bound_with_positive_gradient(self):
        problem = make_problem(N=4)
        u = make_pair(problem, -1.0)
        g = make_pair(problem, 0.7)
        assert vi_residual(u, g, BOX, problem.ops, problem.grid.dt) == 0.0

    def test_interior_nonzero_gradient(self):
        problem = make_problem(N=4)
        u = make_pair(problem, 0.0)
        g = make_pair(problem, 0.3)
        got = vi_residual(u, g, BOX, problem.ops, problem.grid.dt)
        assert np.isclose(got, control_norm(g, problem.ops, problem.grid.dt))


class TestProjectedGradient:
    def make_control_problem(self, alphas, targets=None, gamma=1.0, **kwargs):
        problem = make_problem(n_cells=10, T=0.3, N=6, gamma=gamma, **kwargs)
        targets = targets or {}
        return ControlProblem(
            problem,
            cosine_ic(problem.mesh, 0.2),
            CostSpec(alphas=alphas, **targets),
            BOX,
        )

    def test_pure_control_cost_drives_to_zero(self):
        # With only the control penalty and negligible reaction the unique
        # minimizer inside the box is u = 0.
        cp = self.make_control_problem((0, 0, 0, 0, 1.0, 1.0), gamma=1e-8)
        u0 = ControlPair.constant(cp.problem.mesh, cp.problem.grid, 0.5, -0.4)
        result = projected_gradient(cp, u0, OptimizerOptions(tol=1e-8))
        assert result.converged
        assert control_norm(result.u, cp.problem.ops, cp.problem.grid.dt) < 1e-6

    def test_stationary_start_returns_immediately(self):
        cp = self.make_control_problem((0, 0, 0, 0, 1.0, 1.0), gamma=1e-8)
        u0 = ControlPair.zeros(cp.problem.mesh, cp.problem.grid)
        result = projected_gradient(cp, u0, OptimizerOptions(tol=1e-6))
        assert len(result.history) == 1
        assert result.history[0].iteration == 0

    def test_monotone_descent_and_feasibility(self):
        cp = self.make_control_problem(
            (1.0, 0.5, 1.0, 0.5, 0.4, 0.4),
            targets={"phiQ": 0.25, "phiS": 0.25, "phiO": 0.25, "phiG": 0.25},
        )
        u0 = ControlPair.constant(cp.problem.mesh, cp.problem.grid, 0.9)
        result = projected_gradient(cp, u0, OptimizerOptions(tol=1e-6, max_iter=60))
        J = [h.J for h in result.history]
        assert all(b <= a + 1e-15 for a, b in zip(J, J[1:]))
        assert np.all(result.u.u >= -1.0) and np.all(result.u.u <= 1.0)
        assert result.converged

    def test_stationarity_certificate(self):
        cp = self.make_control_problem(
            (1.0, 0.0, 1.0, 0.0, 0.5, 0.5), targets={"phiQ": 0.2, "phiO": 0.2}
        )
        u0 = ControlPair.zeros(cp.problem.mesh, cp.problem.grid)
        result = projected_gradient(cp, u0, OptimizerOptions(tol=1e-7, max_iter=80))
        from cho.adjoint import adjoint_solve, reduced_gradient

        adj = adjoint_solve(cp.problem, result.trajectory, cp.cost)
        g = reduced_gradient(cp.problem, result.u, adj, cp.cost)
        rng = np.random.default_rng(0)
        grid, mesh = cp.problem.grid, cp.problem.mesh
        for _ in range(20):
            other = ControlPair(rng.uniform(-1, 1, (grid.N, mesh.n_bulk)),
                                rng.uniform(-1, 1, (grid.N, mesh.n_boundary)))
            assert optimality_bilinear(cp, result.u, g, other) >= -1e-6

    def test_mz_guard_for_bounded_potentials(self):
        problem = make_problem(kind="logarithmic", gamma=1.0)
        cp = ControlProblem(
            problem,
            PairField.constant(problem.mesh, 0.0),
            CostSpec(alphas=(1, 0, 0, 0, 0.1, 0.1), phiQ=0.1),
            BoxBounds(u_min=-2.0, u_max=2.0, uG_min=-2.0, uG_max=2.0),
        )
        with pytest.raises(ValidationError, match="mean-value"):
            projected_gradient(cp, ControlPair.zeros(problem.mesh, problem.grid))
