"""Backward-in-time adjoint solvers.

``adjoint_solve`` transposes the discrete linearized dynamics step by
step, so the resulting gradient matches the directional derivative of
the discrete cost to round-off.  Storage convention: index N holds the
terminal pair defined by M(p + tau q) = terminal cost data together
with the discrete second adjoint equation K p = M q; index n < N holds
the multiplier of the forward step t_n -> t_{n+1} (scaled by 1/dt), so
the chain rule reads

    dJ[h] = sum_n dt [ (gamma p_n + a5 u_n)^T M_bulk h_n
                     + (gamma p_{Gamma,n} + a6 u_{Gamma,n})^T M_gamma h_{Gamma,n} ]

with slab index n = 0..N-1.  Each backward step is one implicit Euler
step of the continuous adjoint system with coefficients frozen at the
right end of the step interval; ``adjoint_continuous_form`` freezes
them at the left end instead (discretize-the-adjoint variant) and is
kept for cross-validation.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import SolverError
from .forward import Problem, StateTrajectory, scheme_functions


class AdjointTrajectory:
    """Dual states (p, q) on the time grid, bulk-indexed and conforming."""

    def __init__(self, base: StateTrajectory, p, q):
        self.base = base
        self.p = p              # (N+1, n_bulk)
        self.q = q


def _terminal_solve(ops, tau, zeta3_w):
    """Pair (p, q) with M(p + tau q) = zeta3_w and K p = M q."""
    Mbar, Kbar = ops.M_total, ops.K_total
    B = sp.bmat([[Mbar, tau * Mbar], [Kbar, -Mbar]], format="csc")
    sol = spsolve(B, np.concatenate([zeta3_w, np.zeros_like(zeta3_w)]))
    if not np.all(np.isfinite(sol)):
        raise SolverError("singular terminal adjoint solve")
    return np.split(sol, 2)


def _backward_step(ops, physics, dt, lam_vec, rhs1):
    Mbar, Kbar = ops.M_total, ops.K_total
    B = sp.bmat(
        [
            [(1.0 + physics.gamma * dt) * Mbar, physics.tau * Mbar + dt * (Kbar + sp.diags(lam_vec))],
            [Kbar, -Mbar],
        ],
        format="csc",
    )
    sol = spsolve(B, np.concatenate([rhs1, np.zeros_like(rhs1)]))
    return np.split(sol, 2)


def adjoint_solve(problem: Problem, base: StateTrajectory, cost) -> AdjointTrajectory:
    """Exact transpose of the discrete linearized dynamics against the cost."""
    ops, grid, physics = problem.ops, problem.grid, problem.physics
    fns = scheme_functions(problem.pair, problem.opts)
    dt = grid.dt
    data = cost.expand(problem.mesh, grid)

    n = problem.mesh.n_bulk
    p = np.zeros((grid.N + 1, n))
    q = np.zeros((grid.N + 1, n))
    p[grid.N], q[grid.N] = _terminal_solve(ops, physics.tau, data.zeta3_w(ops, base.phi[grid.N]))

    Mbar = ops.M_total
    for m in range(grid.N, 0, -1):
        lam = fns.nodal(ops, base.phi[m], 1)
        rhs1 = dt * data.zeta1_w(ops, base.phi[m], m) + Mbar @ (p[m] + physics.tau * q[m])
        if m < grid.N:
            rhs1 -= dt * fns.nodal(ops, base.phi[m], 3) * q[m]
        pm, qm = _backward_step(ops, physics, dt, lam, rhs1)
        if not np.all(np.isfinite(pm)):
            raise SolverError(f"singular adjoint solve at step {m}", step=m)
        p[m - 1], q[m - 1] = pm, qm
    return AdjointTrajectory(base, p, q)


def _lambda_second_derivative(ops, pair, phi):
    """Lumped-mass weights of F'' regardless of the time-stepping split."""
    out = ops.lumped_bulk * pair.bulk.F(phi, 2)
    tr = phi[ops.mesh.trace_map]
    out[ops.mesh.trace_map] += ops.lumped_gamma * pair.boundary.F(tr, 2)
    return out


def adjoint_continuous_form(problem: Problem, base: StateTrajectory, cost) -> AdjointTrajectory:
    """Implicit Euler applied directly to the continuous adjoint system.

    Coefficients and sources are evaluated at the unknown's own time
    level; agrees with ``adjoint_solve`` up to O(dt) and is used as an
    independent consistency target.
    """
    ops, grid, physics = problem.ops, problem.grid, problem.physics
    dt = grid.dt
    data = cost.expand(problem.mesh, grid)

    n = problem.mesh.n_bulk
    p = np.zeros((grid.N + 1, n))
    q = np.zeros((grid.N + 1, n))
    p[grid.N], q[grid.N] = _terminal_solve(ops, physics.tau, data.zeta3_w(ops, base.phi[grid.N]))

    Mbar = ops.M_total
    for m in range(grid.N, 0, -1):
        lam = _lambda_second_derivative(ops, problem.pair, base.phi[m - 1])
        rhs1 = dt * data.zeta1_w(ops, base.phi[m - 1], m - 1) + Mbar @ (p[m] + physics.tau * q[m])
        pm, qm = _backward_step(ops, physics, dt, lam, rhs1)
        if not np.all(np.isfinite(pm)):
            raise SolverError(f"singular adjoint solve at step {m}", step=m)
        p[m - 1], q[m - 1] = pm, qm
    return AdjointTrajectory(base, p, q)


def reduced_gradient(problem: Problem, u, adj: AdjointTrajectory, cost):
    """Gradient densities (gamma p + a5 u, gamma p_Gamma + a6 u_Gamma) per slab."""
    from .control import ControlPair

    gamma = problem.physics.gamma
    a5, a6 = cost.alphas[4], cost.alphas[5]
    trace_map = problem.mesh.trace_map
    N = problem.grid.N
    gu = np.empty_like(np.asarray(u.u, dtype=float))
    gg = np.empty_like(np.asarray(u.uG, dtype=float))
    for j in range(N):
        gu[j] = gamma * adj.p[j] + a5 * u.u[j]
        gg[j] = gamma * adj.p[j][trace_map] + a6 * u.uG[j]
    return ControlPair(gu, gg)
