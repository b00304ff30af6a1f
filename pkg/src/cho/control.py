"""Cost functional, admissible controls, and projected gradient descent.

Controls are nodal in space and piecewise constant in time: slab j acts
on the step t_j -> t_{j+1}, matching the implicit-Euler source sampling,
so the discrete gradient representation from the adjoint is exact.
Running costs use the right-endpoint rectangle rule (states at
n = 1..N); terminal costs use the exact mass matrices.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError, ValidationError
from .forward import Problem, StateTrajectory, solve
from .potentials import check_mz
from .spaces import PairField, mean


class ControlPair:
    """Bulk and boundary control slabs: u (N, n_bulk), uG (N, n_boundary)."""

    def __init__(self, u, uG):
        self.u = np.asarray(u, dtype=float)
        self.uG = np.asarray(uG, dtype=float)
        if self.u.ndim != 2 or self.uG.ndim != 2 or self.u.shape[0] != self.uG.shape[0]:
            raise ValidationError(
                f"control slabs must be 2D with a common slab count, got "
                f"{self.u.shape} and {self.uG.shape}"
            )
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.uG))):
            raise ValidationError("control values must be finite")

    @property
    def n_slabs(self) -> int:
        return self.u.shape[0]

    @classmethod
    def zeros(cls, mesh, grid) -> "ControlPair":
        return cls(
            np.zeros((grid.N, mesh.n_bulk)), np.zeros((grid.N, mesh.n_boundary))
        )

    @classmethod
    def constant(cls, mesh, grid, value, boundary_value=None) -> "ControlPair":
        if boundary_value is None:
            boundary_value = value
        return cls(
            np.full((grid.N, mesh.n_bulk), float(value)),
            np.full((grid.N, mesh.n_boundary), float(boundary_value)),
        )

    def copy(self) -> "ControlPair":
        return ControlPair(self.u.copy(), self.uG.copy())

    def plus(self, other: "ControlPair", scale: float = 1.0) -> "ControlPair":
        return ControlPair(self.u + scale * other.u, self.uG + scale * other.uG)

    def scaled(self, s: float) -> "ControlPair":
        return ControlPair(s * self.u, s * self.uG)

    def sup_norm(self) -> float:
        return float(
            max(np.abs(self.u).max(initial=0.0), np.abs(self.uG).max(initial=0.0))
        )


def control_inner(a: ControlPair, b: ControlPair, ops, dt: float) -> float:
    """Discrete L2-in-time inner product over bulk and boundary controls."""
    total = 0.0
    for j in range(a.n_slabs):
        total += dt * float(a.u[j] @ (ops.M_bulk @ b.u[j]))
        total += dt * float(a.uG[j] @ (ops.M_gamma @ b.uG[j]))
    return total


def control_norm(a: ControlPair, ops, dt: float) -> float:
    return float(np.sqrt(max(control_inner(a, a, ops, dt), 0.0)))


def random_direction(mesh, grid, rng, normalize_ops=None, dt=None) -> ControlPair:
    """Uniform random slabs in [-1, 1]; optionally unit L2-in-time norm."""
    h = ControlPair(
        rng.uniform(-1.0, 1.0, (grid.N, mesh.n_bulk)),
        rng.uniform(-1.0, 1.0, (grid.N, mesh.n_boundary)),
    )
    if normalize_ops is not None:
        h = h.scaled(1.0 / control_norm(h, normalize_ops, dt))
    return h


# ---------------------------------------------------------------------------
# Box constraints
# ---------------------------------------------------------------------------

@dataclass
class BoxBounds:
    """Pointwise control box plus the H1-in-time budget M'.

    Bounds may be scalars or arrays broadcastable to the slab shapes.
    """

    u_min: float | np.ndarray
    u_max: float | np.ndarray
    uG_min: float | np.ndarray
    uG_max: float | np.ndarray
    M_prime: float = 1.0e3

    def __post_init__(self):
        if np.any(np.asarray(self.u_min) > np.asarray(self.u_max)) or np.any(
            np.asarray(self.uG_min) > np.asarray(self.uG_max)
        ):
            raise ValidationError("infeasible box: lower bound exceeds upper bound")
        if self.M_prime <= 0:
            raise ValidationError("M' must be positive")

    @property
    def M(self) -> float:
        """Sup bound of the box, the constant entering the mean-value check."""
        return float(
            max(
                np.max(np.abs(self.u_min)),
                np.max(np.abs(self.u_max)),
                np.max(np.abs(self.uG_min)),
                np.max(np.abs(self.uG_max)),
            )
        )


def project_box(pair: ControlPair, box: BoxBounds) -> ControlPair:
    """Componentwise clamp onto the box."""
    return ControlPair(
        np.clip(pair.u, box.u_min, box.u_max),
        np.clip(pair.uG, box.uG_min, box.uG_max),
    )


@dataclass
class UadReport:
    box_ok: bool
    h1_ok: bool
    h1_norm_u: float
    h1_norm_uG: float
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.box_ok and self.h1_ok


def validate_Uad(pair: ControlPair, box: BoxBounds, grid, ops) -> UadReport:
    """Report-only admissibility check: box membership and the discrete
    H1-in-time norm of the slab values against M'."""
    box_ok = bool(
        np.all(pair.u >= np.asarray(box.u_min) - 1e-14)
        and np.all(pair.u <= np.asarray(box.u_max) + 1e-14)
        and np.all(pair.uG >= np.asarray(box.uG_min) - 1e-14)
        and np.all(pair.uG <= np.asarray(box.uG_max) + 1e-14)
    )
    dt = grid.dt
    h1u = h1g = 0.0
    for j in range(1, pair.n_slabs):
        du = (pair.u[j] - pair.u[j - 1]) / dt
        dg = (pair.uG[j] - pair.uG[j - 1]) / dt
        h1u += dt * float(du @ (ops.M_bulk @ du))
        h1g += dt * float(dg @ (ops.M_gamma @ dg))
    h1u, h1g = float(np.sqrt(h1u)), float(np.sqrt(h1g))
    h1_ok = h1u <= box.M_prime and h1g <= box.M_prime
    parts = []
    if not box_ok:
        parts.append("box constraint violated")
    if not h1_ok:
        parts.append(
            f"time-derivative budget exceeded: {max(h1u, h1g):.3e} > {box.M_prime:g}"
        )
    return UadReport(box_ok, h1_ok, h1u, h1g, "; ".join(parts))


# ---------------------------------------------------------------------------
# Cost functional
# ---------------------------------------------------------------------------

@dataclass
class CostSpec:
    """Tracking-type cost with six nonnegative weights.

    alphas = (a1 bulk running, a2 boundary running, a3 bulk terminal,
    a4 boundary terminal, a5 bulk control, a6 boundary control).
    Targets may be scalars, arrays, or None (zero target).
    """

    alphas: tuple
    phiQ: object = None
    phiS: object = None
    phiO: object = None
    phiG: object = None

    def __post_init__(self):
        self.alphas = tuple(float(a) for a in self.alphas)
        if len(self.alphas) != 6:
            raise ValidationError(f"expected 6 cost weights, got {len(self.alphas)}")
        if any(a < 0 for a in self.alphas):
            raise ValidationError("cost weights must be nonnegative")

    def expand(self, mesh, grid) -> "CostData":
        def running(target, width):
            arr = np.zeros((grid.N + 1, width))
            if target is not None:
                arr[:] = np.asarray(target, dtype=float)
            return arr

        def terminal(target, width):
            arr = np.zeros(width)
            if target is not None:
                arr[:] = np.asarray(target, dtype=float)
            return arr

        return CostData(
            self.alphas,
            running(self.phiQ, mesh.n_bulk),
            running(self.phiS, mesh.n_boundary),
            terminal(self.phiO, mesh.n_bulk),
            terminal(self.phiG, mesh.n_boundary),
        )


@dataclass
class CostData:
    """Cost targets expanded to dense arrays on a concrete mesh/grid."""

    alphas: tuple
    phiQ: np.ndarray        # (N+1, n_bulk)
    phiS: np.ndarray        # (N+1, n_boundary)
    phiO: np.ndarray        # (n_bulk,)
    phiG: np.ndarray        # (n_boundary,)

    def zeta1_w(self, ops, phi_row, n) -> np.ndarray:
        """Mass-weighted running misfit a1 M (phi - phiQ) + a2 M_g (tr - phiS)."""
        a1, a2 = self.alphas[0], self.alphas[1]
        out = a1 * (ops.M_bulk @ (phi_row - self.phiQ[n]))
        tr = phi_row[ops.mesh.trace_map]
        out[ops.mesh.trace_map] += a2 * (ops.M_gamma @ (tr - self.phiS[n]))
        return out

    def zeta3_w(self, ops, phi_last) -> np.ndarray:
        """Mass-weighted terminal misfit."""
        a3, a4 = self.alphas[2], self.alphas[3]
        out = a3 * (ops.M_bulk @ (phi_last - self.phiO))
        tr = phi_last[ops.mesh.trace_map]
        out[ops.mesh.trace_map] += a4 * (ops.M_gamma @ (tr - self.phiG))
        return out


def cost(cost_spec: CostSpec, traj: StateTrajectory, u: ControlPair, ops) -> float:
    """Discrete cost: right-endpoint running terms, exact terminal terms."""
    grid = traj.grid
    data = cost_spec.expand(traj.mesh, grid)
    a1, a2, a3, a4, a5, a6 = data.alphas
    dt = grid.dt
    tm = traj.mesh.trace_map

    J = 0.0
    for nidx in range(1, grid.N + 1):
        d = traj.phi[nidx] - data.phiQ[nidx]
        dg = traj.phi[nidx][tm] - data.phiS[nidx]
        J += 0.5 * dt * (a1 * float(d @ (ops.M_bulk @ d)) + a2 * float(dg @ (ops.M_gamma @ dg)))
    d = traj.phi[grid.N] - data.phiO
    dg = traj.phi[grid.N][tm] - data.phiG
    J += 0.5 * (a3 * float(d @ (ops.M_bulk @ d)) + a4 * float(dg @ (ops.M_gamma @ dg)))
    for j in range(grid.N):
        J += 0.5 * dt * (
            a5 * float(u.u[j] @ (ops.M_bulk @ u.u[j]))
            + a6 * float(u.uG[j] @ (ops.M_gamma @ u.uG[j]))
        )
    return float(J)


def cost_directional(cost_spec: CostSpec, problem, base: StateTrajectory,
                     psi, u: ControlPair, h: ControlPair) -> float:
    """Directional derivative of the discrete cost along (psi, h).

    ``psi`` is the (N+1, n_bulk) sensitivity of phi in the direction h,
    e.g. from the linearized solver.  Cross-validates the adjoint path.
    """
    ops, grid = problem.ops, problem.grid
    data = cost_spec.expand(problem.mesh, grid)
    dt = grid.dt
    dJ = 0.0
    for nidx in range(1, grid.N + 1):
        dJ += dt * float(data.zeta1_w(ops, base.phi[nidx], nidx) @ psi[nidx])
    dJ += float(data.zeta3_w(ops, base.phi[grid.N]) @ psi[grid.N])
    a5, a6 = data.alphas[4], data.alphas[5]
    for j in range(grid.N):
        dJ += dt * (
            a5 * float(u.u[j] @ (ops.M_bulk @ h.u[j]))
            + a6 * float(u.uG[j] @ (ops.M_gamma @ h.uG[j]))
        )
    return float(dJ)


def vi_residual(u: ControlPair, g: ControlPair, box: BoxBounds, ops, dt: float) -> float:
    """Projected-gradient stationarity residual ||u - P(u - g)||.

    Zero exactly when the box-constrained first-order condition holds;
    the time-derivative budget is monitored separately, not enforced.
    """
    proj = project_box(u.plus(g, -1.0), box)
    return control_norm(u.plus(proj, -1.0), ops, dt)


# ---------------------------------------------------------------------------
# Projected gradient descent
# ---------------------------------------------------------------------------

@dataclass
class ControlProblem:
    """Forward problem plus everything the optimizer needs."""

    problem: Problem
    phi0: PairField
    cost: CostSpec
    box: BoxBounds


@dataclass
class OptimizerOptions:
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 60
    max_iter: int = 200
    tol: float = 1e-6
    bb_warm_start: bool = False


@dataclass
class IterateRecord:
    iteration: int
    J: float
    vi_residual: float
    step: float
    newton_total: int
    uad_ok: bool


@dataclass
class OptimizeResult:
    u: ControlPair
    trajectory: StateTrajectory
    history: list = field(default_factory=list)
    converged: bool = False


def projected_gradient(cp: ControlProblem, u0: ControlPair,
                       opts: OptimizerOptions = None) -> OptimizeResult:
    """Minimize the tracking cost over the box by projected gradient descent.

    Iterates u_{k+1} = P(u_k - s_k g_k) with Armijo backtracking on the
    true discrete cost; terminates when the projection residual drops
    below tol.  The H1-in-time budget is reported per iterate but not
    enforced (no closed-form projection onto box and ball jointly).
    """
    from .adjoint import adjoint_solve, reduced_gradient

    opts = opts or OptimizerOptions()
    problem, box = cp.problem, cp.box
    ops, grid = problem.ops, problem.grid
    dt = grid.dt

    if problem.pair.bounded and not problem.opts.eps_yosida:
        m0 = mean(cp.phi0, ops)
        mz = check_mz(problem.pair, m0, box.M, problem.physics.gamma)
        if not mz.passed:
            raise ValidationError(f"mean-value condition fails for the box: {mz.message}")

    u = project_box(u0, box)

    def evaluate(uc):
        traj = solve(problem, cp.phi0, uc)
        J = cost(cp.cost, traj, uc, ops)
        return traj, J

    traj, J = evaluate(u)
    adj = adjoint_solve(problem, traj, cp.cost)
    g = reduced_gradient(problem, u, adj, cp.cost)
    vi = vi_residual(u, g, box, ops, dt)
    newton_total = int(traj.newton_iters.sum())
    history = [IterateRecord(0, J, vi, 0.0, newton_total,
                             validate_Uad(u, box, grid, ops).passed)]

    prev_u = prev_g = None
    for k in range(1, opts.max_iter + 1):
        if vi <= opts.tol:
            break
        s = opts.initial_step
        if opts.bb_warm_start and prev_u is not None:
            du = u.plus(prev_u, -1.0)
            dg = g.plus(prev_g, -1.0)
            denom = control_inner(du, dg, ops, dt)
            if denom > 0:
                s = min(max(control_inner(du, du, ops, dt) / denom, 1e-6), 1e6)
        accepted = False
        newton_total = 0
        for _ in range(opts.max_backtracks + 1):
            trial = project_box(u.plus(g, -s), box)
            descent = control_inner(g, trial.plus(u, -1.0), ops, dt)
            traj_t, J_t = evaluate(trial)
            newton_total += int(traj_t.newton_iters.sum())
            if J_t <= J + opts.armijo_c1 * descent:
                accepted = True
                break
            s *= opts.backtrack
        if not accepted:
            gnorm = control_norm(g, ops, dt)
            raise SolverError(
                f"line search failed after {opts.max_backtracks} backtracks "
                f"(gradient norm {gnorm:.3e})"
            )
        prev_u, prev_g = u, g
        u, traj, J = trial, traj_t, J_t
        adj = adjoint_solve(problem, traj, cp.cost)
        g = reduced_gradient(problem, u, adj, cp.cost)
        vi = vi_residual(u, g, box, ops, dt)
        history.append(IterateRecord(k, J, vi, s, newton_total,
                                     validate_Uad(u, box, grid, ops).passed))
    return OptimizeResult(u, traj, history, converged=vi <= opts.tol)


def optimality_bilinear(cp: ControlProblem, u_star: ControlPair, g: ControlPair,
                        other: ControlPair) -> float:
    """First-order form <gamma p + a5 u_*, u - u_*> + boundary analogue.

    Nonnegative, up to the stationarity tolerance, for every admissible
    ``other`` at a box-stationary point.
    """
    ops, dt = cp.problem.ops, cp.problem.grid.dt
    return control_inner(g, other.plus(u_star, -1.0), ops, dt)
