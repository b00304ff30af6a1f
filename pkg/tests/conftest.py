"""Shared problem factories for the solver-level test modules."""

import numpy as np
import pytest

from cho.control import ControlPair
from cho.forward import Physics, Problem, SolverOptions, TimeGrid
from cho.mesh import build_interval
from cho.potentials import PotentialPair, logarithmic_potential, regular_potential
from cho.spaces import PairField


def make_problem(n_cells=12, length=1.0, T=0.4, N=8, tau=1.0, gamma=1.0,
                 kind="regular", **opt_kwargs):
    mesh = build_interval(n_cells, length)
    spec = regular_potential() if kind == "regular" else logarithmic_potential(2.0)
    return Problem.create(
        mesh,
        PotentialPair.same(spec),
        SolverOptions(**opt_kwargs),
        Physics(tau=tau, gamma=gamma),
        TimeGrid(T=T, N=N),
    )


def cosine_ic(mesh, amplitude=0.3, waves=1.0):
    x = mesh.bulk_nodes[:, 0]
    span = x.max() - x.min()
    return PairField.from_bulk(
        mesh, amplitude * np.cos(waves * np.pi * (x - x.min()) / span)
    )


@pytest.fixture(scope="session")
def generic_run():
    """One converged nontrivial run shared by read-only diagnostics tests."""
    problem = make_problem(newton_tol=1e-12)
    phi0 = cosine_ic(problem.mesh)
    controls = ControlPair.constant(problem.mesh, problem.grid, 0.1, 0.05)
    from cho.forward import solve

    return problem, phi0, controls, solve(problem, phi0, controls)
