import numpy as np
import pytest

from monotone_peridynamics.schemas.config_schema import SolverConfig
from monotone_peridynamics.schemas.enums import PhaseMode, SolverPhase
from monotone_peridynamics.services.geometry import build_bond_table, build_padded_grid
from monotone_peridynamics.services.operator import apply_operator, residual
from monotone_peridynamics.services import solver
from monotone_peridynamics.services.solver import (
    ResidualSystem,
    SolveResult,
    solve_full,
    solve_small_deformation,
    two_phase_solve,
)
from monotone_peridynamics.utils.exceptions import SolverFailure


@pytest.fixture()
def manufactured(grid_1d, bonds_1d, ex2_truth):
    """ Smooth displacement and the force that makes it an equilibrium """
    u = 0.01 * np.sin(2.0 * np.pi * grid_1d.coordinates)
    b = -apply_operator(ex2_truth, grid_1d, bonds_1d, u)
    return u, b


def test_zero_force_and_boundary_give_zero(grid_1d, bonds_1d, ex2_truth):
    zeros = np.zeros((grid_1d.node_count, 1))
    result = two_phase_solve(ex2_truth, grid_1d, bonds_1d, zeros, zeros)

    assert result.converged
    assert np.all(result.u == 0.0)
    assert all(p.iterations == 0 for p in result.phases)


def test_recovers_manufactured_solution(grid_1d, bonds_1d, ex2_truth, manufactured):
    u_true, b = manufactured
    u_bc = np.where(grid_1d.interior_mask[:, None], 0.0, u_true)
    result = two_phase_solve(ex2_truth, grid_1d, bonds_1d, b, u_bc, SolverConfig(tolerance=1e-10))

    interior = grid_1d.interior_nodes
    assert result.converged
    assert [p.phase for p in result.phases] == [SolverPhase.SMALL_DEFORMATION, SolverPhase.FULL]
    assert np.linalg.norm(result.u[interior] - u_true[interior]) < 1e-6 * np.linalg.norm(u_true[interior])
    assert np.array_equal(result.u[grid_1d.boundary_nodes], u_true[grid_1d.boundary_nodes])
    final = residual(ex2_truth, grid_1d, bonds_1d, result.u, b)
    assert np.linalg.norm(final) <= 1e-10 * np.linalg.norm(b[interior])


@pytest.mark.parametrize("shift", [0.01, 0.05])
def test_rigid_translation_of_the_boundary(grid_1d, bonds_1d, ex1_truth, shift):
    u_bc = np.full((grid_1d.node_count, 1), shift)
    b = np.zeros_like(u_bc)
    result = two_phase_solve(ex1_truth, grid_1d, bonds_1d, b, u_bc, SolverConfig(tolerance=1e-12))

    assert result.converged
    assert np.allclose(result.u, shift, rtol=0.0, atol=1e-8)
    assert np.all(result.u[grid_1d.boundary_nodes] == shift)


def test_translation_past_the_spacing_starts_from_a_finite_residual(grid_1d, bonds_1d, ex1_truth):
    # the zero interior puts linearized stretches of boundary bonds below zero
    u_bc = np.full((grid_1d.node_count, 1), 0.3)
    b = np.zeros_like(u_bc)

    assert np.all(np.isfinite(residual(ex1_truth, grid_1d, bonds_1d, u_bc, b, linearized=True)))
    small = solve_small_deformation(ex1_truth, grid_1d, bonds_1d, b, u_bc, SolverConfig(max_iterations=5))
    assert np.isfinite(small.trace[0].residual_norm)
    assert small.trace[0].accepted


def test_recovers_manufactured_solution_in_two_dimensions(ex2_truth):
    grid = build_padded_grid(2, 0.125, 0.25)
    bonds = build_bond_table(grid)
    x, y = grid.coordinates[:, 0], grid.coordinates[:, 1]
    u_true = 0.01 * np.column_stack([np.sin(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y),
                                     np.sin(np.pi * x) * np.cos(np.pi * y)])
    b = -apply_operator(ex2_truth, grid, bonds, u_true)
    u_bc = np.where(grid.interior_mask[:, None], 0.0, u_true)

    result = two_phase_solve(ex2_truth, grid, bonds, b, u_bc, SolverConfig(tolerance=1e-10))

    interior = grid.interior_nodes
    assert result.converged
    assert result.u.shape == (169, 2)
    assert np.linalg.norm(result.u[interior] - u_true[interior]) < 1e-6 * np.linalg.norm(u_true[interior])
    assert np.array_equal(result.u[grid.boundary_nodes], u_true[grid.boundary_nodes])


def test_exact_initial_guess_needs_no_iterations(grid_1d, bonds_1d, ex2_truth, manufactured):
    u_true, b = manufactured
    result = solve_full(ex2_truth, grid_1d, bonds_1d, b, u_true, u_true)

    assert result.converged
    assert result.iterations == 0
    assert result.relative_residual == 0.0
    assert np.array_equal(result.u, u_true)


def test_small_deformation_phase_solves_the_linearized_problem(grid_1d, bonds_1d, ex2_truth, manufactured):
    u_true, b = manufactured
    result = solve_small_deformation(ex2_truth, grid_1d, bonds_1d, b, u_true, SolverConfig(tolerance=1e-10))

    assert result.converged
    assert result.phase == SolverPhase.SMALL_DEFORMATION
    linear = residual(ex2_truth, grid_1d, bonds_1d, result.u, b, linearized=True)
    assert np.linalg.norm(linear) <= 1e-10 * np.linalg.norm(b)
    assert np.allclose(result.u, u_true, rtol=0.0, atol=1e-8)


def test_failure_names_the_first_phase(grid_1d, bonds_1d, ex2_truth, manufactured):
    u_true, b = manufactured
    settings = SolverConfig(tolerance=1e-300, max_iterations=1)

    with pytest.raises(SolverFailure) as error:
        two_phase_solve(ex2_truth, grid_1d, bonds_1d, b, u_true, settings, raise_on_failure=True)
    assert error.value.phase == "small"
    assert error.value.result.failed_phase == SolverPhase.SMALL_DEFORMATION


def test_failed_small_phase_fails_the_solve(grid_1d, bonds_1d, ex2_truth, manufactured, monkeypatch):
    u_true, b = manufactured
    stalled = SolveResult(u=u_true, converged=False, iterations=1, relative_residual=1.0,
                          phase=SolverPhase.SMALL_DEFORMATION)
    monkeypatch.setattr(solver, "solve_small_deformation", lambda *args, **kwargs: stalled)

    result = two_phase_solve(ex2_truth, grid_1d, bonds_1d, b, u_true)
    assert not result.converged
    assert [p.phase for p in result.phases] == [SolverPhase.SMALL_DEFORMATION]
    assert result.failed_phase == SolverPhase.SMALL_DEFORMATION

    with pytest.raises(SolverFailure) as error:
        two_phase_solve(ex2_truth, grid_1d, bonds_1d, b, u_true, raise_on_failure=True)
    assert error.value.phase == "small"


def test_failure_without_raising_reports_the_outcome(grid_1d, bonds_1d, ex2_truth, manufactured):
    u_true, b = manufactured
    result = two_phase_solve(ex2_truth, grid_1d, bonds_1d, b, u_true,
                             SolverConfig(tolerance=1e-300, max_iterations=2))

    assert not result.converged
    assert result.trace[0].iteration == 0
    assert result.trace[0].accepted


@pytest.mark.parametrize("mode, phases", [
    (PhaseMode.SMALL_ONLY, [SolverPhase.SMALL_DEFORMATION]),
    (PhaseMode.ONE_PHASE, [SolverPhase.FULL]),
    (PhaseMode.TWO_PHASE, [SolverPhase.SMALL_DEFORMATION, SolverPhase.FULL]),
])
def test_phase_composition(grid_1d, bonds_1d, ex2_truth, manufactured, mode, phases):
    u_true, b = manufactured
    result = two_phase_solve(ex2_truth, grid_1d, bonds_1d, b, u_true, SolverConfig(phase=mode))

    assert [p.phase for p in result.phases] == phases
    assert result.converged


def test_degenerate_initial_iterate_is_a_failed_solve(grid_1d, bonds_1d, ex2_truth, manufactured):
    _, b = manufactured
    u_init = np.zeros((grid_1d.node_count, 1))
    u_init[10, 0] = -1.0 / 16.0
    result = solve_full(ex2_truth, grid_1d, bonds_1d, b, np.zeros_like(u_init), u_init)

    assert not result.converged
    assert result.relative_residual == np.inf


def test_unknowns_interleave_components(ex2_truth):
    grid = build_padded_grid(2, 0.125, 0.25)
    bonds = build_bond_table(grid)
    u = np.arange(grid.node_count * 2, dtype=float).reshape(-1, 2)
    system = ResidualSystem(ex2_truth, grid, bonds, np.zeros_like(u), u, linearized=True)

    x = system.unknowns(u)
    first = grid.interior_nodes[0]
    assert x[:2].tolist() == u[first].tolist()
    assert np.array_equal(system.expand(x)[0], u)
