import math
from dataclasses import replace

import numpy as np
import pytest

from imcflab.errors import SolverError

FLAT_SCHEDULE = [(1e-1, 12.0, 1024), (1e-2, 12.0, 2048), (1e-3, 12.0, 4096)]


@pytest.fixture(scope="module")
def flat_study(regsolver_service, euclidean):
    return regsolver_service.run_schedule(euclidean, 1.0, FLAT_SCHEDULE)


@pytest.fixture(scope="module")
def schwarzschild_result(regsolver_service, schwarzschild):
    problem = regsolver_service.make_problem(schwarzschild, 2.5, 12.0, 1e-3, 2048)
    return regsolver_service.solve_newton(problem)


def test_residual_of_flat_level_set_function(regsolver_service, euclidean):
    problem = regsolver_service.make_problem(euclidean, 1.0, 12.0, 0.5, 1024)
    exact = replace(problem, epsilon=0.0)
    s = problem.grid()
    residual = regsolver_service.assemble_residual(exact, 2.0 * np.log(s / s[0]))
    h = problem.xi_max / (problem.n - 1)
    assert np.max(np.abs(residual)) <= h * h


def test_residual_is_finite_on_boundary_interpolant(regsolver_service, cored):
    problem = regsolver_service.make_problem(cored, 0.5, 8.0, 1.0, 128)
    residual = regsolver_service.assemble_residual(problem, regsolver_service.default_initial(problem))
    assert np.all(np.isfinite(residual))
    assert residual[0] == 0.0 and residual[-1] == 0.0


def test_outer_boundary_reaches_level_l(regsolver_service, euclidean):
    problem = regsolver_service.make_problem(euclidean, 1.0, 12.0, 1e-2, 256)
    assert problem.sL == pytest.approx(math.exp(6.0), rel=1e-12)


def test_problem_invariants(regsolver_service, euclidean):
    with pytest.raises(SolverError, match="epsilon"):
        regsolver_service.make_problem(euclidean, 1.0, 12.0, 0.0, 256)
    with pytest.raises(SolverError):
        regsolver_service.make_problem(euclidean, 1.0, 12.0, 1.5, 256)
    with pytest.raises(SolverError):
        regsolver_service.make_problem(euclidean, 1.0, 12.0, 0.1, 32)


def test_large_epsilon_converges_quickly(regsolver_service, euclidean):
    problem = regsolver_service.make_problem(euclidean, 1.0, 12.0, 1.0, 1024)
    result = regsolver_service.solve_newton(problem)
    assert result.converged
    assert result.newton_iterations <= 25
    assert result.u[0] == 0.0 and result.u[-1] == 10.0


def test_flat_convergence_study(flat_study):
    report, results = flat_study
    assert report.passed
    assert report.successive_monotone and report.exact_monotone
    errors = [stage.exact_error for stage in report.stages]
    assert errors[-1] <= 5e-3
    for result in results:
        assert result.converged
        assert result.residual_norm <= 1e-10 * (1.0 + np.max(np.abs(result.u)))


def test_flat_solution_is_monotone_with_no_interior_maximum(flat_study):
    final = flat_study[1][-1]
    assert np.all(np.diff(final.u) >= -1e-10)
    assert np.max(final.u[1:-1]) <= final.u[-1]


def test_residual_of_solver_output(regsolver_service, flat_study):
    final = flat_study[1][-1]
    residual = regsolver_service.assemble_residual(final.problem, final.u)
    assert np.max(np.abs(residual)) <= 1e-10 * (1.0 + np.max(np.abs(final.u)))


def test_barrier_holds_on_flat_solution(regsolver_service, flat_study):
    final = flat_study[1][-1]
    barrier = regsolver_service.subsolution_barrier(final.problem, final)
    assert barrier.holds, barrier.status
    assert 0.0 < barrier.c1 <= 2.0
    assert barrier.c2 >= 0.0


def test_barrier_needs_asymptotic_range(regsolver_service, geometry_service):
    short = geometry_service.make_preset("euclidean", {"s_max": 1.5})
    problem = regsolver_service.make_problem(short, 1.0, 12.0, 1.0, 64)
    result = regsolver_service.solve_newton(problem)
    barrier = regsolver_service.subsolution_barrier(problem, result)
    assert not barrier.holds
    assert barrier.status == "insufficient asymptotic range"


def test_level_set_extraction(regsolver_service, flat_study):
    final = flat_study[1][-1]
    crossing = regsolver_service.level_set_extract(final, 2.0 * math.log(2.0))
    assert crossing.monotone
    assert crossing.s == pytest.approx(2.0, abs=1e-3)
    assert regsolver_service.level_set_extract(final, 0.0).s == final.problem.s0
    with pytest.raises(SolverError):
        regsolver_service.level_set_extract(final, 10.5)
    with pytest.raises(SolverError):
        regsolver_service.level_set_extract(final, -0.1)


def test_grid_refinement_at_fixed_epsilon(regsolver_service, euclidean):
    problem = regsolver_service.make_problem(euclidean, 1.0, 12.0, 1e-2, 1024)
    report = regsolver_service.refinement_study(problem)
    assert report.passed
    assert all(level.ratio >= 3.0 for level in report.levels[1:])
    assert report.reference_n == 4093


def test_schwarzschild_solution_is_monotone(schwarzschild_result):
    assert schwarzschild_result.converged
    assert np.all(np.diff(schwarzschild_result.u) >= -1e-10)


def test_schwarzschild_level_set_matches_exact_flow(regsolver_service, schwarzschild_result):
    level = 2.0 * math.log(4.0 / 2.5)
    crossing = regsolver_service.level_set_extract(schwarzschild_result, level)
    assert crossing.s == pytest.approx(4.0, rel=2e-2)


def test_schwarzschild_convergence_study(regsolver_service, schwarzschild):
    report = regsolver_service.convergence_study(
        schwarzschild, 2.5, [(1e-1, 12.0, 1024), (1e-2, 12.0, 2048), (1e-3, 12.0, 4096)])
    assert report.exact_monotone


def test_single_stage_schedule(regsolver_service, euclidean):
    report = regsolver_service.convergence_study(euclidean, 1.0, [(0.5, 8.0, 256)])
    assert len(report.stages) == 1
    assert report.passed
    assert report.stages[0].successive_distance is None


def test_schedule_must_decrease_in_epsilon(regsolver_service, euclidean):
    with pytest.raises(SolverError, match="decreasing"):
        regsolver_service.convergence_study(euclidean, 1.0, [(1e-2, 12.0, 256), (1e-1, 12.0, 256)])
