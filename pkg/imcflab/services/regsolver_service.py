import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from config.settings import Settings
from imcflab.errors import SingularLinearizationError, SolverError
from imcflab.metrics import RadialMetric
from imcflab.models import (BarrierReport, ConvergenceReport, LevelSetCrossing, RefinementLevel,
                            RefinementReport, StageRecord)

from .flow_service import FlowService
from .geometry_service import GeometryService


@dataclass(frozen=True)
class RegularizedProblem:
    """E^eps u = 0 on s0 < s < sL with u(s0) = 0 and u(sL) = L - 2."""
    metric: RadialMetric
    s0: float
    L: float
    sL: float
    epsilon: float
    n: int

    @property
    def xi_max(self) -> float:
        return math.log(self.sL / self.s0)

    def xi(self) -> np.ndarray:
        return np.linspace(0.0, self.xi_max, self.n)

    def grid(self) -> np.ndarray:
        return self.s0 * np.exp(self.xi())

    def boundary_values(self) -> Tuple[float, float]:
        return 0.0, self.L - 2.0


@dataclass(frozen=True)
class _Stencil:
    """Grid geometry of the flux-form scheme, uniform in xi = log(s/s0)."""
    s: np.ndarray
    h: float
    flux_weight: np.ndarray   # R^2 at half points
    half_scale: np.ndarray    # 1 / (h s sqrt(A)) at half points
    divergence: np.ndarray    # 1 / (sqrt(A) R^2 h s) at interior nodes
    gradient_scale: np.ndarray  # 1 / (2 h s sqrt(A)) at interior nodes


@dataclass
class SolverResult:
    problem: RegularizedProblem
    s: np.ndarray
    u: np.ndarray
    residual_norm: float
    newton_iterations: int
    converged: bool
    total_iterations: int = 0
    history: List[float] = field(default_factory=list, repr=False)

    @property
    def xi(self) -> np.ndarray:
        return np.log(self.s / self.problem.s0)


def _stencil(problem: RegularizedProblem) -> _Stencil:
    metric = problem.metric
    xi = problem.xi()
    h = float(xi[1] - xi[0])
    s = problem.s0 * np.exp(xi)
    s[-1] = problem.sL
    s_half = problem.s0 * np.exp(xi[:-1] + 0.5 * h)
    a_half = np.asarray(metric.A(s_half), dtype=float)
    r_half = np.asarray(metric.R(s_half), dtype=float)
    inner = s[1:-1]
    a_in = np.asarray(metric.A(inner), dtype=float)
    r_in = np.asarray(metric.R(inner), dtype=float)
    return _Stencil(
        s=s,
        h=h,
        flux_weight=r_half * r_half,
        half_scale=1.0 / (h * s_half * np.sqrt(a_half)),
        divergence=1.0 / (np.sqrt(a_in) * r_in * r_in * h * inner),
        gradient_scale=1.0 / (2.0 * h * inner * np.sqrt(a_in)),
    )


def _upwind_gradient(st: _Stencil, u: np.ndarray) -> np.ndarray:
    """u'/sqrt(A) at interior nodes, one-sided from the inner boundary: second
    order (3, -4, 1) except at the first node."""
    diff = np.empty(u.size - 2)
    diff[0] = 2.0 * (u[1] - u[0])
    diff[1:] = 3.0 * u[2:-1] - 4.0 * u[1:-2] + u[:-3]
    return st.gradient_scale * diff


class RegSolverService:
    """Finite-difference Newton solver for the elliptic regularization of
    the level-set flow equation in the radial reduction."""

    def __init__(self, settings: Settings, geometry_service: GeometryService,
                 flow_service: FlowService):
        self.settings = settings
        self.geometry_service = geometry_service
        self.flow_service = flow_service

    def make_problem(self, metric: RadialMetric, s0: float, L: float, epsilon: float,
                     n: int) -> RegularizedProblem:
        if not (0.0 < epsilon <= 1.0):
            raise SolverError(f"epsilon must lie in (0, 1], got {epsilon!r}", epsilon=epsilon)
        if n < 64:
            raise SolverError(f"grid size must be at least 64, got {n}", n=n)
        if L <= 2.0:
            raise SolverError("L must exceed 2", L=L)
        if not (s0 > 0.0 and metric.s_min <= s0 < metric.s_max):
            raise SolverError("s0 must be a positive coordinate inside the metric domain",
                              s0=s0, s_min=metric.s_min, s_max=metric.s_max)
        r0 = float(metric.R(s0))
        if r0 <= 0.0:
            raise SolverError("inner boundary sphere is degenerate", s0=s0)
        target = r0 * math.exp(0.5 * L)
        sL = self._outer_boundary(metric, s0, target)
        if sL <= s0:
            raise SolverError("outer boundary does not lie beyond s0", s0=s0, sL=sL)
        return RegularizedProblem(metric=metric, s0=s0, L=L, sL=sL, epsilon=epsilon, n=n)

    def _outer_boundary(self, metric: RadialMetric, s0: float, target: float) -> float:
        grid = np.geomspace(s0, metric.s_max, 4096)
        radius = np.asarray(metric.R(grid), dtype=float)
        above = np.nonzero(radius >= target)[0]
        if above.size == 0:
            logging.warning(
                f"Outer boundary capped by the metric domain at s={metric.s_max:g} "
                f"(areal radius {radius[-1]:.4g} < {target:.4g})")
            return float(metric.s_max)
        k = int(above[0])
        if k == 0:
            return float(grid[0])
        return brentq(lambda x: float(metric.R(x)) - target, float(grid[k - 1]), float(grid[k]),
                      xtol=1e-14 * float(grid[k]))

    def default_initial(self, problem: RegularizedProblem) -> np.ndarray:
        """Log-barrier shape C log(R/R(s0)) scaled to the boundary data."""
        s = problem.grid()
        s[-1] = problem.sL
        level = np.log(np.asarray(problem.metric.R(s), dtype=float) / float(problem.metric.R(problem.s0)))
        u = (problem.L - 2.0) * level / level[-1]
        u[0], u[-1] = problem.boundary_values()
        return u

    def assemble_residual(self, problem: RegularizedProblem, u: np.ndarray,
                          stencil: Optional[_Stencil] = None) -> np.ndarray:
        """Discrete E^eps u at every node (zero on the two boundary nodes)."""
        st = stencil or _stencil(problem)
        u = np.asarray(u, dtype=float)
        eps2 = problem.epsilon**2
        q_half = st.half_scale * np.diff(u)
        with np.errstate(invalid="ignore", divide="ignore"):
            phi = q_half / np.sqrt(q_half * q_half + eps2)
        phi = np.where(np.isfinite(phi), phi, 0.0)
        flux = st.flux_weight * phi
        q_node = _upwind_gradient(st, u)
        out = np.zeros_like(u)
        out[1:-1] = st.divergence * (flux[1:] - flux[:-1]) - np.sqrt(q_node * q_node + eps2)
        return out

    def _jacobian(self, problem: RegularizedProblem, u: np.ndarray, st: _Stencil):
        eps2 = problem.epsilon**2
        q_half = st.half_scale * np.diff(u)
        dphi = eps2 / (q_half * q_half + eps2)**1.5
        coupling = st.flux_weight * dphi * st.half_scale
        plus = st.divergence * coupling[1:]
        minus = st.divergence * coupling[:-1]
        q_node = _upwind_gradient(st, u)
        weight = q_node * st.gradient_scale / np.sqrt(q_node * q_node + eps2)
        own = np.full_like(weight, 3.0)
        own[0] = 2.0
        lower2 = -weight
        lower2[:2] = 0.0
        return lower2, minus + 4.0 * weight, -(plus + minus) - own * weight, plus

    def _newton(self, problem: RegularizedProblem, u: np.ndarray, st: _Stencil,
                label: str) -> SolverResult:
        settings = self.settings
        u = u.copy()
        u[0], u[-1] = problem.boundary_values()
        residual = self.assemble_residual(problem, u, st)
        history = []
        best_u, best_norm = u.copy(), math.inf
        iterations = 0
        converged = False
        for iterations in range(settings.NEWTON_MAX_ITERATIONS + 1):
            norm = float(np.max(np.abs(residual)))
            history.append(norm)
            if norm < best_norm:
                best_u, best_norm = u.copy(), norm
            if norm <= settings.RESIDUAL_TOLERANCE * (1.0 + float(np.max(np.abs(u)))):
                converged = True
                break
            if iterations == settings.NEWTON_MAX_ITERATIONS:
                break

            lower2, lower, diag, upper = self._jacobian(problem, u, st)
            if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
                bad = int(np.argmin(np.where(np.isfinite(diag), np.abs(diag), 0.0))) + 1
                raise SingularLinearizationError(bad, s=float(st.s[bad]))
            banded = np.zeros((4, diag.size))
            banded[0, 1:] = upper[:-1]
            banded[1] = diag
            banded[2, :-1] = lower[1:]
            banded[3, :-2] = lower2[2:]
            try:
                step = solve_banded((2, 1), banded, -residual[1:-1])
            except np.linalg.LinAlgError:
                bad = int(np.argmin(np.abs(diag))) + 1
                raise SingularLinearizationError(bad, s=float(st.s[bad]))

            merit = float(residual @ residual)
            lam = 1.0
            accepted = False
            while lam >= settings.NEWTON_MIN_STEP:
                trial = u.copy()
                trial[1:-1] += lam * step
                trial_residual = self.assemble_residual(problem, trial, st)
                trial_merit = float(trial_residual @ trial_residual)
                if math.isfinite(trial_merit) and \
                        trial_merit <= (1.0 - 2.0 * settings.NEWTON_ARMIJO * lam) * merit:
                    accepted = True
                    break
                lam *= 0.5
            if not accepted:
                logging.debug(f"{label}: line search stalled at |F|={norm:.3e}")
                break
            u, residual = trial, trial_residual
            logging.debug(f"{label}: iteration {iterations + 1}, step {lam:g}, |F|={norm:.3e}")

        if not converged:
            u = best_u
        return SolverResult(problem=problem, s=st.s, u=u, residual_norm=min(best_norm, history[-1]),
                            newton_iterations=iterations, converged=converged,
                            total_iterations=iterations, history=history)

    def _continuation_path(self, epsilon: float) -> List[float]:
        path = []
        k = 0
        while True:
            value = 10.0**(-0.5 * k)
            if value <= epsilon * (1.0 + 1e-9):
                break
            path.append(value)
            k += 1
        return path

    def solve_newton(self, problem: RegularizedProblem,
                     initial: Optional[np.ndarray] = None) -> SolverResult:
        st = _stencil(problem)
        tag = f"eps={problem.epsilon:g} n={problem.n}"
        if initial is not None:
            start = np.asarray(initial, dtype=float)
            if start.shape != (problem.n,):
                raise SolverError("initial guess does not match the grid", n=problem.n,
                                  length=int(start.size))
            result = self._newton(problem, start, st, tag)
            if result.converged:
                logging.info(f"Newton {tag}: converged in {result.newton_iterations} steps, "
                             f"|F|={result.residual_norm:.2e}")
                return result
            logging.info(f"Newton {tag}: warm start failed, falling back to continuation")

        u = self.default_initial(problem)
        spent = 0
        for eps in self._continuation_path(problem.epsilon):
            stage = self._newton(replace(problem, epsilon=eps), u, st, f"continuation eps={eps:g}")
            spent += stage.newton_iterations
            u = stage.u
        result = self._newton(problem, u, st, tag)
        result.total_iterations = spent + result.newton_iterations
        if result.converged:
            logging.info(f"Newton {tag}: converged in {result.newton_iterations} steps "
                         f"({result.total_iterations} with continuation), |F|={result.residual_norm:.2e}")
        else:
            logging.warning(f"Newton {tag}: no convergence, best |F|={result.residual_norm:.2e}")
        return result

    def level_set_extract(self, result: SolverResult, t: float) -> LevelSetCrossing:
        top = result.problem.L - 2.0
        if not (0.0 <= t <= top * (1.0 + 1e-14)):
            raise SolverError(f"level {t!r} outside [0, {top!r}]", level=t)
        u = result.u
        monotone = bool(np.all(np.diff(u) >= -self.settings.RESIDUAL_TOLERANCE))
        if not monotone:
            logging.warning("Level-set extraction on a non-monotone solution; first crossing used")
        above = np.nonzero(u >= t)[0]
        k = int(above[0]) if above.size else u.size - 1
        if k == 0:
            return LevelSetCrossing(level=t, s=float(result.s[0]), monotone=monotone)
        xi = result.xi
        interp = PchipInterpolator(xi, u)
        lo, hi = float(xi[k - 1]), float(xi[k])
        if u[k] == t:
            root = hi
        else:
            root = brentq(lambda x: float(interp(x)) - t, lo, hi, xtol=1e-15)
        return LevelSetCrossing(level=t, s=float(result.problem.s0 * math.exp(root)),
                                monotone=monotone)

    def subsolution_barrier(self, problem: RegularizedProblem,
                            result: SolverResult) -> BarrierReport:
        if problem.sL < 2.0 * problem.s0:
            return BarrierReport(holds=False, status="insufficient asymptotic range")
        if not result.converged:
            return BarrierReport(holds=False, status="solution not converged")
        metric = problem.metric
        s = result.s
        level = np.log(np.asarray(metric.R(s), dtype=float) / float(metric.R(problem.s0)))
        window = result.xi >= 0.5 * problem.xi_max
        slope = float(np.polyfit(level[window], result.u[window], 1)[0])
        c1 = min(max(slope, 0.0), 2.0)
        c2 = max(0.0, float(np.max(c1 * level[window] - result.u[window])))
        gap = result.u[window] - (c1 * level[window] - c2)

        barrier_residual = self.assemble_residual(problem, c1 * level)
        interior = window.copy()
        interior[0] = interior[-1] = False
        min_barrier = float(np.min(barrier_residual[interior]))
        tol = self.settings.RESIDUAL_TOLERANCE * (1.0 + problem.L)
        holds = min_barrier >= -tol and float(np.min(gap)) >= -tol
        status = "holds" if holds else "log barrier is not a subsolution on the outer half"
        return BarrierReport(holds=holds, status=status, c1=c1, c2=c2,
                             min_barrier_residual=min_barrier, min_gap=float(np.min(gap)))

    def core_limit(self, metric: RadialMetric, s0: float, L: float) -> float:
        """Largest s whose flat-model level 2 log(R/R(s0)) stays below
        CORE_FRACTION * (L - 2)."""
        target = float(metric.R(s0)) * math.exp(0.5 * self.settings.CORE_FRACTION * (L - 2.0))
        return self._outer_boundary(metric, s0, target)

    def _on_core(self, result: SolverResult, core_xi: np.ndarray) -> np.ndarray:
        return PchipInterpolator(result.xi, result.u)(core_xi)

    def convergence_study(self, metric: RadialMetric, s0: float,
                          schedule: Sequence[Tuple[float, float, int]]) -> ConvergenceReport:
        return self.run_schedule(metric, s0, schedule)[0]

    def run_schedule(self, metric: RadialMetric, s0: float,
                     schedule: Sequence[Tuple[float, float, int]]
                     ) -> Tuple[ConvergenceReport, List[SolverResult]]:
        """Warm-started stages of decreasing epsilon, compared on the core with
        each other and with the exact level-set function."""
        if not schedule:
            raise SolverError("empty convergence schedule")
        eps = [stage[0] for stage in schedule]
        levels = [stage[1] for stage in schedule]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise SolverError("schedule must be strictly decreasing in epsilon", schedule=str(eps))
        if any(b < a for a, b in zip(levels, levels[1:])):
            raise SolverError("schedule must not decrease in L", schedule=str(levels))

        core_s = self.core_limit(metric, s0, min(levels))
        core_xi = np.linspace(0.0, math.log(core_s / s0), self.settings.CORE_POINTS)
        core = s0 * np.exp(core_xi)
        profile = self.flow_service.exact_flow(metric, s0, max(levels), 64)
        exact = self.flow_service.level_set_time(profile, core)

        stages: List[StageRecord] = []
        results: List[SolverResult] = []
        previous: Optional[SolverResult] = None
        previous_core: Optional[np.ndarray] = None
        for epsilon, L, n in schedule:
            problem = self.make_problem(metric, s0, L, epsilon, n)
            initial = None
            if previous is not None:
                initial = np.interp(problem.xi(), previous.xi, previous.u)
            result = self.solve_newton(problem, initial)
            if not result.converged:
                raise SolverError(f"stage eps={epsilon:g} did not converge",
                                  epsilon=epsilon, residual=result.residual_norm)
            values = self._on_core(result, core_xi)
            stages.append(StageRecord(
                epsilon=epsilon, L=L, n=n, sL=problem.sL, converged=result.converged,
                newton_iterations=result.newton_iterations, residual_norm=result.residual_norm,
                successive_distance=(None if previous_core is None else
                                     float(np.max(np.abs(values - previous_core)))),
                exact_error=float(np.max(np.abs(values - exact)))))
            previous, previous_core = result, values
            results.append(result)
            logging.info(f"Convergence stage eps={epsilon:g}: core error {stages[-1].exact_error:.3e}")

        distances = [st.successive_distance for st in stages[1:]]
        errors = [st.exact_error for st in stages]
        successive_monotone = all(b < a for a, b in zip(distances, distances[1:]))
        exact_monotone = all(b < a for a, b in zip(errors, errors[1:]))
        report = ConvergenceReport(passed=successive_monotone and exact_monotone, core_s_max=core_s,
                                   stages=stages, successive_monotone=successive_monotone,
                                   exact_monotone=exact_monotone)
        return report, results

    def refinement_study(self, problem: RegularizedProblem, levels: int = 2,
                         min_ratio: float = 3.0) -> RefinementReport:
        """Core error of n, 2n-1, ... against a nested solve one level finer."""
        sizes = [(problem.n - 1) * 2**k + 1 for k in range(levels + 1)]
        results = []
        for size in sizes:
            result = self.solve_newton(replace(problem, n=size))
            if not result.converged:
                raise SolverError(f"refinement solve n={size} did not converge", n=size)
            results.append(result)
        reference = results[-1]
        core_s = self.core_limit(problem.metric, problem.s0, problem.L)

        entries: List[RefinementLevel] = []
        for k, result in enumerate(results[:-1]):
            stride = 2**(levels - k)
            mask = result.s <= core_s
            error = float(np.max(np.abs(result.u[mask] - reference.u[::stride][mask])))
            ratio = None if not entries else entries[-1].error / error if error > 0.0 else math.inf
            entries.append(RefinementLevel(n=result.problem.n, error=error, ratio=ratio))
        ratios = [e.ratio for e in entries if e.ratio is not None]
        order = math.log2(ratios[-1]) if ratios and math.isfinite(ratios[-1]) else None
        passed = bool(ratios) and all(r >= min_ratio for r in ratios)
        logging.info(f"Refinement at eps={problem.epsilon:g}: errors "
                     f"{[f'{e.error:.2e}' for e in entries]}")
        return RefinementReport(passed=passed, epsilon=problem.epsilon, reference_n=reference.problem.n,
                                levels=entries, observed_order=order)
