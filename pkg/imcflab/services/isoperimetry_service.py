import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import sici

from config.settings import Settings
from imcflab.errors import DerivativeNoiseError, FlowError, ImcfLabError, OracleError
from imcflab.metrics import RadialMetric, VolumeTable
from imcflab.models import (BoundReport, CandidateRegion, ChainReport, ChainViolation,
                            MassComparisonEntry, MassComparisonReport, MeeksYauParams,
                            MonotonicityReport, OracleResult, RigidityReport)

from .flow_service import FlowProfile, FlowService
from .geometry_service import GeometryService

SQRT_16PI = math.sqrt(16.0 * math.pi)
SIX_SQRT_PI = 6.0 * math.sqrt(math.pi)
CLASSICAL_CONSTANT = (36.0 * math.pi)**(1.0 / 3.0)
EULER_GAMMA = 0.57721566490153286061


def classical_area(v):
    """Area of the Euclidean ball of volume v."""
    return CLASSICAL_CONSTANT * np.power(v, 2.0 / 3.0)


@dataclass
class IsoProfile:
    metric: RadialMetric
    v_grid: np.ndarray
    A: np.ndarray
    A_ext: np.ndarray
    candidates: List[CandidateRegion]
    candidates_ext: List[CandidateRegion]
    base: str
    s_ext: float = 0.0

    def rows(self):
        for k in range(self.v_grid.size):
            yield (self.v_grid[k], self.A[k], self.A_ext[k], self.candidates_ext[k].describe())


class IsoperimetryService:

    def __init__(self, settings: Settings, geometry_service: GeometryService,
                 flow_service: FlowService):
        self.settings = settings
        self.geometry_service = geometry_service
        self.flow_service = flow_service
        self._tables = lru_cache(maxsize=settings.METRIC_CACHE_SIZE)(geometry_service.volume_table)
        self._exteriors = lru_cache(maxsize=settings.METRIC_CACHE_SIZE)(self._exterior_start)

    # Flow-side integrals

    def _integrand(self, metric: RadialMetric, s):
        b = np.asarray(metric.area(s), dtype=float)
        m = np.asarray(self.geometry_service.hawking_mass(metric, s), dtype=float)
        return np.sqrt(np.clip(1.0 - SQRT_16PI * m / np.sqrt(b), 0.0, None))

    def _clamped(self, profile: FlowProfile) -> bool:
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = 1.0 - SQRT_16PI * profile.m / np.sqrt(profile.B)
        return bool(np.any(raw < -self.settings.BOUND_TOLERANCE))

    def mass_integral(self, profile: FlowProfile, v: float) -> Tuple[float, float]:
        """int_0^v (1 - sqrt(16 pi) B^-1/2 m)^1/2 dv' and its quadrature error.

        Smooth stretches are integrated in s against the volume density; on a
        jump interval the integrand is frozen at K_t1.
        """
        if v <= 0.0:
            return 0.0, 0.0
        if v > profile.v_max * (1.0 + 1e-12):
            raise FlowError(f"volume {v!r} beyond the flow range", v=v, v_max=profile.v_max)
        metric = profile.metric
        epsrel, limit = self.settings.QUAD_EPSREL, self.settings.QUAD_LIMIT

        def weighted(x):
            with np.errstate(all="ignore"):
                value = float(self._integrand(metric, x) * metric.volume_density(x))
            return value if math.isfinite(value) else 0.0

        total, error = 0.0, 0.0
        cursor = profile.start
        for jump in sorted(profile.jumps, key=lambda j: j.v_before):
            if jump.v_before >= v:
                break
            if jump.s_before > cursor:
                piece, err = quad(weighted, cursor, jump.s_before, epsabs=0.0, epsrel=epsrel,
                                  limit=limit)
                total += piece
                error += err
            anchor = jump.s_after if jump.initial else jump.s_before
            frozen = float(self._integrand(metric, anchor))
            total += frozen * (min(v, jump.v_after) - jump.v_before)
            cursor = jump.s_after
            if v <= jump.v_after:
                return total, error
        s_v = profile.table.coordinate(min(v, profile.v_max))
        if s_v > cursor:
            piece, err = quad(weighted, cursor, s_v, epsabs=0.0, epsrel=epsrel, limit=limit)
            total += piece
            error += err
        return total, error

    def theorem1_rhs(self, profile: FlowProfile, v: float) -> float:
        """(36 pi)^1/3 (int_0^v ...)^2/3 for a flow started at a point."""
        if profile.B0 > self.settings.POINT_AREA_TOLERANCE:
            raise FlowError("point-start bound needs a flow started at a point; use check_bound",
                            initial_area=profile.B0)
        if self._clamped(profile):
            logging.warning("Hawking mass exceeded the area cap; integrand clamped at 0")
        integral, _ = self.mass_integral(profile, v)
        return CLASSICAL_CONSTANT * integral**(2.0 / 3.0)

    def bound_rhs(self, profile: FlowProfile, v: float) -> Tuple[float, float]:
        """(B0^3/2 + 6 sqrt(pi) int_0^v ...)^2/3 and the integral's error."""
        integral, error = self.mass_integral(profile, v)
        return (profile.B0**1.5 + SIX_SQRT_PI * integral)**(2.0 / 3.0), error

    def _hypothesis_met(self, metric: RadialMetric, s_lo: float, s_hi: float) -> Optional[bool]:
        try:
            return self.geometry_service.min_scalar_curvature(
                metric, s_lo, s_hi) >= -self.settings.SCALAR_CURVATURE_TOLERANCE
        except DerivativeNoiseError:
            return None

    def check_bound(self, profile: FlowProfile, v_grid: Sequence[float]) -> List[BoundReport]:
        hypothesis = self._hypothesis_met(profile.metric, float(profile.s[0]), float(profile.s[-1]))
        if hypothesis is not True:
            logging.warning(f"Bound check on {profile.metric.name}: nonnegative scalar curvature "
                            f"{'not met' if hypothesis is False else 'undetermined'}")
        if self._clamped(profile):
            logging.warning("Hawking mass exceeded the area cap; integrand clamped at 0")

        reports = []
        for v in v_grid:
            v = float(v)
            point = profile.locate(v)
            rhs, error = self.bound_rhs(profile, v)
            rhs15 = rhs**1.5
            slack = (rhs15 - point.B**1.5) / rhs15
            quad_error = SIX_SQRT_PI * error / rhs15
            mass_free = (profile.B0**1.5 + SIX_SQRT_PI * v)**(2.0 / 3.0)
            improvement = (mass_free - rhs) / mass_free
            if hypothesis is not True:
                verdict = "hypothesis-not-met"
            elif slack >= -max(self.settings.BOUND_TOLERANCE, 10.0 * quad_error):
                verdict = "pass"
            else:
                verdict = "fail"
            reports.append(BoundReport(v=v, B=point.B, rhs=rhs, classical=float(classical_area(v)),
                                       slack=slack, improvement=improvement,
                                       quad_error=quad_error, verdict=verdict))
        passed = sum(1 for r in reports if r.verdict == "pass")
        logging.info(f"Bound check on {profile.metric.name}: {passed}/{len(reports)} volumes pass")
        return reports

    # Isoperimetric oracle

    def _table(self, metric: RadialMetric) -> VolumeTable:
        return self._tables(metric)

    def _exterior(self, metric: RadialMetric) -> float:
        return self._exteriors(metric)

    def _exterior_start(self, metric: RadialMetric) -> float:
        return self.geometry_service.exterior_region(metric).s_ext

    def _boundary_area(self, metric: RadialMetric, s: float) -> float:
        """Area a centered sphere contributes to a region's perimeter.

        Perimeter is measured inside M, in both oracle modes. The inner end
        s_min is a center or the boundary of M and contributes nothing. Any
        other sphere lies in the interior of M and counts in full, including
        the outermost minimal sphere when it is the inner wall of an exterior
        region.
        """
        if s <= metric.s_min:
            return 0.0
        return float(metric.area(s))

    def oracle_A(self, metric: RadialMetric, v: float, mode: str = "full") -> OracleResult:
        if mode not in ("full", "exterior"):
            raise OracleError(f"unknown oracle mode '{mode}'", mode=mode)
        table = self._table(metric)
        lo = metric.s_min
        if mode == "exterior":
            lo = self._exterior(metric)
        base = table.volume(lo)
        room = table.total - base
        if not (0.0 < v < room):
            raise OracleError(f"volume {v!r} not attainable by centered regions",
                              v=v, attainable=room, mode=mode)

        outer = table.coordinate(base + v)
        best_area = self._boundary_area(metric, lo) + float(metric.area(outer))
        best = CandidateRegion(kind="ball" if lo <= metric.s_min else "annulus",
                               inner=lo, outer=outer)

        spare = room - v
        if spare > 0.0:
            offsets = np.geomspace(min(spare, v) * 1e-6, spare, self.settings.ORACLE_GRID_SIZE)
            inner_est = table.coordinate_estimate(base + offsets)
            outer_est = table.coordinate_estimate(base + offsets + v)
            estimates = np.asarray(metric.area(inner_est) + metric.area(outer_est), dtype=float)
            j = int(np.argmin(estimates))
            if estimates[j] < best_area:
                lo_u = offsets[max(j - 1, 0)]
                hi_u = offsets[min(j + 1, offsets.size - 1)]

                def annulus_area(u):
                    a = table.coordinate(base + u)
                    b = table.coordinate(base + u + v)
                    return float(metric.area(a) + metric.area(b))

                result = minimize_scalar(annulus_area, bounds=(lo_u, hi_u), method="bounded",
                                         options={"xatol": 1e-10 * hi_u})
                if result.fun < best_area:
                    best_area = float(result.fun)
                    best = CandidateRegion(kind="annulus", inner=table.coordinate(base + result.x),
                                           outer=table.coordinate(base + result.x + v))
        logging.debug(f"Oracle {mode} v={v:g}: {best.describe()} area={best_area:.12g}")
        return OracleResult(v=v, area=best_area, candidate=best)

    def build_iso_profile(self, metric: RadialMetric, v_grid: Sequence[float]) -> IsoProfile:
        v_grid = np.asarray(v_grid, dtype=float)
        if np.any(np.diff(v_grid) <= 0.0):
            raise OracleError("volume grid must be strictly increasing")
        areas, areas_ext, cands, cands_ext = [], [], [], []
        for v in v_grid:
            full = self.oracle_A(metric, float(v), "full")
            ext = self.oracle_A(metric, float(v), "exterior")
            # exterior competitors are admissible in the full class too
            if ext.area < full.area:
                full = ext
            areas.append(full.area)
            areas_ext.append(ext.area)
            cands.append(full.candidate)
            cands_ext.append(ext.candidate)
        winners = {c.kind for c in cands_ext}
        logging.info(f"Isoperimetric profile of {metric.name} on {v_grid.size} volumes; "
                     f"exterior winners: {sorted(winners)}")
        return IsoProfile(metric=metric, v_grid=v_grid, A=np.asarray(areas),
                          A_ext=np.asarray(areas_ext), candidates=cands,
                          candidates_ext=cands_ext,
                          base="centered balls and annuli; volume from s_min",
                          s_ext=self._exterior(metric))

    def monotonicity_check(self, iso: IsoProfile) -> MonotonicityReport:
        if iso.v_grid.size < 16:
            raise OracleError("A_ext monotonicity needs at least 16 sampled volumes",
                              samples=int(iso.v_grid.size))
        steps = np.diff(iso.A_ext)
        allowance = self.settings.ORACLE_TOLERANCE * (1.0 + np.abs(iso.A_ext[1:]))
        bad = np.nonzero(steps < -allowance)[0]
        first = int(bad[0]) + 1 if bad.size else None
        if first is not None:
            logging.warning(f"A_ext decreases at index {first} (v={iso.v_grid[first]:g})")
        return MonotonicityReport(passed=first is None,
                                  worst_decrement=float(max(0.0, -np.min(steps))),
                                  first_failure=first)

    # Rigidity

    def rigidity_probe(self, metric: RadialMetric, profile: Optional[FlowProfile],
                       iso: IsoProfile, tol: Optional[float] = None) -> RigidityReport:
        tol = self.settings.RIGIDITY_TOLERANCE if tol is None else tol
        hypothesis = self._hypothesis_met(metric, metric.s_min, metric.s_max)
        classical = classical_area(iso.v_grid)
        gaps = np.abs(iso.A - classical) / classical
        equal = gaps <= tol
        volumes = [float(v) for v in iso.v_grid[equal]]

        on_jump = []
        if profile is not None:
            for v in volumes:
                jump = profile.jump_at_volume(v) if v <= profile.v_max else None
                if jump is not None and not jump.initial and jump.v_before < v < jump.v_after:
                    on_jump.append(v)

        report = RigidityReport(equality_found=bool(volumes), equality_volumes=volumes,
                                equality_on_jump=on_jump, min_relative_gap=float(np.min(gaps)),
                                consistent=True, hypothesis_met=hypothesis)
        if volumes:
            scal = self.geometry_service.max_abs_scalar_curvature(metric)
            try:
                adm = self.geometry_service.adm_mass(metric)
            except ImcfLabError as e:
                logging.warning(f"Rigidity probe: ADM mass unavailable ({e.message})")
                adm = None
            flat = (scal <= self.settings.FLATNESS_TOLERANCE and adm is not None and
                    abs(adm) <= self.settings.FLATNESS_TOLERANCE)
            report.max_abs_scalar_curvature = scal
            report.adm_mass = adm
            report.flat = flat
            report.consistent = flat and not on_jump
            logging.info(f"Rigidity probe on {metric.name}: equality at {len(volumes)} volume(s), "
                         f"flat={flat}")
        else:
            logging.info(f"Rigidity probe on {metric.name}: no equality, "
                         f"minimal relative gap {report.min_relative_gap:.3e}")
        return report

    # Meeks-Yau

    def meeks_yau_integral(self, K: float, r: float) -> float:
        """2 pi K^-2 int_0^r sin(K tau)^2 / tau d tau."""
        if r <= 0.0:
            return 0.0

        def integrand(tau):
            x = K * tau
            if x < 1e-4:
                # sin^2(x)/tau = K^2 tau - K^4 tau^3 / 3 + ...
                return tau * K * K * (1.0 - x * x / 3.0)
            return math.sin(x)**2 / tau

        value, _ = quad(integrand, 0.0, r, epsabs=0.0, epsrel=1e-13,
                        limit=max(self.settings.QUAD_LIMIT, int(4 * K * r) + 50))
        return 2.0 * math.pi * value / (K * K)

    def meeks_yau_bound(self, params: MeeksYauParams) -> float:
        return self.meeks_yau_integral(params.K, params.r)

    @staticmethod
    def meeks_yau_closed_form(K: float, r: float) -> float:
        """(pi / K^2) Cin(2 K r) with Cin(z) = gamma + ln z - Ci(z)."""
        z = 2.0 * K * r
        if z <= 0.0:
            return 0.0
        _, ci = sici(z)
        return math.pi * (EULER_GAMMA + math.log(z) - ci) / (K * K)

    # Comparisons across the profile

    def mass_comparison(self, profiles: Sequence[Tuple[float, FlowProfile]],
                        v: float) -> MassComparisonReport:
        entries = []
        for mass, profile in sorted(profiles, key=lambda item: item[0]):
            rhs, _ = self.bound_rhs(profile, v)
            entries.append(MassComparisonEntry(mass=mass, rhs=rhs))
        values = [e.rhs for e in entries]
        decreasing = all(b < a for a, b in zip(values, values[1:]))
        return MassComparisonReport(v=v, entries=entries, decreasing=decreasing)

    def chain_check(self, profile: FlowProfile, iso: IsoProfile) -> ChainReport:
        """A <= A_ext <= B <= rhs at every oracle volume the flow reaches."""
        rel = self.settings.ORACLE_TOLERANCE
        violations = []
        checked = 0
        for k, v in enumerate(iso.v_grid):
            if v > profile.v_max:
                break
            b = profile.locate(float(v)).B
            rhs, error = self.bound_rhs(profile, float(v))
            links = (
                ("A<=A_ext", iso.A[k], iso.A_ext[k], rel),
                ("A_ext<=B", iso.A_ext[k], b, rel),
                ("B<=rhs", b, rhs, max(self.settings.BOUND_TOLERANCE, 10.0 * error / rhs)),
            )
            for name, lhs, upper, slack in links:
                if lhs > upper * (1.0 + slack):
                    violations.append(ChainViolation(v=float(v), link=name, lhs=float(lhs),
                                                     rhs=float(upper)))
            checked += 1
        return ChainReport(passed=not violations and checked > 0, checked=checked,
                           violations=violations)
