import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from config.settings import Settings
from imcflab.errors import DerivativeNoiseError, FlowError, FlowUndefinedError
from imcflab.metrics import RadialMetric, VolumeTable, radial_grid
from imcflab.models import GerochReport, JumpEvent, LipschitzReport, VolumeGrowthReport
from imcflab.utils.numerics import five_point_derivative

from .geometry_service import GeometryService

DEGENERATE_START_SKIP = 12


@dataclass(frozen=True)
class JumpInterval:
    s_before: float
    s_after: float
    area: float
    initial: bool = False


@dataclass
class HullEnvelope:
    """Area profile on a grid together with its suffix minimum.

    A centered sphere bounds a minimizing hull exactly where the area equals
    the envelope. Maximal runs where it does not are the jump basins.
    """
    grid: np.ndarray
    area: np.ndarray
    envelope: np.ndarray
    jumps: List[JumpInterval]

    def basin_containing(self, s: float, tol: float = 1e-12) -> Optional[JumpInterval]:
        for jump in self.jumps:
            lo = jump.s_before + tol * (1.0 + abs(jump.s_before))
            if lo < s < jump.s_after:
                return jump
        return None


@dataclass(frozen=True)
class FlowPoint:
    t: float
    s: float
    B: float
    m: float
    on_jump: bool


@dataclass
class FlowProfile:
    """Sampled weak flow of centered spheres, uniform in t."""
    metric: RadialMetric
    start: float
    t: np.ndarray
    s: np.ndarray
    B: np.ndarray
    m: np.ndarray
    v: np.ndarray
    H: np.ndarray
    jumps: List[JumpEvent]
    truncated: bool
    table: VolumeTable = field(repr=False)
    hawking_mass: Callable = field(repr=False)

    @property
    def B0(self) -> float:
        return float(self.B[0])

    @property
    def v_max(self) -> float:
        return float(self.v[-1])

    def jump_at_volume(self, v: float) -> Optional[JumpEvent]:
        for jump in self.jumps:
            if jump.v_before <= v <= jump.v_after:
                return jump
        return None

    def locate(self, v: float) -> FlowPoint:
        """Flow time, coordinate, area and mass of G_t at enclosed volume v."""
        if not (0.0 <= v <= self.v_max * (1.0 + 1e-12)):
            raise FlowError(f"volume {v!r} outside the sampled range [0, {self.v_max!r}]",
                            v=v, v_max=self.v_max)
        v = min(v, self.v_max)
        s = self.table.coordinate(v)
        jump = self.jump_at_volume(v)
        if jump is not None:
            # K_t1 for a regular jump; the hull itself when the start was not minimizing
            anchor = jump.s_after if jump.initial else jump.s_before
            return FlowPoint(t=jump.t1, s=s, B=jump.area_after,
                             m=float(self.hawking_mass(self.metric, anchor)),
                             on_jump=jump.v_before < v < jump.v_after)
        area = float(self.metric.area(s))
        return FlowPoint(t=max(0.0, math.log(area / self.B0)), s=s, B=area,
                         m=float(self.hawking_mass(self.metric, s)), on_jump=False)

    def segments(self) -> List[np.ndarray]:
        """Sample indices grouped between consecutive (non-initial) jumps."""
        times = [j.t1 for j in self.jumps if not j.initial]
        labels = np.searchsorted(np.asarray(sorted(times)), self.t, side="left") \
            if times else np.zeros(self.t.size, dtype=int)
        return [np.nonzero(labels == k)[0] for k in range(len(times) + 1)]

    def rows(self):
        for k in range(self.t.size):
            yield (self.t[k], self.s[k], self.B[k], self.m[k], self.v[k], self.H[k])


class FlowService:
    """Exact weak inverse mean curvature flow of centered spheres."""

    def __init__(self, settings: Settings, geometry_service: GeometryService):
        self.settings = settings
        self.geometry_service = geometry_service
        self._envelopes = lru_cache(maxsize=settings.METRIC_CACHE_SIZE)(self._build_envelope)

    def hull_envelope(self, metric: RadialMetric, s_lo: Optional[float] = None) -> HullEnvelope:
        s_lo = metric.s_min if s_lo is None else float(s_lo)
        return self._envelopes(metric, s_lo)

    def _build_envelope(self, metric: RadialMetric, s_lo: float) -> HullEnvelope:
        grid = radial_grid(s_lo, metric.s_max, self.settings.HULL_GRID_SIZE)
        area = np.asarray(metric.area(grid), dtype=float)
        envelope = np.minimum.accumulate(area[::-1])[::-1]
        basin = area > envelope

        jumps: List[JumpInterval] = []
        edges = np.diff(np.concatenate(([0], basin.astype(np.int8), [0])))
        starts = np.nonzero(edges == 1)[0]
        ends = np.nonzero(edges == -1)[0] - 1
        last = grid.size - 1
        for p, q in zip(starts, ends):
            landing = q + 1
            if landing == last and area[last] <= area[last - 1]:
                raise FlowError(
                    "area profile decreases toward the outer boundary; no minimizing hull exists",
                    s=float(grid[p]), s_max=metric.s_max)
            s_after, level = self._refine_minimum(metric, grid, area, landing)
            initial = False
            k = p - 1
            while k >= 0 and area[k] >= level:
                k -= 1
            if k < 0:
                initial = True
                s_before = float(grid[0])
            else:
                s_before = brentq(lambda x: float(metric.area(x)) - level,
                                  float(grid[k]), float(grid[p]),
                                  xtol=1e-15 * max(1.0, float(grid[p])), rtol=1e-15)
            jumps.append(JumpInterval(s_before=s_before, s_after=s_after, area=level,
                                      initial=initial))
            logging.debug(f"Hull envelope basin [{s_before:.12g}, {s_after:.12g}] at area {level:.12g}")
        return HullEnvelope(grid=grid, area=area, envelope=envelope, jumps=jumps)

    @staticmethod
    def _refine_minimum(metric: RadialMetric, grid: np.ndarray, area: np.ndarray,
                        k: int) -> Tuple[float, float]:
        if k >= grid.size - 1:
            return float(grid[k]), float(area[k])
        lo, hi = float(grid[k - 1]), float(grid[k + 1])
        result = minimize_scalar(lambda x: float(metric.area(x)), bounds=(lo, hi),
                                 method="bounded",
                                 options={"xatol": 1e-13 * max(1.0, hi)})
        if result.success and result.fun <= area[k]:
            return float(result.x), float(result.fun)
        return float(grid[k]), float(area[k])

    def minimizing_hull(self, metric: RadialMetric, s: float) -> float:
        metric.require_domain(s)
        jump = self.hull_envelope(metric).basin_containing(s)
        return jump.s_after if jump is not None else float(s)

    def strictly_minimizing_hull(self, metric: RadialMetric, s: float) -> float:
        """Largest centered ball of least area containing the ball of radius s."""
        metric.require_domain(s)
        for jump in self.hull_envelope(metric).jumps:
            near_start = abs(s - jump.s_before) <= 1e-9 * (1.0 + abs(s))
            if near_start or jump.s_before < s < jump.s_after:
                return jump.s_after
        return float(s)

    def exact_flow(self, metric: RadialMetric, s0: float, t_max: float, n: int) -> FlowProfile:
        metric.require_domain(s0)
        if float(metric.R(s0)) <= 0.0:
            raise FlowError("the flow starts from a sphere; pass a small positive s0", s0=s0)
        h0 = float(metric.mean_curvature(s0))
        if h0 < -self.settings.MONOTONICITY_TOLERANCE:
            raise FlowUndefinedError(s0, h0)
        if n < 2:
            raise FlowError("exact_flow needs at least two samples", n=n)

        envelope = self.hull_envelope(metric, s0)
        table = self.geometry_service.volume_table(metric, s0)
        start_area = float(metric.area(s0))
        start = s0
        jumps: List[JumpEvent] = []
        b0 = start_area
        for interval in envelope.jumps:
            if interval.initial:
                b0 = interval.area
                start = interval.s_after
                jumps.append(JumpEvent(t1=0.0, s_before=s0, s_after=interval.s_after,
                                       v_before=0.0, v_after=table.volume(interval.s_after),
                                       area_before=start_area, area_after=interval.area,
                                       initial=True))
                logging.info(f"Flow from s0={s0:g} starts with a jump to its hull at {start:.12g}")

        t_end = math.log(float(envelope.area[-1]) / b0)
        truncated = t_max > t_end
        if truncated:
            logging.warning(
                f"t_max={t_max:g} exceeds the metric domain; flow truncated at t={t_end:.6g}")
            t_max = t_end
        times = np.linspace(0.0, t_max, n)

        for interval in envelope.jumps:
            if interval.initial:
                continue
            t1 = math.log(interval.area / b0)
            if t1 > t_max:
                continue
            jumps.append(JumpEvent(t1=t1, s_before=interval.s_before, s_after=interval.s_after,
                                   v_before=table.volume(interval.s_before),
                                   v_after=table.volume(interval.s_after),
                                   area_before=float(metric.area(interval.s_before)),
                                   area_after=interval.area))
            logging.info(
                f"Jump at t={t1:.6g}: s {interval.s_before:.9g} -> {interval.s_after:.9g}")

        s = np.empty(n)
        s[0] = start
        for k in range(1, n):
            s[k] = self._coordinate_at_area(metric, envelope, b0 * math.exp(times[k]))
        if truncated:
            s[-1] = min(s[-1], metric.s_max)

        profile = FlowProfile(
            metric=metric,
            start=s0,
            t=times,
            s=s,
            B=np.asarray(metric.area(s), dtype=float),
            m=np.asarray(self.geometry_service.hawking_mass(metric, s), dtype=float),
            v=np.array([table.volume(float(x)) for x in s]),
            H=np.asarray(metric.mean_curvature(s), dtype=float),
            jumps=jumps,
            truncated=truncated,
            table=table,
            hawking_mass=self.geometry_service.hawking_mass,
        )
        logging.info(
            f"Flow on {metric.name} from s0={s0:g}: {n} samples up to t={t_max:.6g}, "
            f"{len(jumps)} jump(s), final m={profile.m[-1]:.9g}")
        return profile

    @staticmethod
    def _coordinate_at_area(metric: RadialMetric, envelope: HullEnvelope, target: float) -> float:
        env = envelope.envelope
        grid = envelope.grid
        k = int(np.searchsorted(env, target, side="left"))
        if k >= grid.size:
            return float(grid[-1])
        if k == 0 or envelope.area[k] == target:
            return float(grid[k])
        lo, hi = float(grid[k - 1]), float(grid[k])

        def gap(x):
            return float(metric.area(x)) - target

        f_lo, f_hi = gap(lo), gap(hi)
        if f_lo * f_hi > 0.0:
            return lo if abs(f_lo) <= abs(f_hi) else hi
        return brentq(gap, lo, hi, xtol=1e-15 * max(1.0, hi), rtol=1e-15, maxiter=200)

    def t_of_v(self, profile: FlowProfile, v: float) -> float:
        return profile.locate(v).t

    def level_set_time(self, profile: FlowProfile, s):
        """Arrival time t(s) of the exact flow, constant across jump basins."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr < profile.start) or np.any(s_arr > profile.metric.s_max):
            raise FlowError("level-set time requested outside the flow range",
                            s_min=float(s_arr.min()), s_max=float(s_arr.max()))
        with np.errstate(divide="ignore"):
            out = np.log(np.asarray(profile.metric.area(s_arr), dtype=float) / profile.B0)
        for jump in profile.jumps:
            inside = (s_arr > jump.s_before) & (s_arr <= jump.s_after)
            out[inside] = jump.t1
        out = np.maximum(out, 0.0)
        return float(out[0]) if np.ndim(s) == 0 else out

    def _segment_derivatives(self, profile: FlowProfile):
        """dv/dt per segment with a five-point stencil (uniform t)."""
        if profile.t.size < 2:
            return [], 1
        h = float(profile.t[1] - profile.t[0])
        pieces = []
        skipped = 0
        for idx in profile.segments():
            if idx.size < max(self.settings.MIN_SEGMENT_SAMPLES, 5):
                skipped += 1
                continue
            dvdt = five_point_derivative(profile.v[idx], h)
            # v ~ sqrt(t - t_start) when the segment starts on a minimal sphere
            if profile.H[idx[0]] <= 1e-3 * float(np.max(np.abs(profile.H[idx]))):
                dvdt[:DEGENERATE_START_SKIP] = np.nan
            pieces.append((idx, dvdt))
        return pieces, skipped

    def volume_growth_check(self, profile: FlowProfile, tol: float = 1e-4) -> VolumeGrowthReport:
        pieces, skipped = self._segment_derivatives(profile)
        flags = ["insufficient samples"] if skipped else []
        deviations = []
        for idx, dvdt in pieces:
            b, h = profile.B[idx], profile.H[idx]
            ok = np.isfinite(dvdt) & (h > 0.0)
            if not np.any(ok):
                continue
            expected = b[ok] / h[ok]
            deviations.append(np.abs(dvdt[ok] - expected) / expected)
        if not deviations:
            return VolumeGrowthReport(passed=False, max_deviation=None, checked_samples=0,
                                      skipped_segments=skipped, flags=flags or ["no interior samples"])
        all_dev = np.concatenate(deviations)
        worst = float(np.max(all_dev))
        return VolumeGrowthReport(passed=worst <= tol, max_deviation=worst,
                                  checked_samples=int(all_dev.size),
                                  skipped_segments=skipped, flags=flags)

    def lipschitz_bound_check(self, profile: FlowProfile, tol: float = 1e-4) -> LipschitzReport:
        pieces, skipped = self._segment_derivatives(profile)
        flags = ["insufficient samples"] if skipped else []
        jump_count = sum(1 for j in profile.jumps if not j.initial)
        margins, deviations = [], []
        for idx, dvdt in pieces:
            b, h = profile.B[idx], profile.H[idx]
            ok = np.isfinite(dvdt) & (h > 0.0) & (dvdt > 0.0)
            if not np.any(ok):
                continue
            lhs = 1.0 / dvdt[ok]
            # (int H^2)^(1/2) * area^(-3/2) with H constant on the sphere
            rhs = np.sqrt(h[ok]**2 * b[ok]) * b[ok]**-1.5
            margins.append((rhs - lhs) / rhs)
            deviations.append(np.abs(rhs - lhs) / rhs)
        if not margins:
            return LipschitzReport(passed=jump_count > 0 and not pieces, checked_samples=0,
                                   jump_intervals=jump_count, flags=flags or ["no interior samples"])
        margin = np.concatenate(margins)
        deviation = np.concatenate(deviations)
        worst = float(np.min(margin))
        return LipschitzReport(passed=worst >= -tol, worst_margin=worst,
                               equality_deviation=float(np.max(deviation)),
                               checked_samples=int(margin.size), jump_intervals=jump_count,
                               flags=flags)

    def geroch_check(self, profile: FlowProfile) -> GerochReport:
        metric = profile.metric
        hypothesis: Optional[bool]
        min_scal: Optional[float] = None
        try:
            min_scal = self.geometry_service.min_scalar_curvature(
                metric, float(profile.s[0]), float(profile.s[-1]))
            hypothesis = min_scal >= -self.settings.SCALAR_CURVATURE_TOLERANCE
        except DerivativeNoiseError as e:
            logging.warning(f"Geroch check: scalar curvature undetermined ({e.message})")
            hypothesis = None

        increments = np.diff(profile.m)
        allowance = self.settings.MONOTONICITY_TOLERANCE * (1.0 + np.abs(profile.m[1:]))
        monotone = bool(np.all(increments >= -allowance))
        min_inc = float(np.min(increments)) if increments.size else 0.0

        # an undetermined hypothesis cannot certify anything either
        if hypothesis is None:
            status, verdict = "hypothesis undetermined", "hypothesis-not-met"
        elif not hypothesis:
            status, verdict = "hypothesis not met", "hypothesis-not-met"
            logging.warning(f"Geroch check on {metric.name}: negative scalar curvature {min_scal:.3g}")
        else:
            status = "monotone" if monotone else "not monotone"
            verdict = "pass" if monotone else "fail"
        return GerochReport(verdict=verdict,
                            hypothesis_met=hypothesis, status=status, min_increment=min_inc,
                            final_mass=float(profile.m[-1]), min_scalar_curvature=min_scal)
