import logging
import math
from typing import Mapping, Optional

import numpy as np
from scipy.optimize import brentq

from config.settings import Settings
from imcflab.errors import (AdmMassError, AsymptoticFlatnessError, DerivativeNoiseError,
                            MetricError)
from imcflab.metrics import (GluedMetric, RadialMetric, TabulatedMetric, VolumeTable,
                             make_preset, radial_grid)
from imcflab.models import (AFDecayReport, AFDecaySample, ExteriorRegion, GluedMetricSpec,
                            MetricConfig, SphereGeometry)
from imcflab.utils.numerics import richardson_table

SIXTEEN_PI = 16.0 * math.pi


class GeometryService:
    """Pointwise geometry of centered spheres in a radial metric."""

    def __init__(self, settings: Settings):
        self.settings = settings

    def make_preset(self, name: str, params: Optional[Mapping[str, float]] = None) -> RadialMetric:
        metric = make_preset(name, params or {}, self.settings)
        logging.debug(f"Built preset metric {metric!r}")
        return metric

    def metric_from_config(self, config: MetricConfig) -> RadialMetric:
        if config.preset is not None:
            return self.make_preset(config.preset, config.params)
        if config.glued is not None:
            glued = config.glued
            return self.build_glued_metric(GluedMetricSpec(
                inner_metric=self.metric_from_config(glued.inner),
                transition_radius=glued.transition_radius, cap_scale=glued.cap_scale))
        samples = config.tabulated
        return TabulatedMetric(samples.s, samples.A, samples.R,
                               derivatives=samples.derivatives())

    def volume_table(self, metric: RadialMetric, s_lo: Optional[float] = None,
                     s_hi: Optional[float] = None) -> VolumeTable:
        return VolumeTable(metric,
                           metric.s_min if s_lo is None else s_lo,
                           metric.s_max if s_hi is None else s_hi,
                           self.settings.VOLUME_TABLE_SIZE,
                           epsrel=self.settings.QUAD_EPSREL,
                           limit=self.settings.QUAD_LIMIT)

    def hawking_mass(self, metric: RadialMetric, s):
        """(R/2)(1 - (dR/ds~)^2), the Hawking mass of the centered sphere.

        With H = 2 R_s~/R and area 4 pi R^2 this is sqrt(area/16pi)(1 - H^2 area/16pi).
        """
        r = np.asarray(metric.R(s), dtype=float)
        slope = np.asarray(metric.areal_slope(s), dtype=float)
        value = 0.5 * r * (1.0 - slope * slope)
        return float(value) if value.ndim == 0 else value

    def sphere_geometry(self, metric: RadialMetric, s: float) -> SphereGeometry:
        metric.require_domain(s)
        r = float(metric.R(s))
        if r <= 0.0:
            raise MetricError("centered sphere degenerates to a point", s=s)
        return SphereGeometry(
            s=s,
            area=float(metric.area(s)),
            mean_curvature=float(metric.mean_curvature(s)),
            hawking_mass=float(self.hawking_mass(metric, s)),
            enclosed_volume=metric.volume_between(metric.s_min, s,
                                                  epsrel=self.settings.QUAD_EPSREL,
                                                  limit=self.settings.QUAD_LIMIT),
        )

    def scalar_curvature(self, metric: RadialMetric, s: float) -> float:
        metric.require_domain(s, interior=True)
        value = float(self.scalar_curvature_profile(metric, np.asarray([s]))[0])
        noise = metric.derivative_noise(s)
        if noise > 0.0:
            scal_noise = 4.0 * noise / (float(metric.A(s)) * float(metric.R(s)))
            if scal_noise > self.settings.TABULATED_NOISE_TOLERANCE:
                raise DerivativeNoiseError(
                    f"tabulated data too rough for curvature at s={s!r}",
                    s=s, noise=scal_noise)
        return value

    def scalar_curvature_profile(self, metric: RadialMetric, s) -> np.ndarray:
        """Scal = 2(1 - R_s~^2)/R^2 - 4 R_s~s~/R on an array of interior points."""
        s = np.asarray(s, dtype=float)
        r = metric.R(s)
        slope = metric.areal_slope(s)
        bend = metric.areal_slope_derivative(s)
        return 2.0 * (1.0 - slope * slope) / (r * r) - 4.0 * bend / r

    def min_scalar_curvature(self, metric: RadialMetric, s_lo: float, s_hi: float,
                             n: int = 512) -> float:
        """Smallest sampled Scal on [s_lo, s_hi]; raises on noisy tabulations."""
        lo = max(s_lo, metric.s_min)
        hi = min(s_hi, metric.s_max)
        grid = radial_grid(lo, hi, n)[1:-1]
        values = self.scalar_curvature_profile(metric, grid)
        if isinstance(metric, TabulatedMetric):
            for s in grid[:: max(1, grid.size // 32)]:
                self.scalar_curvature(metric, float(s))
        return float(np.min(values))

    def max_abs_scalar_curvature(self, metric: RadialMetric, n: int = 512) -> float:
        grid = radial_grid(metric.s_min, metric.s_max, n)[1:-1]
        return float(np.max(np.abs(self.scalar_curvature_profile(metric, grid))))

    def af_decay_check(self, metric: RadialMetric, r_min: float) -> AFDecayReport:
        if not metric.s_min <= r_min < metric.s_max or r_min <= 0.0:
            raise AsymptoticFlatnessError("r_min outside the metric domain", r_min=r_min)
        if metric.s_max < 4.0 * r_min:
            raise AsymptoticFlatnessError(
                "domain too short to sample decay (needs s_max >= 4 r_min)",
                r_min=r_min, s_max=metric.s_max)

        r = np.geomspace(r_min, metric.s_max, self.settings.AF_DECAY_SAMPLES)
        with np.errstate(all="ignore"):
            a, da = metric.A(r), metric.dA(r)
            rr, dr, d2r = metric.R(r), metric.dR(r), metric.d2R(r)
            h = 1e-4 * r
            d2a = (metric.dA(np.minimum(r + h, metric.s_max)) -
                   metric.dA(np.maximum(r - h, metric.s_min))) / (
                       np.minimum(r + h, metric.s_max) - np.maximum(r - h, metric.s_min))

            # sigma in Cartesian-like coordinates: (A-1) on the radial
            # projector, (R/s)^2 - 1 on its complement
            sig_rad = a - 1.0
            sig_tan = (rr / r)**2 - 1.0
            dsig_rad = da
            dsig_tan = 2.0 * rr * dr / r**2 - 2.0 * rr**2 / r**3
            d2sig_rad = d2a
            d2sig_tan = (2.0 * (dr * dr + rr * d2r) / r**2 - 8.0 * rr * dr / r**3 +
                         6.0 * rr**2 / r**4)
            # derivatives of the projector x x^T / r^2 contribute through the difference
            jump = sig_rad - sig_tan
            djump = dsig_rad - dsig_tan

            sigma = np.maximum(np.abs(sig_rad), np.abs(sig_tan))
            r_dsigma = np.maximum.reduce(
                [r * np.abs(dsig_rad), r * np.abs(dsig_tan), 2.0 * np.abs(jump)])
            r2_ddsigma = np.maximum.reduce([
                r * r * np.abs(d2sig_rad), r * r * np.abs(d2sig_tan),
                4.0 * r * np.abs(djump), 6.0 * np.abs(jump)])
            weighted = r * (sigma + r_dsigma + r2_ddsigma)

        samples = [
            AFDecaySample(r=float(x), sigma=float(a0), r_dsigma=float(b0), r2_ddsigma=float(c0))
            for x, a0, b0, c0 in zip(r, sigma, r_dsigma, r2_ddsigma)
        ]
        if not np.all(np.isfinite(weighted)):
            logging.warning(f"AF decay check: non-finite metric data on [{r_min}, {metric.s_max}]")
            return AFDecayReport(passes=False, witnessed_constant=None,
                                 decay_slope=float("nan"), samples=samples)

        outer = slice(r.size // 2, None)
        positive = weighted[outer] > 1e-300
        slope = 0.0
        if np.count_nonzero(positive) >= 2:
            slope = float(np.polyfit(np.log(r[outer][positive]),
                                     np.log(weighted[outer][positive]), 1)[0])
        # C witnessed on the inner half must bound the outer half: q <= C / r
        slack = self.settings.AF_DECAY_SLOPE_SLACK
        inner_constant = float(np.max(weighted[:r.size // 2]))
        violations = int(np.count_nonzero(weighted[outer] > (1.0 + slack) * inner_constant))
        passes = slope <= slack and violations == 0
        constant = float(np.max(weighted)) if passes else None
        if not passes:
            logging.warning(
                f"AF decay check failed for {metric.name}: r*|sigma| grows with slope {slope:.3g}, "
                f"{violations} sample(s) above the inner constant {inner_constant:.6g}")
        return AFDecayReport(passes=passes, witnessed_constant=constant, decay_slope=slope,
                             bound_violations=violations, samples=samples)

    def adm_mass(self, metric: RadialMetric) -> float:
        """Richardson-extrapolated large-sphere limit of the Hawking mass."""
        levels = self.settings.ADM_RADII
        top = 0.5 * metric.s_max
        radii = top / 2.0**np.arange(levels - 1, -1, -1)
        if radii[0] <= metric.s_min:
            raise AdmMassError("domain too short for the ADM radius sequence",
                               s_min=metric.s_min, s_max=metric.s_max)
        report = self.af_decay_check(metric, float(radii[0]))
        if not (metric.asymptotically_flat and report.passes):
            raise AsymptoticFlatnessError(f"metric '{metric.name}' is not asymptotically flat",
                                          decay_slope=report.decay_slope)

        # error expansion in h = 1/r; radii double so h halves
        masses = np.asarray(self.hawking_mass(metric, radii), dtype=float)
        diagonal = richardson_table(masses, ratio=2.0)
        best = float(diagonal[-1])
        spread = abs(float(diagonal[-1] - diagonal[-2]))
        if spread > self.settings.ADM_TAIL_TOLERANCE * (1.0 + abs(best)):
            raise AdmMassError("Hawking mass extrapolation did not settle",
                               estimate=best, tail_spread=spread)
        logging.info(f"ADM mass of {metric.name}: {best:.12g} (tail spread {spread:.2e})")
        return best

    def build_glued_metric(self, spec: GluedMetricSpec) -> GluedMetric:
        inner: RadialMetric = spec.inner_metric
        truncation = self.settings.CAP_TRUNCATION_FACTOR * spec.cap_scale
        metric = GluedMetric(inner, spec.transition_radius, spec.cap_scale, truncation)
        logging.info(
            f"Glued {inner.name} to a round cap of radius {spec.cap_scale / 2:g} "
            f"on [{metric.band_lo:g}, {metric.band_hi:g}]")
        return metric

    def exterior_region(self, metric: RadialMetric) -> ExteriorRegion:
        """Locate the outermost minimal sphere (H = 0) and report spheres
        with H <= 0 outside it."""
        grid = radial_grid(metric.s_min, metric.s_max, self.settings.HULL_GRID_SIZE)
        slope = np.asarray(metric.areal_slope(grid), dtype=float)
        tol = 1e-14
        if metric.has_center:
            slope[0] = 1.0
        zero = np.nonzero(np.abs(slope) <= tol)[0]
        change = np.nonzero(np.sign(slope[:-1]) * np.sign(slope[1:]) < 0)[0]

        candidates = []
        if zero.size:
            candidates.append(float(grid[zero[-1]]))
        if change.size:
            k = int(change[-1])
            candidates.append(brentq(lambda x: float(metric.areal_slope(x)),
                                     float(grid[k]), float(grid[k + 1]), xtol=1e-14))
        if not candidates:
            return ExteriorRegion(s_ext=metric.s_min, has_minimal_sphere=False)

        s_ext = max(candidates)
        outside = grid > s_ext * (1.0 + 1e-9) + 1e-12
        bad = np.nonzero(outside & (slope <= 0.0))[0]
        region = ExteriorRegion(s_ext=s_ext, has_minimal_sphere=True, violations=int(bad.size),
                                first_violation=float(grid[bad[0]]) if bad.size else None)
        if bad.size:
            logging.warning(
                f"{metric.name}: {bad.size} spheres with H <= 0 outside the outermost minimal sphere")
        return region
