import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from imcflab.errors import MetricError
from imcflab.metrics.base import RadialMetric


def radial_grid(s_lo: float, s_hi: float, n: int) -> np.ndarray:
    """Half uniform, half geometric from s_lo: resolves both the region
    next to the inner end and the far field of a long domain."""
    span = s_hi - s_lo
    if span <= 0.0:
        raise ValueError("radial grid needs s_hi > s_lo")
    uniform = np.linspace(s_lo, s_hi, n // 2)
    clustered = s_lo + np.geomspace(span * 1e-7, span, n - n // 2)
    grid = np.unique(np.concatenate(([s_lo, s_hi], uniform, clustered)))
    return grid[(grid >= s_lo) & (grid <= s_hi)]


class VolumeTable:
    """Cumulative volume from s_lo on a fixed grid, with exact polishing.

    `volume` and `coordinate` are accurate to quadrature tolerance; the
    spline estimate is only used to seed searches.
    """

    def __init__(self, metric: RadialMetric, s_lo: float, s_hi: float, n: int,
                 epsrel: float = 1e-12, limit: int = 200):
        self.metric = metric
        self.epsrel = epsrel
        self.limit = limit
        self.grid = radial_grid(s_lo, s_hi, n)
        self.cumulative = metric.cumulative_volume(self.grid)
        if np.any(np.diff(self.cumulative) <= 0.0):
            raise MetricError("volume is not strictly increasing on the tabulation grid",
                              s_lo=s_lo, s_hi=s_hi)

        with np.errstate(divide="ignore"):
            density = np.asarray(metric.volume_density(self.grid), dtype=float)
            slopes = 1.0 / density
        secants = np.diff(self.grid) / np.diff(self.cumulative)
        fallback = np.concatenate((secants[:1], secants))
        slopes = np.where(np.isfinite(slopes), slopes, 0.0)
        slopes = np.where(density > 0.0, slopes, fallback)
        self._spline = CubicHermiteSpline(self.cumulative, self.grid, slopes)

    @property
    def s_lo(self) -> float:
        return float(self.grid[0])

    @property
    def s_hi(self) -> float:
        return float(self.grid[-1])

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])

    def volume(self, s: float) -> float:
        if s <= self.grid[0]:
            return 0.0
        k = int(np.clip(np.searchsorted(self.grid, s, side="right") - 1, 0, self.grid.size - 2))
        return float(self.cumulative[k]) + self.metric.volume_between(
            float(self.grid[k]), float(s), epsrel=self.epsrel, limit=self.limit)

    def coordinate_estimate(self, v):
        v = np.clip(np.asarray(v, dtype=float), 0.0, self.total)
        return np.clip(self._spline(v), self.s_lo, self.s_hi)

    def coordinate(self, v: float) -> float:
        slack = 1e-12 * max(1.0, self.total)
        if not (-slack <= v <= self.total + slack):
            raise MetricError(f"volume {v!r} outside tabulated range [0, {self.total!r}]",
                              v=v, total=self.total)
        if v <= 0.0:
            return self.s_lo
        if v >= self.total:
            return self.s_hi
        k = int(np.clip(np.searchsorted(self.cumulative, v, side="right") - 1, 0,
                        self.grid.size - 2))
        lo, hi = float(self.grid[k]), float(self.grid[k + 1])
        if v == self.cumulative[k]:
            return lo

        def gap(s):
            return self.volume(s) - v

        f_lo, f_hi = gap(lo), gap(hi)
        if f_lo * f_hi > 0.0:
            # table and adaptive quadrature disagree in the last digits
            return lo if abs(f_lo) <= abs(f_hi) else hi
        return brentq(gap, lo, hi, xtol=1e-15 * max(1.0, abs(hi)), rtol=1e-15, maxiter=200)
