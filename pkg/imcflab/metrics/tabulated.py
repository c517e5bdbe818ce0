from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.interpolate import BPoly, PchipInterpolator

from imcflab.errors import MetricError
from imcflab.metrics.base import RadialMetric

MIN_SAMPLES = 8
DERIVATIVE_KEYS = ("dA", "d2A", "dR", "d2R")


def _second_derivative(metric: RadialMetric, s: np.ndarray) -> np.ndarray:
    """A'' by differencing the analytic A'; one-sided at the domain ends."""
    h = 1e-4 * np.maximum(1.0, np.abs(s))
    out = np.empty_like(s)
    inner = (s - h >= metric.s_min) & (s + h <= metric.s_max)
    out[inner] = (metric.dA(s[inner] + h[inner]) - metric.dA(s[inner] - h[inner])) / (2.0 * h[inner])
    low = ~inner & (s - h < metric.s_min)
    if np.any(low):
        x, d = s[low], h[low]
        out[low] = (-3.0 * metric.dA(x) + 4.0 * metric.dA(x + d) - metric.dA(x + 2.0 * d)) / (2.0 * d)
    high = ~inner & ~low
    if np.any(high):
        x, d = s[high], h[high]
        out[high] = (3.0 * metric.dA(x) - 4.0 * metric.dA(x - d) + metric.dA(x - 2.0 * d)) / (2.0 * d)
    return out


class TabulatedMetric(RadialMetric):
    """Metric given by samples of A and R.

    Raw samples are interpolated by monotone cubics, so R'' is only
    piecewise linear and jumps at the knots; `derivative_noise` measures
    those jumps. When first and second derivative samples are supplied the
    interpolant is the quintic Hermite through (f, f', f''), which is C2
    and reproduces derivatives to interpolation accuracy.
    """

    name = "tabulated"

    def __init__(self,
                 s: Sequence[float],
                 a: Sequence[float],
                 r: Sequence[float],
                 name: Optional[str] = None,
                 preset_params: Optional[Dict[str, float]] = None,
                 *,
                 derivatives: Optional[Dict[str, Sequence[float]]] = None):
        s_arr = np.asarray(s, dtype=float)
        a_arr = np.asarray(a, dtype=float)
        r_arr = np.asarray(r, dtype=float)
        if s_arr.ndim != 1 or s_arr.size < MIN_SAMPLES:
            raise MetricError(f"tabulated metric needs at least {MIN_SAMPLES} samples",
                              samples=int(s_arr.size))
        if a_arr.shape != s_arr.shape or r_arr.shape != s_arr.shape:
            raise MetricError("tabulated s, A, R must have equal lengths")
        if np.any(np.diff(s_arr) <= 0.0):
            raise MetricError("tabulated coordinates must be strictly increasing")
        if not (np.all(np.isfinite(a_arr)) and np.all(np.isfinite(r_arr))):
            raise MetricError("tabulated values must be finite")
        if np.any(a_arr[1:-1] <= 0.0) or np.any(r_arr[1:-1] <= 0.0):
            raise MetricError("A and R must be positive in the interior")

        super().__init__(s_arr[0], s_arr[-1], preset_params)
        if name:
            self.name = name
        self._preset_params = preset_params
        self.knots = s_arr
        self.a_samples = a_arr
        self.r_samples = r_arr
        self.derivative_samples: Optional[Dict[str, np.ndarray]] = None

        if derivatives is None:
            self._a = PchipInterpolator(s_arr, a_arr, extrapolate=False)
            self._r = PchipInterpolator(s_arr, r_arr, extrapolate=False)
        else:
            if set(derivatives) != set(DERIVATIVE_KEYS):
                raise MetricError("derivative samples need all of dA, d2A, dR, d2R",
                                  given=sorted(derivatives))
            samples = {k: np.asarray(derivatives[k], dtype=float) for k in DERIVATIVE_KEYS}
            for key, values in samples.items():
                if values.shape != s_arr.shape or not np.all(np.isfinite(values)):
                    raise MetricError(f"derivative samples {key} must be finite with one value per knot")
            self.derivative_samples = samples
            self._a = BPoly.from_derivatives(
                s_arr, np.column_stack((a_arr, samples["dA"], samples["d2A"])), extrapolate=False)
            self._r = BPoly.from_derivatives(
                s_arr, np.column_stack((r_arr, samples["dR"], samples["d2R"])), extrapolate=False)
        self._da = self._a.derivative()
        self._dr = self._r.derivative()
        self._d2r = self._r.derivative(2)

    def _eval(self, interp, s):
        out = interp(s)
        if np.any(np.isnan(out)):
            bad = np.asarray(s)[np.isnan(out)]
            raise MetricError("interpolation failed outside the tabulated range",
                              s=float(np.ravel(bad)[0]), s_min=self.s_min, s_max=self.s_max)
        return out

    def _A(self, s):
        return self._eval(self._a, s)

    def _dA(self, s):
        return self._eval(self._da, s)

    def _R(self, s):
        return self._eval(self._r, s)

    def _dR(self, s):
        return self._eval(self._dr, s)

    def _d2R(self, s):
        return self._eval(self._d2r, s)

    def derivative_noise(self, s: float) -> float:
        k = int(np.clip(np.searchsorted(self.knots, s), 1, self.knots.size - 2))
        jumps = []
        for j in (k - 1, k, k + 1):
            if j <= 0 or j >= self.knots.size - 1:
                continue
            delta = 1e-9 * (self.knots[j + 1] - self.knots[j - 1])
            left = float(self._d2r(self.knots[j] - delta))
            right = float(self._d2r(self.knots[j] + delta))
            jumps.append(abs(right - left))
        return max(jumps) if jumps else 0.0

    def to_config(self) -> Dict[str, Any]:
        if self._preset_params is not None:
            return {"preset": self.name, "params": dict(sorted(self._preset_params.items()))}
        table = {
            "s": self.knots.tolist(),
            "A": self.a_samples.tolist(),
            "R": self.r_samples.tolist(),
        }
        if self.derivative_samples is not None:
            table.update({k: v.tolist() for k, v in self.derivative_samples.items()})
        return {"tabulated": table}

    @classmethod
    def from_metric(cls, metric: RadialMetric, n: int, s_min: Optional[float] = None,
                    s_max: Optional[float] = None) -> "TabulatedMetric":
        """Tabulate `metric` on n uniform knots, carrying its derivatives."""
        lo = metric.s_min if s_min is None else s_min
        hi = metric.s_max if s_max is None else s_max
        s = np.linspace(lo, hi, n)
        derivatives = {
            "dA": metric.dA(s),
            "d2A": _second_derivative(metric, s),
            "dR": metric.dR(s),
            "d2R": metric.d2R(s),
        }
        return cls(s, metric.A(s), metric.R(s), derivatives=derivatives)
