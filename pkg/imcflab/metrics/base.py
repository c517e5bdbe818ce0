import functools
import math
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.integrate import quad

from imcflab.errors import DomainError
from imcflab.utils.numerics import fixed_quad_cells

FOUR_PI = 4.0 * math.pi


def scalar_or_array(method: Callable) -> Callable:
    """Accept a float or an array; hand the wrapped method a float array and
    give scalars back as plain floats."""

    @functools.wraps(method)
    def wrapper(self, s):
        arr = np.asarray(s, dtype=float)
        out = method(self, np.atleast_1d(arr))
        if arr.ndim == 0:
            return float(np.ravel(out)[0])
        return np.reshape(out, arr.shape)

    return wrapper


class RadialMetric:
    """Warped product g = A(s) ds^2 + R(s)^2 g_{S^2} on [s_min, s_max].

    Subclasses supply A, A', R, R', R'' on float arrays. Everything the lab
    computes about centered spheres is derived from those five functions.
    """

    name: str = "radial"
    asymptotically_flat: bool = False

    def __init__(self, s_min: float, s_max: float, params: Optional[Dict[str, float]] = None):
        if not s_max > s_min:
            raise ValueError("metric domain must have s_max > s_min")
        self.s_min = float(s_min)
        self.s_max = float(s_max)
        self.params: Dict[str, float] = dict(params or {})

    def _A(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _dA(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _R(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _dR(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _d2R(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @scalar_or_array
    def A(self, s):
        return self._A(s)

    @scalar_or_array
    def dA(self, s):
        return self._dA(s)

    @scalar_or_array
    def R(self, s):
        return self._R(s)

    @scalar_or_array
    def dR(self, s):
        return self._dR(s)

    @scalar_or_array
    def d2R(self, s):
        return self._d2R(s)

    def _areal_slope(self, s: np.ndarray) -> np.ndarray:
        return self._dR(s) / np.sqrt(self._A(s))

    def _areal_slope_derivative(self, s: np.ndarray) -> np.ndarray:
        a = self._A(s)
        return self._d2R(s) / a - self._dR(s) * self._dA(s) / (2.0 * a * a)

    @scalar_or_array
    def areal_slope(self, s):
        """dR/ds in arclength, i.e. R'(s)/sqrt(A(s))."""
        return self._areal_slope(s)

    @scalar_or_array
    def areal_slope_derivative(self, s):
        """d^2R/ds^2 in arclength."""
        return self._areal_slope_derivative(s)

    @scalar_or_array
    def area(self, s):
        r = self._R(s)
        return FOUR_PI * r * r

    @scalar_or_array
    def mean_curvature(self, s):
        return 2.0 * self._areal_slope(s) / self._R(s)

    @scalar_or_array
    def volume_density(self, s):
        r = self._R(s)
        return FOUR_PI * r * r * np.sqrt(self._A(s))

    @property
    def has_center(self) -> bool:
        r0 = float(self._R(np.asarray(self.s_min)))
        return abs(r0) <= 1e-12 * max(1.0, abs(self.s_max))

    def contains(self, s: float) -> bool:
        return self.s_min <= s <= self.s_max

    def require_domain(self, s: float, interior: bool = False) -> None:
        if interior:
            ok = self.s_min < s < self.s_max
        else:
            ok = self.s_min <= s <= self.s_max
        if not ok or not math.isfinite(s):
            raise DomainError(s, self.s_min, self.s_max)

    def volume_between(self, a: float, b: float, epsrel: float = 1e-12, limit: int = 200) -> float:
        """Riemannian volume of the shell a <= s <= b (signed if b < a)."""
        if a == b:
            return 0.0
        value, _ = quad(self.volume_density, a, b, epsabs=0.0, epsrel=epsrel, limit=limit)
        return float(value)

    def cumulative_volume(self, grid: np.ndarray) -> np.ndarray:
        """Volume from grid[0] to every grid point, cell by cell."""
        grid = np.asarray(grid, dtype=float)
        cells = fixed_quad_cells(lambda x: np.asarray(self.volume_density(x)), grid)
        return np.concatenate(([0.0], np.cumsum(cells)))

    def derivative_noise(self, s: float) -> float:
        """Estimated jump of R'' near s; zero for closed-form metrics."""
        return 0.0

    def to_config(self) -> Dict[str, Any]:
        """Metric document that rebuilds this metric through the preset factory."""
        params = dict(self.params)
        if self.asymptotically_flat:
            params["s_max"] = self.s_max
        return {"preset": self.name, "params": dict(sorted(params.items()))}

    def __repr__(self) -> str:
        return f"<{type(self).__name__}(name='{self.name}', params={self.params}, domain=[{self.s_min}, {self.s_max}])>"
