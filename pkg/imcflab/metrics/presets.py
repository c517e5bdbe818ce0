import math
from typing import Dict, Mapping, Optional

import numpy as np
from scipy.integrate import quad

from config.settings import Settings
from imcflab.errors import MetricError
from imcflab.metrics.base import FOUR_PI, RadialMetric
from imcflab.metrics.tabulated import TabulatedMetric
from imcflab.utils.numerics import fixed_quad_cells


class EuclideanMetric(RadialMetric):
    name = "euclidean"
    asymptotically_flat = True

    def __init__(self, s_max: float):
        super().__init__(0.0, s_max)

    def _A(self, s):
        return np.ones_like(s)

    def _dA(self, s):
        return np.zeros_like(s)

    def _R(self, s):
        return s.copy()

    def _dR(self, s):
        return np.ones_like(s)

    def _d2R(self, s):
        return np.zeros_like(s)


class SchwarzschildMetric(RadialMetric):
    """Schwarzschild exterior in areal coordinates, rho >= 2m."""

    name = "schwarzschild-areal"
    asymptotically_flat = True

    def __init__(self, m: float, s_max: float):
        super().__init__(2.0 * m, s_max, {"m": m})
        self.m = m

    def _lapse_sq(self, s):
        return 1.0 - 2.0 * self.m / s

    def _A(self, s):
        with np.errstate(divide="ignore"):
            return 1.0 / self._lapse_sq(s)

    def _dA(self, s):
        f = self._lapse_sq(s)
        with np.errstate(divide="ignore"):
            return -(2.0 * self.m / (s * s)) / (f * f)

    def _R(self, s):
        return s.copy()

    def _dR(self, s):
        return np.ones_like(s)

    def _d2R(self, s):
        return np.zeros_like(s)

    # A blows up at the horizon; the arclength quantities stay finite.
    def _areal_slope(self, s):
        return np.sqrt(np.maximum(self._lapse_sq(s), 0.0))

    def _areal_slope_derivative(self, s):
        return self.m / (s * s)

    def _shell_density(self, x):
        # rho = 2m + x^2 removes the 1/sqrt singularity of sqrt(A) at the horizon
        return 2.0 * FOUR_PI * (2.0 * self.m + x * x)**2.5

    def _to_x(self, rho):
        return np.sqrt(np.maximum(np.asarray(rho, dtype=float) - 2.0 * self.m, 0.0))

    def volume_between(self, a, b, epsrel=1e-12, limit=200):
        if a == b:
            return 0.0
        value, _ = quad(self._shell_density, float(self._to_x(a)), float(self._to_x(b)),
                        epsabs=0.0, epsrel=epsrel, limit=limit)
        return float(value)

    def cumulative_volume(self, grid):
        cells = fixed_quad_cells(self._shell_density, self._to_x(grid))
        return np.concatenate(([0.0], np.cumsum(cells)))


class CoredSchwarzschildMetric(RadialMetric):
    """Conformally flat phi^4 * delta with phi = 1 + (m/2)(r^2 + b^2)^(-1/2).

    phi is superharmonic, so the scalar curvature -8 phi^-5 Laplacian(phi)
    is positive everywhere; far away phi ~ 1 + m/2r and the ADM mass is m.
    """

    name = "cored-schwarzschild"
    asymptotically_flat = True

    def __init__(self, m: float, b: float, s_max: float):
        super().__init__(0.0, s_max, {"m": m, "b": b})
        self.m = m
        self.b = b

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 + 0.5 * self.m / np.sqrt(r * r + self.b * self.b)

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        return -0.5 * self.m * r * (r * r + self.b * self.b)**-1.5

    def d2phi(self, r):
        r = np.asarray(r, dtype=float)
        q = r * r + self.b * self.b
        return -0.5 * self.m * (q**-1.5 - 3.0 * r * r * q**-2.5)

    def laplacian_phi(self, r):
        """Flat Laplacian of phi: -(3 m b^2 / 2)(r^2 + b^2)^(-5/2)."""
        r = np.asarray(r, dtype=float)
        return -1.5 * self.m * self.b**2 * (r * r + self.b * self.b)**-2.5

    def _A(self, s):
        return self.phi(s)**4

    def _dA(self, s):
        return 4.0 * self.phi(s)**3 * self.dphi(s)

    def _R(self, s):
        return self.phi(s)**2 * s

    def _dR(self, s):
        p = self.phi(s)
        return 2.0 * p * self.dphi(s) * s + p * p

    def _d2R(self, s):
        p, dp, d2p = self.phi(s), self.dphi(s), self.d2phi(s)
        return 2.0 * s * (dp * dp + p * d2p) + 4.0 * p * dp


class SphereCapMetric(RadialMetric):
    """Round 3-sphere of radius lambda/2 in arclength from a pole."""

    name = "round-3-sphere-cap"
    asymptotically_flat = False

    def __init__(self, lam: float):
        self.radius = 0.5 * lam
        super().__init__(0.0, math.pi * self.radius, {"lambda": lam})

    def _A(self, s):
        return np.ones_like(s)

    def _dA(self, s):
        return np.zeros_like(s)

    def _R(self, s):
        return self.radius * np.sin(s / self.radius)

    def _dR(self, s):
        return np.cos(s / self.radius)

    def _d2R(self, s):
        return -np.sin(s / self.radius) / self.radius


def neck_profile(s: np.ndarray, center: float, width: float, depth: float) -> np.ndarray:
    """Areal radius with one strict interior dip around `center`, R(0) = 0."""
    x = (s - center) / width
    offset = center * math.exp(-(center / width)**2)
    return s - depth * ((s - center) * np.exp(-x * x) + offset)


_PRESET_PARAMS: Dict[str, Dict[str, Optional[float]]] = {
    "euclidean": {},
    "schwarzschild-areal": {"m": None},
    "cored-schwarzschild": {"m": None, "b": None},
    "neck": {"center": 3.0, "width": 0.5, "depth": 3.0},
    "round-3-sphere-cap": {"lambda": None},
}

PRESET_ALIASES = {"schwarzschild": "schwarzschild-areal", "cored": "cored-schwarzschild",
                  "sphere-cap": "round-3-sphere-cap"}


def preset_names():
    return sorted(_PRESET_PARAMS)


def _resolve_params(name: str, params: Mapping[str, float]) -> Dict[str, float]:
    allowed = dict(_PRESET_PARAMS[name])
    allowed["s_max"] = None
    unknown = set(params) - set(allowed)
    if unknown:
        raise MetricError(f"unknown parameters for preset '{name}': {sorted(unknown)}",
                          preset=name)
    resolved: Dict[str, float] = {}
    for key, default in allowed.items():
        if key in params:
            value = float(params[key])
        elif default is not None:
            value = float(default)
        elif key == "s_max":
            continue
        else:
            raise MetricError(f"preset '{name}' requires parameter '{key}'", preset=name)
        if not (math.isfinite(value) and value > 0.0):
            raise MetricError(f"parameter '{key}' must be positive, got {value!r}",
                              preset=name, parameter=key)
        resolved[key] = value
    return resolved


def make_preset(name: str, params: Mapping[str, float], settings: Settings) -> RadialMetric:
    name = PRESET_ALIASES.get(name, name)
    if name not in _PRESET_PARAMS:
        raise MetricError(f"unknown preset id '{name}'", preset=name)
    p = _resolve_params(name, params)
    outer = p.get("s_max", settings.PRESET_OUTER_RADIUS)

    if name == "euclidean":
        return EuclideanMetric(outer)
    if name == "schwarzschild-areal":
        if outer <= 2.0 * p["m"]:
            raise MetricError("s_max must exceed the horizon 2m", preset=name)
        return SchwarzschildMetric(p["m"], outer)
    if name == "cored-schwarzschild":
        return CoredSchwarzschildMetric(p["m"], p["b"], outer)
    if name == "round-3-sphere-cap":
        return SphereCapMetric(p["lambda"])

    outer = p.get("s_max", settings.NECK_OUTER_RADIUS)
    if outer <= p["center"] + 4.0 * p["width"]:
        raise MetricError("neck must sit well inside the domain", preset=name)
    s = np.linspace(0.0, outer, settings.TABULATION_SAMPLES)
    radius = neck_profile(s, p["center"], p["width"], p["depth"])
    if np.any(radius[1:] <= 0.0):
        raise MetricError("neck depth too large: areal radius vanishes in the interior",
                          preset=name)
    return TabulatedMetric(s, np.ones_like(s), radius, name="neck", preset_params=p)
