from typing import Any, Dict

import numpy as np

from imcflab.errors import MetricError
from imcflab.metrics.base import RadialMetric
from imcflab.utils.numerics import smoothstep5

BAND_START = 5.0
BAND_END = 6.0


class GluedMetric(RadialMetric):
    """eta*g + (1 - eta)*g_S with g_S = delta / (1 + |x|^2/lambda^2)^2.

    The coordinate s of the inner metric plays the role of |x|. Inside
    transition_radius + 5 the inner metric is used untouched; beyond
    transition_radius + 6 only the round cap of radius lambda/2 is left.
    The cap closes at s = infinity in these stereographic coordinates, so the
    domain is cut at `truncation` (a large multiple of lambda).
    """

    name = "glued"
    asymptotically_flat = False

    def __init__(self, inner: RadialMetric, transition_radius: float, cap_scale: float,
                 truncation: float):
        if transition_radius <= 0.0 or cap_scale <= 0.0:
            raise MetricError("transition radius and cap scale must be positive",
                              transition_radius=transition_radius, cap_scale=cap_scale)
        self.band_lo = transition_radius + BAND_START
        self.band_hi = transition_radius + BAND_END
        if inner.s_min >= self.band_lo or inner.s_max < self.band_hi:
            raise MetricError(
                "transition band lies outside the inner metric domain",
                band_lo=self.band_lo, band_hi=self.band_hi,
                s_min=inner.s_min, s_max=inner.s_max)
        s_max = max(truncation, self.band_hi + 1.0)
        super().__init__(inner.s_min, s_max, {
            "transition_radius": transition_radius,
            "lambda": cap_scale,
        })
        self.inner = inner
        self.c = 1.0 / (cap_scale * cap_scale)

    def _eta(self, s):
        value, first, second = smoothstep5(s - self.band_lo)
        return 1.0 - value, -first, -second

    def _psi(self, s):
        d = 1.0 + self.c * s * s
        return d**-2, -4.0 * self.c * s * d**-3

    def _cap_q(self, s):
        # P = s^2 psi = (s / D)^2 and its first two derivatives
        d = 1.0 + self.c * s * s
        cs2 = self.c * s * s
        p = s * s / (d * d)
        dp = 2.0 * s * (1.0 - cs2) / d**3
        d2p = (2.0 - 16.0 * cs2 + 6.0 * cs2 * cs2) / d**4
        return p, dp, d2p

    def _inner_parts(self, s):
        """Inner A, A', R, R', R'' on the points where eta > 0, zeros elsewhere."""
        mask = s <= self.band_hi
        parts = [np.zeros_like(s) for _ in range(5)]
        if np.any(mask):
            x = s[mask]
            for out, fn in zip(parts, (self.inner.A, self.inner.dA, self.inner.R,
                                       self.inner.dR, self.inner.d2R)):
                out[mask] = fn(x)
        return parts

    def _A(self, s):
        eta, _, _ = self._eta(s)
        a, _, _, _, _ = self._inner_parts(s)
        psi, _ = self._psi(s)
        with np.errstate(invalid="ignore"):
            return np.where(s < self.band_lo, a, eta * a + (1.0 - eta) * psi)

    def _dA(self, s):
        eta, deta, _ = self._eta(s)
        a, da, _, _, _ = self._inner_parts(s)
        psi, dpsi = self._psi(s)
        with np.errstate(invalid="ignore"):
            return np.where(s < self.band_lo, da, deta * (a - psi) + eta * da + (1.0 - eta) * dpsi)

    def _q(self, s):
        eta, deta, d2eta = self._eta(s)
        _, _, r, dr, d2r = self._inner_parts(s)
        p, dp, d2p = self._cap_q(s)
        r2 = r * r
        dr2 = 2.0 * r * dr
        d2r2 = 2.0 * (dr * dr + r * d2r)
        q = eta * r2 + (1.0 - eta) * p
        dq = deta * (r2 - p) + eta * dr2 + (1.0 - eta) * dp
        d2q = d2eta * (r2 - p) + 2.0 * deta * (dr2 - dp) + eta * d2r2 + (1.0 - eta) * d2p
        return q, dq, d2q

    def _R(self, s):
        q, _, _ = self._q(s)
        _, _, r, _, _ = self._inner_parts(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(s < self.band_lo, r, np.sqrt(q))

    def _dR(self, s):
        q, dq, _ = self._q(s)
        _, _, _, dr, _ = self._inner_parts(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(s < self.band_lo, dr, dq / (2.0 * np.sqrt(q)))

    def _d2R(self, s):
        q, dq, d2q = self._q(s)
        _, _, _, _, d2r = self._inner_parts(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.sqrt(q)
            dr = dq / (2.0 * r)
            return np.where(s < self.band_lo, d2r, (0.5 * d2q - dr * dr) / r)

    def to_config(self) -> Dict[str, Any]:
        return {
            "glued": {
                "inner": self.inner.to_config(),
                "transition_radius": self.params["transition_radius"],
                "cap_scale": self.params["lambda"],
            }
        }
