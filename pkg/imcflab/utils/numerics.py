from typing import Callable, Tuple

import numpy as np
from scipy.special import roots_legendre

ArrayFn = Callable[[np.ndarray], np.ndarray]


def fixed_quad_cells(func: ArrayFn, edges: np.ndarray, order: int = 12) -> np.ndarray:
    """Integrate `func` over every cell [edges[k], edges[k+1]] with a fixed
    Gauss-Legendre rule, evaluating all nodes in one vectorized call."""
    edges = np.asarray(edges, dtype=float)
    nodes, weights = roots_legendre(order)
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    points = mid[:, None] + half[:, None] * nodes[None, :]
    values = func(points.ravel()).reshape(points.shape)
    return half * (values @ weights)


def smoothstep5(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quintic smoothstep S(x) = 6x^5 - 15x^4 + 10x^3 clamped to [0, 1],
    returned together with its first and second derivatives."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    value = x**3 * (x * (6.0 * x - 15.0) + 10.0)
    first = 30.0 * x**2 * (1.0 - x)**2
    second = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
    return value, first, second


def five_point_derivative(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central derivative on a uniform grid.

    The two points at each end get NaN; callers skip them.
    """
    y = np.asarray(y, dtype=float)
    out = np.full_like(y, np.nan)
    if y.size >= 5:
        out[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    return out


def richardson_table(values: np.ndarray, ratio: float = 2.0) -> np.ndarray:
    """Richardson extrapolation of a sequence computed at step sizes
    h, h/ratio, h/ratio^2, ... assuming an error expansion in integer powers
    of h. Returns the diagonal of the tableau (best estimate last)."""
    values = np.asarray(values, dtype=float)
    table = [values.copy()]
    for order in range(1, values.size):
        prev = table[-1]
        factor = ratio**order
        table.append((factor * prev[1:] - prev[:-1]) / (factor - 1.0))
    return np.array([row[-1] for row in table])
