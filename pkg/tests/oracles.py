"""Independent reference computations for the test suite.

Nothing here imports hilbend; each function recomputes a quantity from
its textbook definition (in extended precision where that matters).
"""

import math

import mpmath
import numpy as np


def klein_distance(u, v):
    """Hyperbolic distance between two points of the unit ball (Klein model)."""
    u, v = np.asarray(u, float), np.asarray(v, float)
    c = (1 - u @ v) / math.sqrt((1 - u @ u) * (1 - v @ v))
    return math.acosh(max(c, 1.0))


def hilbert_distance_polygon(walls, x, y):
    """Hilbert distance in the polygon ``{a.x + b >= 0}`` by brute-force chord
    intersection in mpmath."""
    with mpmath.workdps(40):
        x = [mpmath.mpf(float(c)) for c in x]
        y = [mpmath.mpf(float(c)) for c in y]
        d = [y[i] - x[i] for i in range(len(x))]
        lo, hi = -mpmath.inf, mpmath.inf
        for w in walls:
            a0 = sum(mpmath.mpf(float(w[i])) * x[i] for i in range(len(x))) + w[-1]
            a1 = sum(mpmath.mpf(float(w[i])) * d[i] for i in range(len(x)))
            if a1 == 0:
                continue
            s = -a0 / a1
            if a1 < 0:
                hi = min(hi, s)
            else:
                lo = max(lo, s)
        # x at s=0, y at s=1, boundary at lo < 0 and hi > 1
        return float(0.5 * mpmath.log((hi - 0) * (1 - lo) / ((hi - 1) * (0 - lo))))


def sym2(m):
    """Action of an SL2 matrix on binary quadratic forms ``(X^2, XY, Y^2)``."""
    (a, b), (c, d) = m
    return np.array(
        [
            [a * a, a * b, b * b],
            [2 * a * c, a * d + b * c, 2 * b * d],
            [c * c, c * d, d * d],
        ],
        dtype=float,
    )


def hyperbolic_ball_area(R):
    return 2 * math.pi * (math.cosh(R) - 1)


def hyperbolic_ball_volume3(R):
    return math.pi * (math.sinh(2 * R) - 2 * R)


def cross_ratio_affine(p, x, y, q):
    return abs(p - y) * abs(q - x) / (abs(p - x) * abs(q - y))
