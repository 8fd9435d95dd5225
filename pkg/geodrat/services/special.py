"""Bessel functions of the first kind used as analytic building blocks of conformal factors."""

import math

import numpy as np
from scipy import special

# Below this |x| the quotient J1(x)/x is taken from its Taylor series.
J1_OVER_X_SERIES_RADIUS = 1e-4


def besselj0(x):
    return special.j0(x)


def besselj1(x):
    return special.j1(x)


def j1_over_x(x):
    """J1(x)/x with the removable singularity at x = 0 filled in.

    Uses J1(x)/x = 1/2 - x^2/16 + x^4/384 - ... near the origin; the truncation
    error at the series radius is far below double precision.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < J1_OVER_X_SERIES_RADIUS
    x2 = x * x
    series = 0.5 - x2 / 16.0 + x2 * x2 / 384.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = special.j1(x) / np.where(small, 1.0, x)
    result = np.where(small, series, direct)
    return float(result) if result.ndim == 0 else result


def jn_over_xn(n: int, x):
    """J_n(x)/x^n, finite at x = 0 where it equals 1/(2^n n!).

    d/dx [J_n(x)/x^n] = -x · J_{n+1}(x)/x^{n+1}, so the family is closed under
    differentiation. Near the origin the first three series terms are used.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < J1_OVER_X_SERIES_RADIUS
    h2 = x * x / 4.0
    lead = 1.0 / (2.0**n * math.factorial(n))
    series = lead * (1.0 - h2 / (n + 1) + h2 * h2 / (2.0 * (n + 1) * (n + 2)))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        direct = special.jv(n, x) / np.where(small, 1.0, x) ** n
    result = np.where(small, series, direct)
    return float(result) if result.ndim == 0 else result
