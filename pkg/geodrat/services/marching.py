"""Marching constructions of relative Killing vectors from data on a horizontal segment.

Both solvers step in y with the classical fourth-order Runge–Kutta scheme at a fixed
step (domain strip height / N); x-derivatives of the marched fields come from
fourth-order stencils.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from geodrat.config import settings
from geodrat.errors import CharacteristicCollisionError, MarchingBreakdownError, StepUnderflowError
from geodrat.services.expression import ONE, compile_expression
from geodrat.services.fields import Cofactor, CovectorField, ExprField, GridField, stencil_derivative
from geodrat.services.geometry import MetricSpec

logger = logging.getLogger(__name__)

MIN_STEP = 1e-12


def rk4_step(rhs: Callable, y: float, state: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y, state)
    k2 = rhs(y + 0.5 * h, state + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h, state + 0.5 * h * k2)
    k4 = rhs(y + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_size(height: float, n_steps: int) -> float:
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    h = height / n_steps
    if abs(h) < MIN_STEP:
        raise StepUnderflowError(f"marching step {h:.3g} is below {MIN_STEP:.0e}")
    return h


def _strip_height(m: MetricSpec, y0: float, height: float | None) -> float:
    height = m.domain.y_max - y0 if height is None else height
    if not m.domain.y_min <= y0 + height <= m.domain.y_max:
        raise MarchingBreakdownError("strip leaves the metric domain", y0)
    return height


@dataclass(frozen=True)
class CKResult:
    xs: np.ndarray
    ys: np.ndarray
    u: GridField
    v: GridField
    f: GridField
    cofactor: Cofactor
    error_estimate: float

    @property
    def covector(self) -> CovectorField:
        return CovectorField(self.u, self.v)


def _ck_run(m: MetricSpec, xs, y0, init: np.ndarray, h: float, n_steps: int, u_min: float) -> np.ndarray:
    lam_x = compile_expression(m.lambda_partial(1, 0), m.params)
    lam_y = compile_expression(m.lambda_partial(0, 1), m.params)
    dx = xs[1] - xs[0]

    def rhs(y, state):
        u, v, f = state
        lx, ly = lam_x(xs, y), lam_y(xs, y)
        u_x, v_x, f_x = (stencil_derivative(c, dx, axis=0) for c in state)
        ratio = v / u
        u_y = -v_x + ratio * u_x + u * f_x + v * lx + v * ratio * ly
        v_y = v * f_x - u * lx - v * ly
        f_y = -u_x / u - lx - ratio * ly
        return np.array([u_y, v_y, f_y])

    rows = np.empty((n_steps + 1, *init.shape))
    rows[0] = init
    y = y0
    for n in range(n_steps):
        if np.min(np.abs(rows[n][0])) < u_min:
            raise MarchingBreakdownError(f"|u| fell below the floor {u_min:g}", y)
        rows[n + 1] = rk4_step(rhs, y, rows[n], h)
        y = y0 + (n + 1) * h
        if not np.all(np.isfinite(rows[n + 1])):
            raise MarchingBreakdownError("marched fields are no longer finite", y)
    if np.min(np.abs(rows[-1][0])) < u_min:
        raise MarchingBreakdownError(f"|u| fell below the floor {u_min:g}", y)
    return rows


def ck_march(
    m: MetricSpec,
    xs: np.ndarray,
    y0: float,
    init: tuple,
    height: float | None = None,
    n_steps: int | None = None,
    u_min: float | None = None,
) -> CKResult:
    """March (u, v, f) upward from values on the segment xs × {y0}.

    The cofactor of the result is a = f_y, b = −f_x. A half-resolution run gives the
    Richardson error estimate reported with the fields.

    Raises:
        MarchingBreakdownError: |u| drops below ``u_min`` or the fields blow up; carries the height reached.
        StepUnderflowError: the fixed step is too small to make progress.
    """
    n_steps = settings.march_steps if n_steps is None else n_steps
    u_min = settings.u_min if u_min is None else u_min
    xs = np.asarray(xs, dtype=float)
    height = _strip_height(m, y0, height)
    h = _step_size(height, n_steps)
    state0 = np.array([np.broadcast_to(np.asarray(c, dtype=float), xs.shape) for c in init])

    rows = _ck_run(m, xs, y0, state0, h, n_steps, u_min)
    ys = y0 + h * np.arange(n_steps + 1)
    error = 0.0
    if n_steps % 2 == 0:
        coarse = _ck_run(m, xs, y0, state0, 2.0 * h, n_steps // 2, u_min)
        error = float(np.max(np.abs(rows[::2] - coarse))) / 15.0

    u, v, f = (GridField(xs, ys, rows[:, k, :].T.copy()) for k in range(3))
    cofactor = Cofactor(f.derivative(0, 1), GridField(xs, ys, -f.derivative(1, 0).values))
    logger.info("CK march on '%s' reached y=%.6g in %d steps (error estimate %.2e)", m.name, ys[-1], n_steps, error)
    return CKResult(xs, ys, u, v, f, cofactor, error)


@dataclass(frozen=True)
class CharacteristicResult:
    xs: np.ndarray
    ys: np.ndarray
    w: GridField
    cofactor: Cofactor

    @property
    def covector(self) -> CovectorField:
        """The relative Killing vector (1, w) carried by the solution."""
        return CovectorField(ExprField(ONE), self.w)


def characteristic_w(
    m: MetricSpec,
    xs: np.ndarray,
    y0: float,
    w0,
    height: float | None = None,
    n_steps: int | None = None,
) -> CharacteristicResult:
    """Solve w_y − w·w_x + (w² + 1)(λ_x + wλ_y) = 0 upward from w on xs × {y0}.

    Characteristics satisfy dx/dy = −w, dw/dy = −(w² + 1)(λ_x + wλ_y) and are
    resampled onto the x-interval they all cover. The cofactor is a = −λ_x − wλ_y,
    b = w(λ_x + wλ_y) − w_x.

    Raises:
        CharacteristicCollisionError: neighbouring characteristics cross.
        MarchingBreakdownError: a characteristic leaves the domain.
    """
    n_steps = settings.march_steps if n_steps is None else n_steps
    xs = np.asarray(xs, dtype=float)
    height = _strip_height(m, y0, height)
    h = _step_size(height, n_steps)
    lam_x = compile_expression(m.lambda_partial(1, 0), m.params)
    lam_y = compile_expression(m.lambda_partial(0, 1), m.params)

    def rhs(y, state):
        x, w = state
        return np.array([-w, -(w * w + 1.0) * (lam_x(x, y) + w * lam_y(x, y))])

    d = m.domain
    rows = np.empty((n_steps + 1, 2, len(xs)))
    rows[0] = [xs, np.broadcast_to(np.asarray(w0, dtype=float), xs.shape)]
    for n in range(n_steps):
        y = y0 + n * h
        rows[n + 1] = rk4_step(rhs, y, rows[n], h)
        positions = rows[n + 1][0]
        gaps = np.diff(positions)
        if np.any(gaps <= 0.0) or not np.all(np.isfinite(rows[n + 1])):
            k = int(np.argmin(gaps)) if np.all(np.isfinite(gaps)) else 0
            locus = (float(0.5 * (positions[k] + positions[k + 1])), float(y + h))
            raise CharacteristicCollisionError("characteristics crossed", locus)
        if positions[0] < d.x_min or positions[-1] > d.x_max:
            raise MarchingBreakdownError("a characteristic left the domain", y + h)

    lo = float(np.max(rows[:, 0, 0]))
    hi = float(np.min(rows[:, 0, -1]))
    if not hi > lo:
        raise MarchingBreakdownError("characteristics share no common x-interval", y0 + height)
    grid_x = np.linspace(lo, hi, len(xs))
    ys = y0 + h * np.arange(n_steps + 1)
    values = np.column_stack([CubicSpline(row[0], row[1])(grid_x) for row in rows])
    w = GridField(grid_x, ys, values)

    gx, gy = np.meshgrid(grid_x, ys, indexing="ij")
    lx, ly = lam_x(gx, gy), lam_y(gx, gy)
    drift = lx + values * ly
    cofactor = Cofactor(GridField(grid_x, ys, -drift), GridField(grid_x, ys, values * drift - w.derivative(1, 0).values))
    logger.info("Characteristics on '%s' covered x in [%.4g, %.4g] up to y=%.6g", m.name, lo, hi, ys[-1])
    return CharacteristicResult(grid_x, ys, w, cofactor)
