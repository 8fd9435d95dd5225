"""Relative Killing vectors: residuals, gauge, the compatibility gap and Cauchy-data solvers.

A relative Killing vector R = u·p + v·q with cofactor L = e^{−2λ}(a·p + b·q) satisfies
{R, H} = L·R, which in isothermal coordinates is the linear system

    r1 = u_x + (a + λ_x)u + λ_y v = 0
    r2 = v_x + u_y + a v + b u = 0
    r3 = v_y + λ_x u + (b + λ_y)v = 0.

When ρ = b_x − a_y ≠ 0 one prolongation closes the system (two Cauchy scalars); for
L = 0 the closed system lives in (u, v, ω = u_y − v_x) (three Cauchy scalars).  Both
are solved by marching the fundamental matrix along x then y and, independently,
along y then x; the two results agree exactly when the system is compatible, so
their difference is the residual used for rank and dimension tests.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from geodrat.config import settings
from geodrat.errors import DegenerateCofactorError, DomainError, InconsistentCofactorError, MarchingBreakdownError
from geodrat.services.expression import (
    EvalContext,
    Expression,
    compile_expression,
    evaluate,
    exp,
    mul,
    partial_derivative,
    sub,
)
from geodrat.services.fields import (
    Cofactor,
    CovectorField,
    ExprField,
    Field,
    GridField,
    as_field,
    compiled,
)
from geodrat.services.geometry import MetricSpec, PhaseState
from geodrat.services.jets import multi_indices
from geodrat.services.parser import parse_expression

logger = logging.getLogger(__name__)

MARCH_RTOL = 1e-11
MARCH_ATOL = 1e-12
RHO_FLOOR = 1e-8
DOMAIN_SLACK = 1e-12


# --------------------------------------------------------------------------- pointwise checks


def _require_points(m: MetricSpec, x, y) -> None:
    d = m.domain
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    slack = DOMAIN_SLACK * (1.0 + max(d.width, d.height))
    inside = (
        (xa >= d.x_min - slack) & (xa <= d.x_max + slack) & (ya >= d.y_min - slack) & (ya <= d.y_max + slack)
    )
    if not np.all(inside):
        raise DomainError(f"point(s) outside the domain of '{m.name}'")


def rkv_residuals(m: MetricSpec, u, v, a, b, pt: tuple) -> tuple:
    """Residuals (r1, r2, r3) of the relative Killing system at ``pt``.

    Fields may be expressions, expression text, numbers or sampled grids; ``pt`` may hold
    arrays, in which case the residuals are arrays of the same shape.
    """
    x, y = pt
    _require_points(m, x, y)
    u, v, a, b = (as_field(f) for f in (u, v, a, b))
    ctx = m.params
    lam_x, lam_y = m.lambda_values(x, y, 1, 0), m.lambda_values(x, y, 0, 1)
    uu, vv, aa, bb = u.at(x, y, ctx), v.at(x, y, ctx), a.at(x, y, ctx), b.at(x, y, ctx)
    r1 = u.derivative(1, 0).at(x, y, ctx) + (aa + lam_x) * uu + lam_y * vv
    r2 = v.derivative(1, 0).at(x, y, ctx) + u.derivative(0, 1).at(x, y, ctx) + aa * vv + bb * uu
    r3 = v.derivative(0, 1).at(x, y, ctx) + lam_x * uu + (bb + lam_y) * vv
    return r1, r2, r3


def bracket_residual(m: MetricSpec, R: CovectorField, L: Cofactor, state: PhaseState) -> float:
    """{R, H} − L·R at a phase-space state, with {A, B} = A_p B_x − A_x B_p + A_q B_y − A_y B_q."""
    x, y, p, q = state.x, state.y, state.p, state.q
    m.require_inside(x, y)
    ctx = m.params
    lam, lam_x, lam_y = m.lambda_values(x, y), m.lambda_values(x, y, 1, 0), m.lambda_values(x, y, 0, 1)
    scale = np.exp(-2.0 * lam)
    h_x = -lam_x * scale * (p * p + q * q)
    h_y = -lam_y * scale * (p * p + q * q)
    h_p, h_q = scale * p, scale * q

    u, v = R.components(x, y, ctx)
    r_x = R.u.derivative(1, 0).at(x, y, ctx) * p + R.v.derivative(1, 0).at(x, y, ctx) * q
    r_y = R.u.derivative(0, 1).at(x, y, ctx) * p + R.v.derivative(0, 1).at(x, y, ctx) * q
    poisson = u * h_x - r_x * h_p + v * h_y - r_y * h_q

    cofactor = scale * (L.a.at(x, y, ctx) * p + L.b.at(x, y, ctx) * q)
    return float(poisson - cofactor * (u * p + v * q))


def _scaled(f: Field, factor: Expression, ctx: EvalContext) -> Field:
    if isinstance(f, ExprField):
        return ExprField(mul(factor, f.expr))
    gx, gy = np.meshgrid(f.xs, f.ys, indexing="ij")
    return GridField(f.xs, f.ys, evaluate(factor, gx, gy, ctx) * f.values)


def _shifted(f: Field, offset: Expression, ctx: EvalContext) -> Field:
    if isinstance(f, ExprField):
        return ExprField(sub(f.expr, offset))
    gx, gy = np.meshgrid(f.xs, f.ys, indexing="ij")
    return GridField(f.xs, f.ys, f.values - evaluate(offset, gx, gy, ctx))


def gauge_transform(
    R: CovectorField, L: Cofactor, f: Expression | str, ctx: EvalContext | None = None
) -> tuple[CovectorField, Cofactor]:
    """(R, L) → (e^f R, L − e^{−2λ}(f_x p + f_y q)): the rescaling that keeps {R, H} = L·R."""
    f = parse_expression(f) if isinstance(f, str) else f
    ctx = ctx or EvalContext()
    factor = exp(f)
    R_new = CovectorField(_scaled(R.u, factor, ctx), _scaled(R.v, factor, ctx))
    L_new = Cofactor(_shifted(L.a, partial_derivative(f, 1, 0), ctx), _shifted(L.b, partial_derivative(f, 0, 1), ctx))
    return R_new, L_new


def gap_value(m: MetricSpec, a, b, u: float, v: float, u_y: float, v_x: float, pt: tuple) -> float:
    """First compatibility condition of the relative Killing system at ``pt``.

    For a closed cofactor (ρ = 0) it equals 2e^{2λ}(k_x u + k_y v).
    """
    x, y = pt
    _require_points(m, x, y)
    a, b = as_field(a), as_field(b)
    ctx = m.params
    lam = {idx: m.lambda_values(x, y, *idx) for idx in multi_indices(3) if sum(idx) >= 1}
    lap = lam[2, 0] + lam[0, 2]
    lap_x = lam[3, 0] + lam[1, 2]
    lap_y = lam[2, 1] + lam[0, 3]
    aa, bb = a.at(x, y, ctx), b.at(x, y, ctx)
    rho = b.derivative(1, 0).at(x, y, ctx) - a.derivative(0, 1).at(x, y, ctx)
    rho_x = b.derivative(2, 0).at(x, y, ctx) - a.derivative(1, 1).at(x, y, ctx)
    rho_y = b.derivative(1, 1).at(x, y, ctx) - a.derivative(0, 2).at(x, y, ctx)

    u_coeff = (3.0 * bb + 2.0 * lam[0, 1]) * rho + 4.0 * lap * lam[1, 0] - 2.0 * lap_x + 2.0 * rho_y
    v_coeff = (3.0 * aa + 2.0 * lam[1, 0]) * rho - 4.0 * lap * lam[0, 1] + 2.0 * lap_y + 2.0 * rho_x
    return 3.0 * (u_y - v_x) * rho + u_coeff * u - v_coeff * v


# --------------------------------------------------------------------------- marching


def _matrix(rows: list[list]) -> np.ndarray:
    """Stack scalar-or-array entries into an array of shape (..., n, n)."""
    flat = np.broadcast_arrays(*(np.asarray(e, dtype=float) for row in rows for e in row))
    n = len(rows)
    stacked = np.stack(flat, axis=-1)
    return stacked.reshape(*stacked.shape[:-1], n, n)


def _march_line(
    coef: Callable, fixed, t0: float, start: np.ndarray, targets: np.ndarray, along_x: bool
) -> np.ndarray:
    """Integrate Φ' = A Φ from t0 to every target (both directions); batch dims of ``start`` follow ``fixed``."""
    shape = start.shape

    def rhs(t, z):
        x, y = (t, fixed) if along_x else (fixed, t)
        return np.matmul(coef(x, y), z.reshape(shape)).ravel()

    out = np.empty((len(targets), *shape))
    eps = 1e-14 * (1.0 + abs(t0))
    out[np.abs(targets - t0) <= eps] = start
    for forward in (True, False):
        mask = targets > t0 + eps if forward else targets < t0 - eps
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            continue
        order = idx[np.argsort(targets[idx])]
        if not forward:
            order = order[::-1]
        ts = targets[order]
        sol = solve_ivp(
            rhs, (t0, ts[-1]), start.ravel(), method="DOP853", t_eval=ts, rtol=MARCH_RTOL, atol=MARCH_ATOL
        )
        if not sol.success:
            reached = float(sol.t[-1]) if sol.t.size else t0
            raise MarchingBreakdownError(f"Cauchy-data march failed: {sol.message}", reached)
        out[order] = np.moveaxis(sol.y, -1, 0).reshape(len(ts), *shape)
    return out


def _march_both_orders(
    coef_x: Callable, coef_y: Callable, n: int, base: tuple[float, float], xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Fundamental matrices on the grid, marched x-then-y and y-then-x; shape (nx, ny, n, n)."""
    x0, y0 = base
    eye = np.eye(n)
    row = _march_line(coef_x, y0, x0, eye, xs, along_x=True)
    xy = _march_line(coef_y, xs, y0, row, ys, along_x=False)
    xy = np.moveaxis(xy, 0, 1)

    column = _march_line(coef_y, x0, y0, eye, ys, along_x=False)
    yx = _march_line(coef_x, ys, x0, column, xs, along_x=True)
    return xy, yx


@dataclass(frozen=True)
class MarchedSpace:
    """Fundamental-matrix march on a grid together with its path discrepancy."""

    xs: np.ndarray
    ys: np.ndarray
    fundamental: np.ndarray
    discrepancy: np.ndarray

    @property
    def order(self) -> int:
        return self.fundamental.shape[-1]

    def solution_values(self, cauchy) -> np.ndarray:
        return self.fundamental @ np.asarray(cauchy, dtype=float)

    def relative_discrepancy(self, cauchy) -> float:
        c = np.asarray(cauchy, dtype=float)
        scale = float(np.max(np.abs(self.fundamental @ c))) or 1.0
        return float(np.max(np.abs(self.discrepancy @ c))) / scale

    def singular_values(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Singular values of the solution matrix, of the discrepancy matrix, and its right vectors."""
        n = self.order
        solutions = self.fundamental[..., :2, :].reshape(-1, n)
        sol_sv = np.linalg.svd(solutions, compute_uv=False)
        _, disc_sv, vt = np.linalg.svd(self.discrepancy.reshape(-1, n))
        return sol_sv, disc_sv, vt

    def null_space(self, tol: float) -> tuple[int, np.ndarray]:
        sol_sv, disc_sv, vt = self.singular_values()
        scale = float(np.max(np.abs(self.fundamental))) or 1.0
        rank = int(np.sum(disc_sv > tol * scale))
        return self.order - rank, vt[rank:]

    def covector(self, cauchy) -> CovectorField:
        values = self.solution_values(cauchy)
        return CovectorField(GridField(self.xs, self.ys, values[..., 0]), GridField(self.xs, self.ys, values[..., 1]))


def _default_grid(m: MetricSpec, grid: tuple[np.ndarray, np.ndarray] | None):
    return grid if grid is not None else m.domain.grid(settings.grid_nx, settings.grid_ny)


def _lambda_functions(m: MetricSpec, order: int) -> dict[tuple[int, int], Callable]:
    return {idx: compile_expression(m.lambda_partial(*idx), m.params) for idx in multi_indices(order)}


def _cofactor_coefficients(m: MetricSpec, cof: Cofactor) -> tuple[Callable, Callable, Callable]:
    lam = _lambda_functions(m, 3)
    ctx = m.params
    a_fn, b_fn = compiled(cof.a, ctx), compiled(cof.b, ctx)
    rho_parts = {
        "rho": (compiled(cof.b.derivative(1, 0), ctx), compiled(cof.a.derivative(0, 1), ctx)),
        "rho_x": (compiled(cof.b.derivative(2, 0), ctx), compiled(cof.a.derivative(1, 1), ctx)),
        "rho_y": (compiled(cof.b.derivative(1, 1), ctx), compiled(cof.a.derivative(0, 2), ctx)),
    }

    def rho_values(x, y):
        return {name: bf(x, y) - af(x, y) for name, (bf, af) in rho_parts.items()}

    def common(x, y):
        lx, ly = lam[1, 0](x, y), lam[0, 1](x, y)
        lap = lam[2, 0](x, y) + lam[0, 2](x, y)
        kx = 2.0 * lx * lap - (lam[3, 0](x, y) + lam[1, 2](x, y))
        ky = 2.0 * ly * lap - (lam[2, 1](x, y) + lam[0, 3](x, y))
        r = rho_values(x, y)
        rho = r["rho"]
        px = (lx + r["rho_x"] / rho) / 3.0
        py = (ly + r["rho_y"] / rho) / 3.0
        return lx, ly, kx / (3.0 * rho), ky / (3.0 * rho), px, py

    def coef_x(x, y):
        lx, ly, cx, cy, px, py = common(x, y)
        a = a_fn(x, y)
        return _matrix([[-(a + lx), -ly], [cx + py, cy - (a + px)]])

    def coef_y(x, y):
        lx, ly, cx, cy, px, py = common(x, y)
        b = b_fn(x, y)
        return _matrix([[-cx - (b + py), -cy + px], [-lx, -(b + ly)]])

    return coef_x, coef_y, lambda x, y: rho_values(x, y)["rho"]


def _killing_coefficients(m: MetricSpec) -> tuple[Callable, Callable]:
    lam = _lambda_functions(m, 2)

    def coef_x(x, y):
        lx, ly = lam[1, 0](x, y), lam[0, 1](x, y)
        lxy, lyy = lam[1, 1](x, y), lam[0, 2](x, y)
        zero = np.zeros_like(np.asarray(lx + ly, dtype=float))
        return _matrix([
            [-lx, -ly, zero],
            [zero, zero, zero - 0.5],
            [2.0 * (lx * ly - lxy), 2.0 * (ly * ly - lyy), -lx],
        ])

    def coef_y(x, y):
        lx, ly = lam[1, 0](x, y), lam[0, 1](x, y)
        lxx, lxy = lam[2, 0](x, y), lam[1, 1](x, y)
        zero = np.zeros_like(np.asarray(lx + ly, dtype=float))
        return _matrix([
            [zero, zero, zero + 0.5],
            [-lx, -ly, zero],
            [2.0 * (lxx - lx * lx), 2.0 * (lxy - lx * ly), -ly],
        ])

    return coef_x, coef_y


def march_rkv_space(
    m: MetricSpec, cof: Cofactor, base: tuple[float, float] | None = None, grid=None
) -> MarchedSpace:
    """Fundamental solutions of the prolonged system for a non-closed cofactor."""
    xs, ys = _default_grid(m, grid)
    base = base or m.domain.center
    m.require_inside(*base)
    coef_x, coef_y, rho_fn = _cofactor_coefficients(m, cof)

    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    rho = np.broadcast_to(np.asarray(rho_fn(gx, gy), dtype=float), gx.shape)
    floor = RHO_FLOOR * max(1.0, float(np.max(np.abs(rho))))
    if np.min(np.abs(rho)) < floor:
        i, j = np.unravel_index(np.argmin(np.abs(rho)), rho.shape)
        raise DegenerateCofactorError(f"ρ = b_x − a_y vanishes near ({xs[i]:.6g}, {ys[j]:.6g})")

    xy, yx = _march_both_orders(coef_x, coef_y, 2, base, xs, ys)
    return MarchedSpace(xs, ys, xy, xy - yx)


@dataclass(frozen=True)
class RKVSolution:
    cofactor: Cofactor
    basis: list[CovectorField] = field(default_factory=list)
    dim: int = 0
    singular_values: list[float] = field(default_factory=list)


def solve_rkv_given_cofactor(
    m: MetricSpec,
    cof: Cofactor,
    base: tuple[float, float],
    cauchy: tuple[float, float],
    grid=None,
    tol: float | None = None,
) -> CovectorField:
    """Relative Killing vector with the given cofactor and value (u₀, v₀) at ``base``.

    Raises:
        DegenerateCofactorError: ρ vanishes somewhere on the patch.
        InconsistentCofactorError: the two marching orders disagree beyond ``tol``.
    """
    tol = settings.residual_tol if tol is None else tol
    space = march_rkv_space(m, cof, base, grid)
    drift = space.relative_discrepancy(cauchy)
    logger.debug("Relative Killing march from %s with data %s: discrepancy %.3g", base, cauchy, drift)
    if drift > tol:
        raise InconsistentCofactorError(
            f"cofactor admits no relative Killing vector with data {tuple(cauchy)} (discrepancy {drift:.3g})"
        )
    return space.covector(cauchy)


def rkv_space(m: MetricSpec, cof: Cofactor, base=None, grid=None, tol: float | None = None) -> RKVSolution:
    tol = settings.residual_tol if tol is None else tol
    space = march_rkv_space(m, cof, base, grid)
    dim, vectors = space.null_space(tol)
    _, disc_sv, _ = space.singular_values()
    logger.info("Relative Killing space for '%s': dimension %d", m.name, dim)
    return RKVSolution(
        cofactor=cof,
        basis=[space.covector(c) for c in vectors],
        dim=dim,
        singular_values=[float(s) for s in disc_sv],
    )


def rkv_dimension(m: MetricSpec, cof: Cofactor, base=None, grid=None, tol: float | None = None) -> int:
    """Dimension (0, 1 or 2) of the relative Killing vectors with cofactor ``cof``."""
    return rkv_space(m, cof, base, grid, tol).dim


# --------------------------------------------------------------------------- L = 0


@dataclass(frozen=True)
class KillingSpace:
    dim: int
    solution_singular_values: list[float]
    discrepancy_singular_values: list[float]
    gap: float


def march_killing_space(m: MetricSpec, base: tuple[float, float] | None = None, grid=None) -> MarchedSpace:
    xs, ys = _default_grid(m, grid)
    base = base or m.domain.center
    m.require_inside(*base)
    coef_x, coef_y = _killing_coefficients(m)
    xy, yx = _march_both_orders(coef_x, coef_y, 3, base, xs, ys)
    return MarchedSpace(xs, ys, xy, xy - yx)


def solve_killing(
    m: MetricSpec, base: tuple[float, float], cauchy: tuple[float, float, float], grid=None, tol: float | None = None
) -> CovectorField:
    """Killing vector with (u, v, u_y − v_x) = ``cauchy`` at ``base``."""
    tol = settings.residual_tol if tol is None else tol
    space = march_killing_space(m, base, grid)
    drift = space.relative_discrepancy(cauchy)
    if drift > tol:
        raise InconsistentCofactorError(f"no Killing vector with data {tuple(cauchy)} (discrepancy {drift:.3g})")
    return space.covector(cauchy)


def killing_dimension(m: MetricSpec, base=None, grid=None, tol: float | None = None) -> KillingSpace:
    """Rank test for Killing vectors: 3 for constant curvature, at most 1 otherwise."""
    tol = settings.residual_tol if tol is None else tol
    space = march_killing_space(m, base, grid)
    dim, vectors = space.null_space(tol)
    sol_sv, disc_sv, _ = space.singular_values()
    solutions = space.fundamental[..., :2, :].reshape(-1, 3)
    kept_sv = np.linalg.svd(solutions @ vectors.T, compute_uv=False) if dim else np.zeros(0)
    gap = 0.0
    if dim:
        worst = float(disc_sv[-dim:].max()) if len(disc_sv) >= dim else 0.0
        gap = float(kept_sv.min()) / max(worst, np.finfo(float).tiny)
    logger.info("Killing space for '%s': dimension %d (gap %.3g)", m.name, dim, gap)
    return KillingSpace(
        dim=dim,
        solution_singular_values=[float(s) for s in sol_sv],
        discrepancy_singular_values=[float(s) for s in disc_sv],
        gap=gap,
    )


def max_residual(m: MetricSpec, R: CovectorField, cof: Cofactor, xs: np.ndarray, ys: np.ndarray) -> float:
    """Largest relative Killing residual over the interior grid nodes."""
    gx, gy = np.meshgrid(xs[1:-1], ys[1:-1], indexing="ij")
    residuals = rkv_residuals(m, R.u, R.v, cof.a, cof.b, (gx, gy))
    return float(max(np.max(np.abs(r)) for r in residuals))
