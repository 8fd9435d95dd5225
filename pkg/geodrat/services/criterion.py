"""Existence test for fractional-linear integrals on a given metric.

The derived system is specialized numerically: every member becomes, at each grid
point, a real polynomial in w whose coefficients are evaluated from the λ-jets. A
cofactor branch exists exactly when the four members share a real root at every point;
the resultant statistics measure that, candidate roots are continued across the grid
with the first-order system, and surviving branches are integrated to a cofactor and
checked by building the relative Killing pair and following geodesics.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.lib import scimath
from scipy.integrate import cumulative_simpson
from scipy.special import j0, j1

from geodrat.config import settings
from geodrat.errors import (
    DegenerateCofactorError,
    GeodratError,
    MetricFormError,
    SingularMatrixError,
    VanishingDenominatorError,
)
from geodrat.models.schemas import (
    BranchReport,
    CriterionReport,
    GridSample,
    PhiStats,
    PsiReport,
    RevolutionWitness,
    SampledCovector,
    Tolerances,
    WCandidate,
)
from geodrat.services.derivation import EQ0_NAMES, DerivedSystem, derived_system
from geodrat.services.fields import Cofactor, CovectorField, GridField, stencil_derivative
from geodrat.services.flow import FractionalLinearIntegral, Trajectory, batch_integrate, conservation_report
from geodrat.services.geometry import MetricSpec, is_constant_curvature, revolution_invariants
from geodrat.services.jet_algebra import JetPolynomial, algebra, lambda_name
from geodrat.services.jets import jet_of
from geodrat.services.killing import rkv_space

logger = logging.getLogger(__name__)

PHI_MEMBERS = ("Eq0'", "Eq0''", "Eq0'''")
MAX_CANDIDATES = 6
REAL_ROOT_TOL = 1e-8
LEADING_FLOOR = 1e-10
BRANCH_TOL = 1e-3
ISOLATION_RATIO = 0.25
ISOLATED_TOL = 0.1
W_FLOOR = 1e-6
CONSISTENCY_TOL = 1e-4
VERIFY_GRID = (41, 41)
VERIFY_RKV_TOL = 1e-4
VERIFY_DRIFT = 1e-5
VERIFY_TRAJECTORIES = 8
VERIFY_T_END = 2.0
MOBIUS_FACTOR = 10.0
MOBIUS_FLOOR = 1e-10
PSI_TOL = 1e-8
PSI_POINTS = 10


# --------------------------------------------------------------------------- specialization


@dataclass(frozen=True)
class CompiledPolynomial:
    """A jet polynomial as dense numeric blocks: for each power of w, coefficients and exponent rows."""

    generators: tuple[str, ...]
    blocks: tuple[tuple[int, np.ndarray, np.ndarray], ...]

    @classmethod
    def of(cls, p: JetPolynomial) -> "CompiledPolynomial":
        alg = algebra()
        coefficients = p.w_coefficients()
        used = {"E"}
        for c in coefficients.values():
            for monom, _ in c.num.terms():
                used.update(alg.names[k] for k, e in enumerate(monom) if e and k != alg.w_index)
        if any(name.startswith("W") for name in used):
            raise ValueError("only polynomials in w with λ-jet coefficients can be specialized")
        generators = tuple(sorted(used, key=alg.index))
        columns = [alg.index(name) for name in generators]

        blocks = []
        for power, c in sorted(coefficients.items()):
            terms = c.num.terms()
            exps = np.array([[monom[k] for k in columns] for monom, _ in terms], dtype=int)
            exps[:, 0] += c.e_shift
            values = np.array([float(coeff) for _, coeff in terms])
            blocks.append((power, values, exps))
        return cls(generators, tuple(blocks))

    @cached_property
    def degree(self) -> int:
        return max(power for power, _, _ in self.blocks)

    @cached_property
    def jet_order(self) -> int:
        return max((sum(map(int, g.split("_")[1:])) for g in self.generators if g != "E"), default=0)

    def power_coefficients(self, values: dict[str, np.ndarray]) -> dict[int, np.ndarray]:
        """Coefficient of each power of w at every sample (``values`` are flat arrays)."""
        stacked = [values[g] for g in self.generators]
        out = {}
        for power, coeffs, exps in self.blocks:
            monomials = np.ones((len(coeffs), len(stacked[0])))
            for k, column in enumerate(stacked):
                if np.any(exps[:, k]):
                    monomials *= column[None, :] ** exps[:, k][:, None]
            out[power] = coeffs @ monomials
        return out

    def coefficients(self, values: dict[str, np.ndarray]) -> np.ndarray:
        """Dense coefficients, highest power first, shape (samples, degree + 1)."""
        by_power = self.power_coefficients(values)
        if min(by_power) < 0:
            raise ValueError("negative powers of w have no dense coefficient form")
        n = len(next(iter(by_power.values())))
        dense = np.zeros((n, self.degree + 1))
        for power, column in by_power.items():
            dense[:, self.degree - power] = column
        return dense


class SpecializedSystem:
    """The derived system specialized on a metric at a flat array of points."""

    def __init__(self, system: DerivedSystem, m: MetricSpec, x, y) -> None:
        compiled = _compiled(system)
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        xf = np.broadcast_to(np.asarray(x, dtype=float), shape).ravel()
        yf = np.broadcast_to(np.asarray(y, dtype=float), shape).ravel()
        order = max(c.jet_order for c in compiled.values())
        jet = jet_of(m.lam, xf, yf, order, m.params)
        values = {lambda_name(i, j): np.broadcast_to(np.asarray(v, dtype=float), xf.shape) for (i, j), v in jet.partials.items() if i + j}
        values["E"] = np.exp(2.0 * np.broadcast_to(np.asarray(jet[0, 0], dtype=float), xf.shape))

        self.shape = shape
        self.members = {name: compiled[name].coefficients(values) for name in EQ0_NAMES}
        self.den = compiled["den"].power_coefficients(values)
        self.n1 = compiled["n1"].power_coefficients(values)
        self.n2 = compiled["n2"].power_coefficients(values)
        logger.debug("Specialized the derived system on '%s' at %d points", m.name, xf.size)

    def at(self, index: int) -> dict[str, np.ndarray]:
        return {name: c[index] for name, c in self.members.items()}

    def slope(self, direction: str, index: int, w: float) -> float:
        """w_x or w_y from the solved first-order system at sample ``index``."""
        numerator = self.n1 if direction == "x" else self.n2
        num = sum(c[index] * w**p for p, c in numerator.items())
        den = sum(c[index] * w**p for p, c in self.den.items())
        return num / den

    def denominator_degenerate(self, index: int) -> bool:
        coeffs = np.array([abs(c[index]) for c in self.den.values()])
        lead = abs(self.den[2][index]) if 2 in self.den else 0.0
        return lead <= LEADING_FLOOR * max(float(coeffs.max()), np.finfo(float).tiny)


_COMPILED: dict[int, tuple[DerivedSystem, dict[str, CompiledPolynomial]]] = {}


def _compiled(system: DerivedSystem) -> dict[str, CompiledPolynomial]:
    entry = _COMPILED.get(id(system))
    if entry is None or entry[0] is not system:
        compiled = {name: CompiledPolynomial.of(p) for name, p in system.eq0.items()}
        compiled.update(den=CompiledPolynomial.of(system.den), n1=CompiledPolynomial.of(system.n1), n2=CompiledPolynomial.of(system.n2))
        entry = (system, compiled)
        _COMPILED[id(system)] = entry
    return entry[1]


def specialize(system: DerivedSystem, m: MetricSpec, pt: tuple[float, float]) -> dict[str, np.ndarray]:
    """Numeric coefficients (highest power first) of the four zero-order members at ``pt``."""
    m.require_inside(*pt)
    return SpecializedSystem(system, m, pt[0], pt[1]).at(0)


# --------------------------------------------------------------------------- resultants


def sylvester(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Sylvester matrix of two coefficient vectors (highest power first)."""
    m, n = len(f) - 1, len(g) - 1
    s = np.zeros((m + n, m + n))
    for i in range(n):
        s[i, i : i + m + 1] = f
    for i in range(m):
        s[n + i, i : i + n + 1] = g
    return s


def resultant(f: np.ndarray, g: np.ndarray, monic: bool = False) -> float:
    if monic:
        f, g = f / f[0], g / g[0]
    return float(np.linalg.det(sylvester(f, g)))


def real_roots(coeffs: np.ndarray) -> np.ndarray:
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) <= REAL_ROOT_TOL * (1.0 + np.abs(roots))].real
    return np.unique(np.round(real, 12))


def relative_value(coeffs: np.ndarray, w) -> np.ndarray:
    """|X(w)| / Σ|x_k||w|^k, zero where X has no nonzero coefficient."""
    value = np.abs(np.polyval(coeffs, w))
    scale = np.polyval(np.abs(coeffs), np.abs(w))
    return np.divide(value, scale, out=np.zeros_like(value, dtype=float), where=scale > 0)


@dataclass(frozen=True)
class PhiValues:
    normalized: np.ndarray
    raw: np.ndarray
    monic: np.ndarray
    flagged: bool


def _phi_at(members: dict[str, np.ndarray], degenerate: bool) -> PhiValues:
    eq0 = members["Eq0"]
    roots = np.roots(eq0)
    normalized, raw, monic = [], [], []
    flagged = degenerate
    for name in PHI_MEMBERS:
        x = members[name]
        flagged |= abs(x[0]) <= LEADING_FLOOR * max(float(np.max(np.abs(x))), np.finfo(float).tiny)
        normalized.append(float(np.min(relative_value(x, roots))) if roots.size else 0.0)
        raw.append(resultant(eq0, x))
        monic.append(resultant(eq0, x, monic=True) if x[0] else float("nan"))
    return PhiValues(np.array(normalized), np.array(raw), np.array(monic), bool(flagged))


def phi_evaluate(system: DerivedSystem, m: MetricSpec, pt: tuple[float, float]) -> PhiValues:
    """The three resultant components (Eq0 against each other member) at one point."""
    m.require_inside(*pt)
    spec = SpecializedSystem(system, m, pt[0], pt[1])
    return _phi_at(spec.at(0), spec.denominator_degenerate(0))


def phi_band(values: np.ndarray, tolerances: Tolerances) -> str:
    if values.size == 0:
        return "inconclusive"
    if np.median(values) < tolerances.phi_accept and np.percentile(values, 95) < tolerances.phi_accept_p95:
        return "accept"
    if np.min(values) > tolerances.phi_reject:
        return "reject"
    return "inconclusive"


def phi_grid(system: DerivedSystem, m: MetricSpec, grid: tuple[int, int], tolerances: Tolerances) -> PhiStats:
    """Per-point maximum of the normalized components over the grid, with the band it falls in."""
    gx, gy = m.domain.mesh(*grid)
    spec = SpecializedSystem(system, m, gx, gy)
    per_point, raw, monic, flagged = [], [], [], 0
    for index in range(gx.size):
        phi = _phi_at(spec.at(index), spec.denominator_degenerate(index))
        if phi.flagged:
            flagged += 1
            logger.debug("Φ point (%.4g, %.4g) flagged as degenerate", gx.flat[index], gy.flat[index])
            continue
        per_point.append(float(phi.normalized.max()))
        raw.append(phi.raw)
        monic.append(phi.monic)
    if flagged:
        logger.warning("%d of %d grid points excluded from the Φ statistics as degenerate", flagged, gx.size)
    values = np.array(per_point)
    band = phi_band(values, tolerances)
    empty = values.size == 0
    return PhiStats(
        median=float(np.median(values)) if not empty else float("nan"),
        p95=float(np.percentile(values, 95)) if not empty else float("nan"),
        minimum=float(values.min()) if not empty else float("nan"),
        maximum=float(values.max()) if not empty else float("nan"),
        points=int(values.size),
        flagged=flagged,
        band=band,
        raw_median=[float(v) for v in np.nanmedian(np.array(raw), axis=0)] if raw else [],
        monic_median=[float(v) for v in np.nanmedian(np.array(monic), axis=0)] if monic else [],
    )


# --------------------------------------------------------------------------- candidates and branches


def _candidates_from(members: dict[str, np.ndarray], pt: tuple[float, float], tol: float) -> list[WCandidate]:
    found = []
    for w in real_roots(members["Eq0"]):
        residuals = {name: float(relative_value(members[name], w)) for name in PHI_MEMBERS}
        score = max(residuals.values())
        if score <= tol:
            found.append(WCandidate(w=float(w), point=(float(pt[0]), float(pt[1])), residuals=residuals, score=score))
    found.sort(key=lambda c: (c.score, c.w))
    return found[:MAX_CANDIDATES]


def find_w_candidates(
    system: DerivedSystem, m: MetricSpec, pt: tuple[float, float], tol: float | None = None
) -> list[WCandidate]:
    """Real roots of Eq0 at ``pt`` that the other three members also (nearly) annihilate."""
    tol = settings.phi_accept_p95 if tol is None else tol
    return _candidates_from(specialize(system, m, pt), pt, tol)


@dataclass(frozen=True)
class Branch:
    seed_w: float
    w: GridField
    matched: int
    nodes: int

    @property
    def verified(self) -> bool:
        return self.matched == self.nodes


def continue_branch(
    spec: SpecializedSystem, xs: np.ndarray, ys: np.ndarray, seed: tuple[int, int], seed_w: float, tol: float = BRANCH_TOL
) -> Branch:
    """Follow a root of Eq0 over the grid: trapezoid steps of the first-order system, snapped to the nearest root."""
    nx, ny = len(xs), len(ys)
    w = np.full((nx, ny), np.nan)
    si, sj = seed
    w[si, sj] = seed_w
    matched = 1

    def step(a: tuple[int, int], b: tuple[int, int], direction: str, h: float) -> bool:
        ia, ib = np.ravel_multi_index(a, (nx, ny)), np.ravel_multi_index(b, (nx, ny))
        wa = w[a]
        with np.errstate(divide="ignore", invalid="ignore"):
            slope_a = spec.slope(direction, ia, wa)
            corrected = wa
            if np.isfinite(slope_a):
                predicted = wa + h * slope_a
                slope_b = spec.slope(direction, ib, predicted)
                corrected = wa + 0.5 * h * (slope_a + slope_b) if np.isfinite(slope_b) else predicted
        roots = real_roots(spec.members["Eq0"][ib])
        if roots.size:
            gaps = np.abs(roots - corrected)
            order = np.argsort(gaps)
            nearest, gap = roots[order[0]], gaps[order[0]]
            # near a zero of the denominator the step is poor; an isolated root is still unambiguous
            isolated = roots.size == 1 or gap < ISOLATION_RATIO * gaps[order[1]]
            if gap <= tol * (1.0 + abs(corrected)) or (isolated and gap <= ISOLATED_TOL * (1.0 + abs(corrected))):
                w[b] = nearest
                return True
        w[b] = corrected
        return False

    for order in (range(si + 1, nx), range(si - 1, -1, -1)):
        for i in order:
            prev = i - 1 if i > si else i + 1
            matched += step((prev, sj), (i, sj), "x", xs[i] - xs[prev])
    for i in range(nx):
        for order in (range(sj + 1, ny), range(sj - 1, -1, -1)):
            for j in order:
                prev = j - 1 if j > sj else j + 1
                matched += step((i, prev), (i, j), "y", ys[j] - ys[prev])
    return Branch(float(seed_w), GridField(xs, ys, w), int(matched), nx * ny)


# --------------------------------------------------------------------------- cofactor


def reconstruct_cofactor(w_field: GridField, reference: np.ndarray | None = None) -> Cofactor:
    """Cofactor (a, 0) with a_y = w, integrated from the first grid row.

    The gauge b = 0 makes a a y-antiderivative of w, so a comes from integrating the
    root field and is never solved from the v-coefficient of the compatibility gap.
    ``reference`` fixes a on the first row (the remaining gauge freedom, a function of x
    alone); zero otherwise.

    Raises:
        DegenerateCofactorError: w comes near zero, so the cofactor is closed.
    """
    w = np.asarray(w_field.values, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DegenerateCofactorError("w is not finite on the whole grid")
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.min(np.abs(w)) <= W_FLOOR * scale:
        raise DegenerateCofactorError("w vanishes on the patch; the cofactor is closed (Killing-vector case)")
    a = cumulative_simpson(w, x=w_field.ys, axis=1, initial=0.0)
    if reference is not None:
        a = a + np.asarray(reference, dtype=float)[:, None]
    consistency = cofactor_consistency(GridField(w_field.xs, w_field.ys, a), w_field)
    if consistency > CONSISTENCY_TOL:
        logger.warning("Reconstructed cofactor: a_y differs from w by %.2e (relative)", consistency)
    return Cofactor(GridField(w_field.xs, w_field.ys, a))


def cofactor_consistency(a: GridField, w: GridField) -> float:
    """max |a_y − w| / max |w| with a fourth-order stencil for a_y."""
    a_y = stencil_derivative(a.values, a.ys[1] - a.ys[0], axis=1)
    return float(np.max(np.abs(a_y - w.values)) / max(float(np.max(np.abs(w.values))), np.finfo(float).tiny))


# --------------------------------------------------------------------------- decision


def _sample(field: GridField) -> GridSample:
    return GridSample(xs=field.xs.tolist(), ys=field.ys.tolist(), values=field.values.tolist())


def _sample_covector(R: CovectorField) -> SampledCovector:
    return SampledCovector(u=_sample(R.u), v=_sample(R.v))


@dataclass(frozen=True)
class VerifiedBranch:
    report: BranchReport
    cofactor: Cofactor | None = None
    integral: FractionalLinearIntegral | None = None


def _max_drift(F: FractionalLinearIntegral, trajectories: list[Trajectory], q_min: float) -> float | None:
    drifts = []
    for traj in trajectories:
        try:
            drifts.append(conservation_report(F, traj, q_min).drift)
        except VanishingDenominatorError:
            continue
    return max(drifts) if drifts else None


def _verify_branch(m: MetricSpec, branch: Branch, tolerances: Tolerances, seed: int) -> VerifiedBranch:
    report = BranchReport(seed_w=branch.seed_w, matched=branch.matched, nodes=branch.nodes, verified=False)
    if not branch.verified:
        return VerifiedBranch(report.model_copy(update={"note": "root continuation lost the branch"}))
    try:
        cofactor = reconstruct_cofactor(branch.w)
        solution = rkv_space(m, cofactor, grid=(branch.w.xs, branch.w.ys), tol=VERIFY_RKV_TOL)
    except GeodratError as exc:
        logger.info("Branch w0=%.6g rejected: %s", branch.seed_w, exc)
        return VerifiedBranch(report.model_copy(update={"note": str(exc)}))
    consistency = cofactor_consistency(cofactor.a, branch.w)
    report = report.model_copy(update={"rkv_dimension": solution.dim, "cofactor_consistency": consistency})
    if solution.dim != 2:
        return VerifiedBranch(report.model_copy(update={"note": f"relative Killing space has dimension {solution.dim}"}), cofactor)

    F = FractionalLinearIntegral(*solution.basis[:2], m.params)
    trajectories = batch_integrate(m, VERIFY_TRAJECTORIES, VERIFY_T_END, seed, energy_tol=tolerances.energy_tol)
    drift = _max_drift(F, trajectories, tolerances.q_min)
    verified = drift is not None and drift <= VERIFY_DRIFT
    note = "" if verified else "constructed integral is not conserved along geodesics"
    return VerifiedBranch(report.model_copy(update={"max_drift": drift, "verified": verified, "note": note}), cofactor, F)


def decide(
    m: MetricSpec,
    grid: tuple[int, int] | None = None,
    tolerances: Tolerances | None = None,
    system: DerivedSystem | None = None,
    seed: int = 0,
) -> CriterionReport:
    """Decide whether the geodesic flow of ``m`` has a fractional-linear integral and count the Möbius classes.

    Constant curvature short-circuits to RP2; metrics of revolution go through the closed-form
    fast path before anything is derived; everything else is decided from the Φ statistics
    on the grid, and a positive answer is only given for branches whose integral was
    actually built and conserved.
    """
    grid = grid or (settings.grid_nx, settings.grid_ny)
    tolerances = tolerances or Tolerances()
    constant, mean = is_constant_curvature(m, tolerances.residual_tol, *grid)
    if constant:
        logger.info("'%s' has constant curvature %.6g: moduli RP2", m.name, mean)
        return CriterionReport(verdict="constant_curvature", moduli="RP2", curvature_mean=mean)

    if m.is_revolution:
        # closed form; the derived system is not needed
        return revolution_fastpath(m)

    system = system or derived_system()
    phi = phi_grid(system, m, grid, tolerances)
    notes = [] if system.consistent else ["derived system deviates from its structural checksums"]
    base = CriterionReport(verdict="none", moduli="empty", phi=phi, derivation_consistent=system.consistent, notes=notes)
    if phi.band == "reject":
        logger.info("Φ is nonzero on '%s' (min %.3g): no fractional-linear integral", m.name, phi.minimum)
        return base
    if phi.band == "inconclusive":
        logger.info("Φ statistics on '%s' straddle the bands (median %.3g, min %.3g)", m.name, phi.median, phi.minimum)
        return base.model_copy(update={"verdict": "inconclusive", "moduli": "unknown"})

    xs, ys = m.domain.grid(*VERIFY_GRID)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    spec = SpecializedSystem(system, m, gx, gy)
    seed_node = (len(xs) // 2, len(ys) // 2)
    seed_index = int(np.ravel_multi_index(seed_node, gx.shape))
    seed_pt = (float(xs[seed_node[0]]), float(ys[seed_node[1]]))
    candidates = _candidates_from(spec.at(seed_index), seed_pt, tolerances.phi_accept_p95)

    verified = []
    for candidate in candidates:
        branch = continue_branch(spec, xs, ys, seed_node, candidate.w)
        result = _verify_branch(m, branch, tolerances, seed)
        verified.append(result)
        logger.info("Branch w0=%.6g: %s", candidate.w, "verified" if result.report.verified else result.report.note)

    good = [b for b in verified if b.report.verified]
    report = base.model_copy(update={"candidates": candidates, "branches": [b.report for b in verified]})
    if not good:
        note = "Φ vanishes but no branch produced a conserved integral"
        return report.model_copy(update={"verdict": "inconclusive", "moduli": "unknown", "notes": notes + [note]})
    first = good[0]
    logger.info("'%s' admits fractional-linear integrals: %d Möbius class(es)", m.name, len(good))
    return report.model_copy(
        update={
            "verdict": "exists",
            "moduli": f"points({len(good)})",
            "moduli_points": len(good),
            "cofactor_a": _sample(first.cofactor.a),
            "integral_p": _sample_covector(first.integral.P),
            "integral_q": _sample_covector(first.integral.Q),
        }
    )


def revolution_fastpath(m: MetricSpec, samples: int = 10) -> CriterionReport:
    """No fractional-linear integral for λ = λ(x) with nonconstant curvature.

    The vanishing-denominator branch and the Eq0 branch give w² with radicands of
    opposite sign, so a common real w needs k_x = 0.

    Raises:
        MetricFormError: λ depends on y, or the curvature is constant.
    """
    if not m.is_revolution:
        raise MetricFormError(f"metric '{m.name}' is not of revolution form (λ_y ≢ 0)")
    constant, _ = is_constant_curvature(m, settings.residual_tol)
    if constant:
        raise MetricFormError(f"metric '{m.name}' has constant curvature; use the constant-curvature branch")
    d = m.domain
    xs = np.linspace(d.x_min, d.x_max, samples + 2)[1:-1]
    y = d.center[1]
    den_branch, eq0_branch, k_x = [], [], []
    for x in xs:
        frame = revolution_invariants(m, float(x))
        kx = frame.grad_k[0]
        e2 = float(np.exp(2.0 * m.lambda_values(x, y)))
        with np.errstate(divide="ignore", invalid="ignore"):
            core = np.divide(frame.k_xx, kx) - 8.0 * frame.j * scimath.sqrt(kx)
        w_den = e2 * scimath.sqrt(core) / (2.0 * np.sqrt(30.0))
        w_eq0 = e2 * scimath.sqrt(-core) / (2.0 * np.sqrt(15.0))
        k_x.append(float(kx))
        den_branch.append((float(np.real(w_den)), float(np.imag(w_den))))
        eq0_branch.append((float(np.real(w_eq0)), float(np.imag(w_eq0))))
    witness = RevolutionWitness(xs=xs.tolist(), k_x=k_x, denominator_branch=den_branch, eq0_branch=eq0_branch)
    logger.info("'%s' is a metric of revolution with nonconstant curvature: no fractional-linear integral", m.name)
    return CriterionReport(
        verdict="none",
        moduli="empty",
        revolution=witness,
        notes=["metric of revolution: the denominator and Eq0 branches are incompatible"],
    )


def branches_incompatible(witness: RevolutionWitness, tol: float = 1e-12) -> bool:
    """True when at no sample both branches are real and equal."""
    for (dr, di), (er, ei) in zip(witness.denominator_branch, witness.eq0_branch):
        both_real = abs(di) <= tol * (1.0 + abs(dr)) and abs(ei) <= tol * (1.0 + abs(er))
        if both_real and abs(dr - er) <= tol * (1.0 + abs(dr)) and abs(dr) > tol:
            return False
    return True


def mobius_orbit_check(
    F: FractionalLinearIntegral, matrix, m: MetricSpec, trajectories: list[Trajectory], q_min: float | None = None
) -> bool:
    """Whether (αP + βQ)/(γP + δQ) is conserved as well as P/Q on the same trajectories.

    Raises:
        SingularMatrixError: det(matrix) = 0.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if abs(np.linalg.det(matrix)) <= 1e-12 * max(float(np.max(np.abs(matrix))) ** 2, np.finfo(float).tiny):
        raise SingularMatrixError(f"Möbius matrix {matrix.tolist()} is singular")
    q_min = settings.q_min if q_min is None else q_min
    original = _max_drift(F, trajectories, q_min)
    transformed = _max_drift(F.mobius(matrix), trajectories, q_min)
    if original is None or transformed is None:
        raise VanishingDenominatorError("no trajectory has a usable segment for the Möbius comparison")
    passed = transformed <= MOBIUS_FACTOR * max(original, MOBIUS_FLOOR)
    logger.debug("Möbius check on '%s': drift %.3g -> %.3g (%s)", m.name, original, transformed, passed)
    return passed


# --------------------------------------------------------------------------- Bessel factorization


def psi_factor_check(m: MetricSpec, system: DerivedSystem | None = None, points: int = PSI_POINTS) -> PsiReport:
    """Divisibility of the specialized members by Ψ₁ = y²S²w + y(J₁⁴ − J₀⁴) + 2J₀³J₁ (S = J₀² + J₁²).

    The check is meaningful on the Bessel metric, whose cofactor root is the zero of Ψ₁.
    """
    system = system or derived_system()
    d = m.domain
    rng = np.random.default_rng(0)
    xs = rng.uniform(d.x_min, d.x_max, points)
    ys = rng.uniform(d.y_min, d.y_max, points)
    spec = SpecializedSystem(system, m, xs, ys)

    remainders: dict[str, list[float]] = {name: [] for name in EQ0_NAMES}
    at_root, ratios, psi2_degree = [], [], 0
    for index, y in enumerate(ys):
        J0, J1 = float(j0(y)), float(j1(y))
        s = J0**2 + J1**2
        psi1 = np.array([y**2 * s**2, y * (J1**4 - J0**4) + 2.0 * J0**3 * J1])
        members = spec.at(index)
        for name, coeffs in members.items():
            scaled = coeffs / np.max(np.abs(coeffs))
            _, remainder = np.polydiv(scaled, psi1 / psi1[0])
            remainders[name].append(float(np.max(np.abs(remainder))))

        eq0 = members["Eq0"]
        roots = real_roots(eq0)
        target = -psi1[1] / psi1[0]
        nearest = roots[np.argmin(np.abs(roots - target))] if roots.size else target
        at_root.append(float(relative_value(psi1, nearest)))

        psi2, _ = np.polydiv(eq0, psi1)
        psi2_degree = len(psi2) - 1
        ratios.append(float(psi2[0] / (25.0 * y**10 * s**10)))

    passed = max(remainders["Eq0"]) <= PSI_TOL and max(at_root) <= PSI_TOL
    logger.info("Ψ₁ factor check on '%s': %s", m.name, "passed" if passed else "failed")
    return PsiReport(
        points=[(float(x), float(y)) for x, y in zip(xs, ys)],
        remainders=remainders,
        psi1_at_root=at_root,
        psi2_degree=psi2_degree,
        psi2_leading_ratio=ratios,
        passed=passed,
    )

