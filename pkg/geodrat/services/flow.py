"""Geodesic flow of H = ½e^{−2λ}(p² + q²) and conservation tests for F = P/Q."""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from geodrat.config import settings
from geodrat.errors import DomainError, StepUnderflowError, VanishingDenominatorError
from geodrat.services.expression import EvalContext, compile_expression
from geodrat.services.fields import CovectorField
from geodrat.services.geometry import Domain, MetricSpec, PhaseState

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 1001
START_RTOL = 1e-11
START_ATOL = 1e-13
MIN_RTOL = 1e-14
MAX_REFINEMENTS = 4
MIDPOINT_TOL = 1e-14
MIDPOINT_MAX_ITER = 50
INDEPENDENCE_TOL = 1e-8


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (n, 4): x, y, p, q
    energy: np.ndarray
    exited: bool
    energy_drift: float
    nfev: int = 0
    refinements: int = 0
    method: str = "DOP853"

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> PhaseState:
        return PhaseState.from_array(self.states[i])

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def p(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def q(self) -> np.ndarray:
        return self.states[:, 3]


class _Hamiltonian:
    """Compiled λ, λ_x, λ_y with the vector field and energy of the geodesic flow."""

    def __init__(self, m: MetricSpec) -> None:
        self.m = m
        self.lam = compile_expression(m.lam, m.params)
        self.lam_x = compile_expression(m.lambda_partial(1, 0), m.params)
        self.lam_y = compile_expression(m.lambda_partial(0, 1), m.params)

    def field(self, t, z):
        x, y, p, q = z
        scale = np.exp(-2.0 * self.lam(x, y))
        kinetic = scale * (p * p + q * q)
        return np.array([scale * p, scale * q, self.lam_x(x, y) * kinetic, self.lam_y(x, y) * kinetic])

    def energy(self, states: np.ndarray) -> np.ndarray:
        x, y, p, q = states.T
        return 0.5 * np.exp(-2.0 * self.lam(x, y)) * (p * p + q * q)

    def exit_event(self):
        d = self.m.domain

        def distance(t, z):
            return min(z[0] - d.x_min, d.x_max - z[0], z[1] - d.y_min, d.y_max - z[1])

        distance.terminal = True
        distance.direction = -1
        return distance


def _relative_drift(energy: np.ndarray) -> float:
    return float(np.max(np.abs(energy - energy[0])) / abs(energy[0])) if energy[0] else 0.0


def integrate(
    m: MetricSpec,
    s0: PhaseState,
    t_end: float,
    energy_tol: float | None = None,
    n_samples: int = DEFAULT_SAMPLES,
) -> Trajectory:
    """Integrate the geodesic flow with the adaptive 8th-order scheme and an energy monitor.

    When the relative drift of H exceeds ``energy_tol`` the run is repeated with tighter
    tolerances. The trajectory ends early (``exited``) if it reaches the domain boundary.

    Raises:
        DomainError: the initial position is outside the domain.
        StepUnderflowError: the integrator could not proceed.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if not m.domain.contains(s0.x, s0.y):
        raise DomainError(f"initial position ({s0.x}, {s0.y}) lies outside the domain of '{m.name}'")
    energy_tol = settings.energy_tol if energy_tol is None else energy_tol
    ham = _Hamiltonian(m)
    t_eval = np.linspace(0.0, t_end, n_samples)
    rtol, atol = START_RTOL, START_ATOL

    for refinement in range(MAX_REFINEMENTS + 1):
        sol = solve_ivp(
            ham.field, (0.0, t_end), s0.as_array(), method="DOP853", t_eval=t_eval,
            events=ham.exit_event(), rtol=rtol, atol=atol,
        )
        if sol.status == -1:
            raise StepUnderflowError(f"geodesic integration failed: {sol.message}")
        t, states = sol.t, sol.y.T
        exited = sol.status == 1
        if exited and sol.t_events[0].size and (t.size == 0 or sol.t_events[0][0] > t[-1]):
            t = np.append(t, sol.t_events[0][0])
            states = np.vstack([states, sol.y_events[0][0]])
        if t.size < 2:
            raise DomainError(f"trajectory from ({s0.x}, {s0.y}) leaves the domain immediately")
        energy = ham.energy(states)
        drift = _relative_drift(energy)
        if drift <= energy_tol or rtol <= MIN_RTOL:
            break
        logger.debug("Energy drift %.2e above %.0e; tightening rtol to %.0e", drift, energy_tol, rtol / 10)
        rtol, atol = rtol / 10.0, atol / 10.0
    else:
        refinement = MAX_REFINEMENTS
    if drift > energy_tol:
        logger.warning("Energy drift %.2e still above %.0e after %d refinements", drift, energy_tol, refinement)
    return Trajectory(t, states, energy, exited, drift, int(sol.nfev), refinement)


def implicit_midpoint(m: MetricSpec, s0: PhaseState, t_end: float, h: float) -> Trajectory:
    """Fixed-step implicit midpoint rule (symplectic), solved by fixed-point iteration."""
    if t_end <= 0 or h <= 0:
        raise ValueError("t_end and h must be positive")
    if not m.domain.contains(s0.x, s0.y):
        raise DomainError(f"initial position ({s0.x}, {s0.y}) lies outside the domain of '{m.name}'")
    ham = _Hamiltonian(m)
    n_steps = int(np.ceil(t_end / h))
    h = t_end / n_steps
    states = [s0.as_array()]
    exited = False
    for n in range(n_steps):
        z = states[-1]
        nxt = z + h * ham.field(0.0, z)
        for _ in range(MIDPOINT_MAX_ITER):
            new = z + h * ham.field(0.0, 0.5 * (z + nxt))
            converged = np.max(np.abs(new - nxt)) <= MIDPOINT_TOL * (1.0 + np.max(np.abs(new)))
            nxt = new
            if converged:
                break
        else:
            raise StepUnderflowError(f"implicit midpoint iteration did not converge at t={n * h:.6g}; reduce h")
        if not m.domain.contains(nxt[0], nxt[1]):
            exited = True
            break
        states.append(nxt)
    states = np.array(states)
    t = h * np.arange(len(states))
    energy = ham.energy(states)
    return Trajectory(t, states, energy, exited, _relative_drift(energy), method="implicit-midpoint")


def initial_states(m: MetricSpec, count: int, seed: int, domain: Domain | None = None) -> list[PhaseState]:
    """Random unit-speed states (H = ½) inside ``domain`` from a seeded generator."""
    domain = domain or m.domain
    rng = np.random.default_rng(seed)
    xs = rng.uniform(domain.x_min, domain.x_max, count)
    ys = rng.uniform(domain.y_min, domain.y_max, count)
    theta = rng.uniform(0.0, 2.0 * np.pi, count)
    scale = np.exp(m.lambda_values(xs, ys))
    return [
        PhaseState(float(x), float(y), float(s * np.cos(a)), float(s * np.sin(a)))
        for x, y, s, a in zip(xs, ys, np.broadcast_to(scale, xs.shape), theta)
    ]


def batch_integrate(
    m: MetricSpec,
    count: int,
    t_end: float,
    seed: int,
    domain: Domain | None = None,
    threads: int | None = None,
    energy_tol: float | None = None,
) -> list[Trajectory]:
    """Integrate ``count`` seeded trajectories in parallel; results keep the seed order."""
    states = initial_states(m, count, seed, domain)
    workers = max(1, min(threads or settings.threads, count))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        trajectories = list(pool.map(lambda s: integrate(m, s, t_end, energy_tol), states))
    logger.info(
        "Integrated %d geodesics on '%s' (t_end=%g, seed=%d, %d workers)", count, m.name, t_end, seed, workers
    )
    return trajectories


@dataclass(frozen=True)
class FractionalLinearIntegral:
    """F = P/Q with P, Q momentum-linear."""

    P: CovectorField
    Q: CovectorField
    ctx: EvalContext = EvalContext()

    @classmethod
    def from_texts(cls, u: str, v: str, w: str, r: str, ctx: EvalContext | None = None) -> "FractionalLinearIntegral":
        return cls(CovectorField.of(u, v), CovectorField.of(w, r), ctx or EvalContext())

    def parts(self, x, y, p, q):
        return self.P.value(x, y, p, q, self.ctx), self.Q.value(x, y, p, q, self.ctx)

    def along(self, traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
        num, den = self.parts(traj.x, traj.y, traj.p, traj.q)
        return np.broadcast_to(num, traj.t.shape), np.broadcast_to(den, traj.t.shape)

    def mobius(self, matrix) -> "FractionalLinearIntegral":
        """(αP + βQ) / (γP + δQ)."""
        (alpha, beta), (gamma, delta) = np.asarray(matrix, dtype=float)
        return FractionalLinearIntegral(
            self.P.combine(self.Q, alpha, beta, self.ctx), self.P.combine(self.Q, gamma, delta, self.ctx), self.ctx
        )


def _segments(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs [start, stop) of True with at least two samples."""
    runs, start = [], None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return [(a, b) for a, b in runs if b - a >= 2]


@dataclass(frozen=True)
class Conservation:
    drift: float
    segments: int


def conservation_report(F: FractionalLinearIntegral, traj: Trajectory, q_min: float | None = None) -> Conservation:
    """Max relative drift |F(t) − F(t₀)| / (1 + |F(t₀)|) over segments where |Q| ≥ q_min.

    Where Q is small the swapped chart Q/P is used on the segments where |P| ≥ q_min.

    Raises:
        VanishingDenominatorError: neither chart has a usable segment.
    """
    q_min = settings.q_min if q_min is None else q_min
    num, den = F.along(traj)
    drift, count = 0.0, 0
    for top, bottom in ((num, den), (den, num)):
        for a, b in _segments(np.abs(bottom) >= q_min):
            values = top[a:b] / bottom[a:b]
            drift = max(drift, float(np.max(np.abs(values - values[0])) / (1.0 + abs(values[0]))))
            count += 1
        if count and np.all(np.abs(den) >= q_min):
            break
    if count == 0:
        raise VanishingDenominatorError("the integral's denominator vanishes along the whole trajectory")
    return Conservation(drift, count)


def _differential(R: CovectorField, state: PhaseState, ctx: EvalContext) -> np.ndarray:
    x, y, p, q = state.x, state.y, state.p, state.q
    u, v = R.components(x, y, ctx)
    r_x = R.u.derivative(1, 0).at(x, y, ctx) * p + R.v.derivative(1, 0).at(x, y, ctx) * q
    r_y = R.u.derivative(0, 1).at(x, y, ctx) * p + R.v.derivative(0, 1).at(x, y, ctx) * q
    return np.array([r_x, r_y, u, v], dtype=float)


def independence_check(F: FractionalLinearIntegral, m: MetricSpec, state: PhaseState, tol: float = INDEPENDENCE_TOL) -> bool:
    """Whether dF and dH are linearly independent at ``state`` (normalized SVD test)."""
    m.require_inside(state.x, state.y)
    num, den = F.parts(state.x, state.y, state.p, state.q)
    if abs(den) < settings.q_min:
        raise VanishingDenominatorError(f"Q vanishes at ({state.x}, {state.y})")
    d_f = (_differential(F.P, state, F.ctx) * den - num * _differential(F.Q, state, F.ctx)) / den**2

    lam = m.lambda_values(state.x, state.y)
    lam_x, lam_y = m.lambda_values(state.x, state.y, 1, 0), m.lambda_values(state.x, state.y, 0, 1)
    scale = np.exp(-2.0 * lam)
    kinetic = scale * (state.p**2 + state.q**2)
    d_h = np.array([-lam_x * kinetic, -lam_y * kinetic, scale * state.p, scale * state.q])

    norms = np.linalg.norm(d_f), np.linalg.norm(d_h)
    if min(norms) == 0.0:
        return False
    singular = np.linalg.svd(np.vstack([d_f / norms[0], d_h / norms[1]]), compute_uv=False)
    return bool(singular[-1] >= tol)


def write_trajectory_csv(
    traj: Trajectory, path: Path, F: FractionalLinearIntegral | None = None, q_min: float | None = None
) -> Path:
    """Columns t, x, y, p, q, H, F (F empty where |Q| < q_min or when no integral is given)."""
    q_min = settings.q_min if q_min is None else q_min
    values = [""] * len(traj)
    if F is not None:
        num, den = F.along(traj)
        values = [f"{n / d:.17g}" if abs(d) >= q_min else "" for n, d in zip(num, den)]
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "x", "y", "p", "q", "H", "F"])
        for t, state, h, f in zip(traj.t, traj.states, traj.energy, values):
            writer.writerow([f"{t:.17g}", *(f"{c:.17g}" for c in state), f"{h:.17g}", f])
    return path
