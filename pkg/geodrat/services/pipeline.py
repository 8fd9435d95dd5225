"""The commands shared by the command line and the HTTP API, each returning a report model."""

import logging
import math
from pathlib import Path
from typing import Literal

import numpy as np

from geodrat import __version__
from geodrat.config import settings
from geodrat.errors import ConfigError, VanishingDenominatorError
from geodrat.models.schemas import (
    ConservationReport,
    DeriveReport,
    GeodesicReport,
    GridSample,
    IntegralSpec,
    RkvReport,
    RunConfig,
    RunReport,
    TrajectoryDrift,
)
from geodrat.services.criterion import decide
from geodrat.services.derivation import derived_system, write_system
from geodrat.services.examples import BESSEL_COFACTOR, BESSEL_INTEGRAL, build_metric
from geodrat.services.expression import evaluate
from geodrat.services.fields import Cofactor, Field, sample
from geodrat.services.flow import (
    FractionalLinearIntegral,
    batch_integrate,
    conservation_report,
    implicit_midpoint,
    independence_check,
    initial_states,
    integrate,
    write_trajectory_csv,
)
from geodrat.services.geometry import MetricSpec
from geodrat.services.killing import max_residual, rkv_dimension, solve_rkv_given_cofactor
from geodrat.services.marching import characteristic_w, ck_march
from geodrat.services.parser import parse_expression

logger = logging.getLogger(__name__)

INDEPENDENCE_SAMPLES = 10
DERIVED_DUMP = "derived_system.txt"
RkvMode = Literal["ck", "characteristics", "given-cofactor"]


def _report(command: str, config: RunConfig | None, result) -> RunReport:
    return RunReport(version=__version__, command=command, config=config, result=result)


def analyze(config: RunConfig) -> RunReport:
    m = build_metric(config)
    report = decide(m, config.grid, config.tolerances, seed=config.seed)
    return _report("analyze", config, report)


def default_integral(config: RunConfig) -> IntegralSpec:
    """The integral checked when none is given: the known one of a registry example."""
    if config.example == "bessel":
        u, v, w, r = BESSEL_INTEGRAL
        return IntegralSpec(u=u, v=v, w=w, r=r)
    if config.example == "flat":
        return IntegralSpec(u="1", v="0", w="0", r="1")
    raise ConfigError("an integral (u, v, w, r) is required for this metric")


def verify(config: RunConfig, integral: IntegralSpec, csv_dir: Path | None = None) -> RunReport:
    """Conservation of F = (u·p + v·q)/(w·p + r·q) along a seeded batch of geodesics."""
    m = build_metric(config)
    tol = config.tolerances
    F = FractionalLinearIntegral.from_texts(integral.u, integral.v, integral.w, integral.r, m.params)
    trajectories = batch_integrate(m, config.trajectories, config.t_end, config.seed, energy_tol=tol.energy_tol)

    rows = []
    for index, traj in enumerate(trajectories):
        try:
            c = conservation_report(F, traj, tol.q_min)
            drift, segments = c.drift, c.segments
        except VanishingDenominatorError:
            logger.warning("Trajectory %d: Q vanishes along the whole trajectory", index)
            drift, segments = math.nan, 0
        start = traj.states[0]
        rows.append(
            TrajectoryDrift(
                index=index,
                initial=tuple(float(s) for s in start),
                t_final=float(traj.t[-1]),
                exited_domain=traj.exited,
                segments=segments,
                drift=drift,
                energy_drift=traj.energy_drift,
            )
        )
        if csv_dir is not None:
            write_trajectory_csv(traj, csv_dir / f"trajectory_{index:03d}.csv", F, tol.q_min)

    checks = []
    for traj in trajectories[:INDEPENDENCE_SAMPLES]:
        try:
            checks.append(independence_check(F, m, traj.state(0)))
        except VanishingDenominatorError:
            continue
    drifts = np.array([r.drift for r in rows if not math.isnan(r.drift)])
    result = ConservationReport(
        trajectories=rows,
        max_drift=float(drifts.max()) if drifts.size else math.nan,
        median_drift=float(np.median(drifts)) if drifts.size else math.nan,
        max_energy_drift=max(r.energy_drift for r in rows),
        independent=bool(checks) and all(checks),
        seed=config.seed,
    )
    if not result.independent:
        logger.warning("dF and dH are not independent at the sampled states")
    logger.info("Verified F on '%s': max drift %.3g over %d geodesics", m.name, result.max_drift, len(rows))
    return _report("verify", config, result)


def derive(out_dir: Path | None = None) -> RunReport:
    system = derived_system()
    dump_path = write_system(system, out_dir / DERIVED_DUMP) if out_dir is not None else None
    result = DeriveReport(
        degrees=system.degrees,
        pairing=system.pairing,
        checksums=[c.line() for c in system.checksums],
        consistent=system.consistent,
        dump_path=str(dump_path) if dump_path else None,
    )
    return _report("derive", None, result)


def _grid_sample(f: Field, xs: np.ndarray, ys: np.ndarray, m: MetricSpec) -> GridSample:
    g = sample(f, xs, ys, m.params)
    return GridSample(xs=xs.tolist(), ys=ys.tolist(), values=np.asarray(g.values).tolist())


def _row_values(text: str, xs: np.ndarray, y0: float, m: MetricSpec) -> np.ndarray:
    return np.broadcast_to(np.asarray(evaluate(parse_expression(text), xs, y0, m.params), dtype=float), xs.shape)


def rkv(
    config: RunConfig,
    mode: RkvMode,
    cofactor: tuple[str, str] | None = None,
    cauchy: tuple[float, float] = (1.0, 0.0),
    init: tuple[str, str, str] = ("1", "0", "0"),
    w0: str = "0",
) -> RunReport:
    """Relative Killing vectors by one of the three solvers, sampled on the run grid."""
    m = build_metric(config)
    nx, ny = config.grid
    xs, ys = m.domain.grid(nx, ny)
    y0 = m.domain.y_min
    dimension, error = None, None

    if mode == "given-cofactor":
        if cofactor is None:
            if config.example != "bessel":
                raise ConfigError("given-cofactor mode needs the cofactor (a, b)")
            cofactor = (BESSEL_COFACTOR, "0")
        cof = Cofactor.of(*cofactor)
        R = solve_rkv_given_cofactor(m, cof, m.domain.center, cauchy, grid=(xs, ys), tol=config.tolerances.residual_tol)
        dimension = rkv_dimension(m, cof, grid=(xs, ys), tol=config.tolerances.residual_tol)
        grid_x, grid_y = xs, ys
    elif mode == "ck":
        result = ck_march(m, xs, y0, tuple(_row_values(t, xs, y0, m) for t in init), u_min=config.tolerances.u_min)
        R, cof, error = result.covector, result.cofactor, result.error_estimate
        grid_x, grid_y = result.xs, result.ys
    elif mode == "characteristics":
        result = characteristic_w(m, xs, y0, _row_values(w0, xs, y0, m))
        R, cof = result.covector, result.cofactor
        grid_x, grid_y = result.xs, result.ys
    else:
        raise ConfigError(f"unknown mode '{mode}'")

    residual = max_residual(m, R, cof, grid_x, grid_y)
    out_x = np.linspace(grid_x[0], grid_x[-1], nx)
    out_y = np.linspace(grid_y[0], grid_y[-1], ny)
    result = RkvReport(
        mode=mode,
        u=_grid_sample(R.u, out_x, out_y, m),
        v=_grid_sample(R.v, out_x, out_y, m),
        a=_grid_sample(cof.a, out_x, out_y, m),
        b=_grid_sample(cof.b, out_x, out_y, m),
        max_residual=residual,
        error_estimate=error,
        dimension=dimension,
    )
    logger.info("rkv (%s) on '%s': max residual %.3g", mode, m.name, residual)
    return _report("rkv", config, result)


def geodesic(
    config: RunConfig,
    out_dir: Path,
    count: int = 1,
    method: Literal["dop853", "midpoint"] = "dop853",
    step: float = 1e-2,
    integral: IntegralSpec | None = None,
) -> RunReport:
    """Integrate ``count`` seeded geodesics and write one CSV per trajectory."""
    m = build_metric(config)
    tol = config.tolerances
    F = None
    if integral is not None:
        F = FractionalLinearIntegral.from_texts(integral.u, integral.v, integral.w, integral.r, m.params)
    paths, drifts = [], []
    for index, s0 in enumerate(initial_states(m, count, config.seed)):
        if method == "midpoint":
            traj = implicit_midpoint(m, s0, config.t_end, step)
        else:
            traj = integrate(m, s0, config.t_end, tol.energy_tol)
        drifts.append(traj.energy_drift)
        paths.append(str(write_trajectory_csv(traj, out_dir / f"geodesic_{index:03d}.csv", F, tol.q_min)))
    result = GeodesicReport(count=count, max_energy_drift=max(drifts), csv_paths=paths)
    return _report("geodesic", config, result)


def output_dir(config: RunConfig | None) -> Path:
    return Path(config.output_dir if config is not None else settings.output_dir)
