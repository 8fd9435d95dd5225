"""Command line: ``geodrat analyze|verify|derive|rkv|geodesic|examples``.

Exit codes: 0 for a definite result, 2 for an inconclusive verdict, 1 for errors.
"""

import json
import logging
import tomllib
from enum import Enum
from pathlib import Path
from typing import Annotated

import typer
from pydantic import ValidationError

from geodrat.config import settings
from geodrat.errors import ConfigError, GeodratError
from geodrat.models.schemas import IntegralSpec, RunConfig, RunReport, Tolerances
from geodrat.services import pipeline
from geodrat.services.examples import EXAMPLES

logger = logging.getLogger(__name__)

app = typer.Typer(help="Fractional-linear integrals of geodesic flows on surfaces.", no_args_is_help=True)

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


class OutputFormat(str, Enum):
    json = "json"
    csv = "csv"


class RkvMode(str, Enum):
    ck = "ck"
    characteristics = "characteristics"
    given_cofactor = "given-cofactor"


class Method(str, Enum):
    dop853 = "dop853"
    midpoint = "midpoint"


ExampleOpt = Annotated[str | None, typer.Option("--example", help="Name of a built-in metric.")]
MetricOpt = Annotated[Path | None, typer.Option("--metric", help="TOML file describing the metric and run.")]
InlineOpt = Annotated[
    str | None,
    typer.Option(
        "--inline",
        help="Conformal factor e^{2λ} as an expression. Exponents are numeric literals (x^2, x^(1/2)); write exp(b*log(x)) for x^b.",
    ),
]
ParamOpt = Annotated[list[str] | None, typer.Option("--param", help="Parameter binding k=v (repeatable).")]
GridOpt = Annotated[str | None, typer.Option("--grid", help="Sampling grid NX,NY.")]
DomainOpt = Annotated[str | None, typer.Option("--domain", help="x_min,x_max,y_min,y_max.")]
AcceptOpt = Annotated[float | None, typer.Option("--tol-phi-accept")]
RejectOpt = Annotated[float | None, typer.Option("--tol-phi-reject")]
SeedOpt = Annotated[int | None, typer.Option("--seed")]
OutOpt = Annotated[Path | None, typer.Option("--out", help="Output directory.")]
FormatOpt = Annotated[OutputFormat, typer.Option("--format")]
VerboseOpt = Annotated[bool, typer.Option("--verbose", "-v")]


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _parse_params(items: list[str] | None) -> dict[str, float]:
    params = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ConfigError(f"expected k=v, got '{item}'")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"parameter '{name.strip()}' needs a numeric value, got '{value}'") from None
    return params


def _parse_numbers(text: str, count: int, what: str) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise ConfigError(f"{what} needs {count} comma-separated values, got '{text}'")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{what} must be numeric, got '{text}'") from None


def _read_metric_file(path: Path) -> dict:
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path} is not valid TOML: {exc}") from exc
    if "lambda" in data:
        data["lambda_text"] = data.pop("lambda")
    return data


def build_config(
    example: str | None,
    metric: Path | None,
    inline: str | None,
    params: list[str] | None,
    grid: str | None = None,
    domain: str | None = None,
    tol_phi_accept: float | None = None,
    tol_phi_reject: float | None = None,
    seed: int | None = None,
    out: Path | None = None,
    **extra,
) -> RunConfig:
    """Merge a metric file (if any) with command-line overrides and validate."""
    data = _read_metric_file(metric) if metric is not None else {}
    if example is not None:
        data["example"] = example
    if inline is not None:
        data["conformal_factor"] = inline
    data["params"] = {**data.get("params", {}), **_parse_params(params)}
    if grid is not None:
        data["grid"] = tuple(int(v) for v in _parse_numbers(grid, 2, "--grid"))
    if domain is not None:
        x_min, x_max, y_min, y_max = _parse_numbers(domain, 4, "--domain")
        data["domain"] = {"x_min": x_min, "x_max": x_max, "y_min": y_min, "y_max": y_max}
    tolerances = dict(data.get("tolerances", {}))
    if tol_phi_accept is not None:
        tolerances["phi_accept"] = tol_phi_accept
    if tol_phi_reject is not None:
        tolerances["phi_reject"] = tol_phi_reject
    data["tolerances"] = Tolerances(**{**Tolerances().model_dump(), **tolerances})
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["output_dir"] = str(out)
    data.update({k: v for k, v in extra.items() if v is not None})
    return RunConfig(**data)


def _emit(report: RunReport, out_dir: Path) -> None:
    """Write the report as deterministic JSON and echo it."""
    text = report.model_dump_json(indent=2)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{report.command}.json"
    path.write_text(text + "\n", encoding="utf-8")
    typer.echo(text)
    logger.info("Report written to %s", path)


def _run(action) -> int:
    """Run ``action`` and translate failures into exit code 1 with a one-line message."""
    try:
        return action()
    except (GeodratError, ValidationError) as exc:
        typer.echo(f"error: {exc}", err=True)
        return EXIT_ERROR
    except Exception as exc:
        logger.exception("Unexpected failure")
        typer.echo(f"error: {exc}", err=True)
        return EXIT_ERROR


@app.command()
def analyze(
    example: ExampleOpt = None,
    metric: MetricOpt = None,
    inline: InlineOpt = None,
    param: ParamOpt = None,
    grid: GridOpt = None,
    domain: DomainOpt = None,
    tol_phi_accept: AcceptOpt = None,
    tol_phi_reject: RejectOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
) -> None:
    """Decide whether the metric admits a fractional-linear integral."""
    _configure_logging(verbose)

    def action() -> int:
        config = build_config(example, metric, inline, param, grid, domain, tol_phi_accept, tol_phi_reject, seed, out)
        report = pipeline.analyze(config)
        _emit(report, pipeline.output_dir(config))
        return EXIT_INCONCLUSIVE if report.result.verdict == "inconclusive" else EXIT_OK

    raise typer.Exit(_run(action))


@app.command()
def verify(
    example: ExampleOpt = None,
    metric: MetricOpt = None,
    inline: InlineOpt = None,
    param: ParamOpt = None,
    domain: DomainOpt = None,
    u: Annotated[str | None, typer.Option("--u", help="p-coefficient of the numerator.")] = None,
    v: Annotated[str | None, typer.Option("--v", help="q-coefficient of the numerator.")] = None,
    w: Annotated[str | None, typer.Option("--w", help="p-coefficient of the denominator.")] = None,
    r: Annotated[str | None, typer.Option("--r", help="q-coefficient of the denominator.")] = None,
    trajectories: Annotated[int | None, typer.Option("--trajectories")] = None,
    t_end: Annotated[float | None, typer.Option("--t-end")] = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = OutputFormat.json,
    verbose: VerboseOpt = False,
) -> None:
    """Check conservation of F = (u·p + v·q)/(w·p + r·q) along random geodesics."""
    _configure_logging(verbose)

    def action() -> int:
        config = build_config(
            example, metric, inline, param, domain=domain, seed=seed, out=out, trajectories=trajectories, t_end=t_end
        )
        texts = (u, v, w, r)
        if all(t is None for t in texts):
            integral = pipeline.default_integral(config)
        elif any(t is None for t in texts):
            raise ConfigError("give all four of --u, --v, --w, --r")
        else:
            integral = IntegralSpec(u=u, v=v, w=w, r=r)
        out_dir = pipeline.output_dir(config)
        report = pipeline.verify(config, integral, out_dir / "verify" if fmt is OutputFormat.csv else None)
        _emit(report, out_dir)
        return EXIT_OK

    raise typer.Exit(_run(action))


@app.command()
def derive(out: OutOpt = None, verbose: VerboseOpt = False) -> None:
    """Derive the zero-order system and write it with its checksum block."""
    _configure_logging(verbose)

    def action() -> int:
        out_dir = out or Path(settings.output_dir)
        report = pipeline.derive(out_dir)
        _emit(report, out_dir)
        return EXIT_OK if report.result.consistent else EXIT_ERROR

    raise typer.Exit(_run(action))


@app.command()
def rkv(
    mode: Annotated[RkvMode, typer.Option("--mode")] = RkvMode.given_cofactor,
    example: ExampleOpt = None,
    metric: MetricOpt = None,
    inline: InlineOpt = None,
    param: ParamOpt = None,
    grid: GridOpt = None,
    domain: DomainOpt = None,
    a: Annotated[str | None, typer.Option("--a", help="Cofactor a (given-cofactor mode).")] = None,
    b: Annotated[str, typer.Option("--b", help="Cofactor b (given-cofactor mode).")] = "0",
    cauchy: Annotated[str, typer.Option("--cauchy", help="u0,v0 at the domain center.")] = "1,0",
    init: Annotated[str, typer.Option("--init", help="u;v;f on the bottom edge (ck mode).")] = "1;0;0",
    w0: Annotated[str, typer.Option("--w0", help="w on the bottom edge (characteristics mode).")] = "0",
    out: OutOpt = None,
    verbose: VerboseOpt = False,
) -> None:
    """Relative Killing vectors by marching, by characteristics, or for a given cofactor."""
    _configure_logging(verbose)

    def action() -> int:
        config = build_config(example, metric, inline, param, grid, domain, out=out)
        init_texts = tuple(t.strip() for t in init.split(";"))
        if len(init_texts) != 3:
            raise ConfigError(f"--init needs three ';'-separated expressions, got '{init}'")
        u0, v0 = _parse_numbers(cauchy, 2, "--cauchy")
        report = pipeline.rkv(config, mode.value, (a, b) if a is not None else None, (u0, v0), init_texts, w0)
        _emit(report, pipeline.output_dir(config))
        return EXIT_OK

    raise typer.Exit(_run(action))


@app.command()
def geodesic(
    example: ExampleOpt = None,
    metric: MetricOpt = None,
    inline: InlineOpt = None,
    param: ParamOpt = None,
    domain: DomainOpt = None,
    count: Annotated[int, typer.Option("--count")] = 1,
    t_end: Annotated[float | None, typer.Option("--t-end")] = None,
    method: Annotated[Method, typer.Option("--method")] = Method.dop853,
    step: Annotated[float, typer.Option("--step", help="Fixed step of the midpoint rule.")] = 1e-2,
    seed: SeedOpt = None,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
) -> None:
    """Integrate seeded geodesics and write plot-ready CSV."""
    _configure_logging(verbose)

    def action() -> int:
        config = build_config(example, metric, inline, param, domain=domain, seed=seed, out=out, t_end=t_end)
        integral = None
        if config.example in ("bessel", "flat"):
            integral = pipeline.default_integral(config)
        out_dir = pipeline.output_dir(config)
        report = pipeline.geodesic(config, out_dir, count, method.value, step, integral)
        _emit(report, out_dir)
        return EXIT_OK

    raise typer.Exit(_run(action))


@app.command("examples")
def list_examples(fmt: FormatOpt = OutputFormat.json) -> None:
    """List the built-in metrics with their expected verdicts."""
    entries = [entry.model_dump(exclude_none=True) for entry in EXAMPLES.values()]
    if fmt is OutputFormat.json:
        typer.echo(json.dumps(entries, indent=2, ensure_ascii=False))
        return
    for entry in EXAMPLES.values():
        factor = entry.conformal_factor or f"exp(2*({entry.lambda_text}))"
        typer.echo(f"{entry.name},{factor},{entry.expected_verdict},{entry.expected_moduli}")


if __name__ == "__main__":
    app()
