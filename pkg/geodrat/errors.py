"""Exception hierarchy shared by the services, the CLI and the HTTP routers."""


class GeodratError(Exception):
    """Base class for every error raised by geodrat."""


class ExpressionSyntaxError(GeodratError, ValueError):
    """Malformed expression text; ``offset`` is the character position of the failure."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownFunctionError(GeodratError, ValueError):
    pass


class UnknownVariableError(GeodratError, ValueError):
    pass


class UnboundParameterError(GeodratError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unbound parameter"


class EvaluationDomainError(GeodratError, ArithmeticError):
    """Division by zero, log/sqrt of a nonpositive argument and similar."""


class DomainError(GeodratError, ValueError):
    """A point lies outside the metric domain."""


class MetricFormError(GeodratError, ValueError):
    """The metric does not have the form an operation requires."""


class MarchingBreakdownError(GeodratError, RuntimeError):
    """A marching solver could not continue; ``height`` is the last height reached."""

    def __init__(self, message: str, height: float) -> None:
        super().__init__(f"{message} (reached y={height:.6g})")
        self.height = height


class CharacteristicCollisionError(GeodratError, RuntimeError):
    """Characteristics crossed; ``locus`` is the (x, y) where ordering was lost."""

    def __init__(self, message: str, locus: tuple[float, float]) -> None:
        super().__init__(f"{message} near (x={locus[0]:.6g}, y={locus[1]:.6g})")
        self.locus = locus


class DegenerateCofactorError(GeodratError, ValueError):
    """The cofactor is closed (ρ ≈ 0) where a non-closed one is required."""


class InconsistentCofactorError(GeodratError, ValueError):
    """Relative Killing residuals exceed tolerance for the given cofactor."""


class DerivationMismatchError(GeodratError, RuntimeError):
    """The derived compatibility system does not reproduce its structural checksums."""


class StepUnderflowError(GeodratError, RuntimeError):
    pass


class VanishingDenominatorError(GeodratError, ArithmeticError):
    """The denominator Q of a fractional-linear integral vanishes where a value is needed."""


class SingularMatrixError(GeodratError, ValueError):
    pass


class ConfigError(GeodratError, ValueError):
    pass
