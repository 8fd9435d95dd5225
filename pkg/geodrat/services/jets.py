"""Numeric jets: every partial derivative of a field up to a fixed order at a point."""

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from geodrat.services.expression import EvalContext, Expression, evaluate, partial_derivative

MAX_JET_ORDER = 8


def multi_indices(order: int) -> Iterator[tuple[int, int]]:
    """All (i, j) with i + j <= order, graded by total order."""
    for total in range(order + 1):
        for j in range(total + 1):
            yield total - j, j


@dataclass(frozen=True)
class Jet:
    """Partials ∂^{i+j} f / ∂x^i ∂y^j at a point (or a grid of points, elementwise)."""

    point: tuple[float, float] | tuple[np.ndarray, np.ndarray]
    order: int
    partials: dict[tuple[int, int], float | np.ndarray]

    def __getitem__(self, index: tuple[int, int]) -> float | np.ndarray:
        return self.partials[index]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot truncate an order-{self.order} jet to order {order}")
        kept = {idx: self.partials[idx] for idx in multi_indices(order)}
        return Jet(self.point, order, kept)


def jet_of(e: Expression, x, y, order: int, ctx: EvalContext | None = None) -> Jet:
    """Jet of ``e`` at (x, y) up to ``order``; x, y may be arrays (evaluated elementwise).

    Derivative trees are memoized per (expression, multi-index), so repeated calls
    on the same expression only pay for evaluation.
    """
    if not 0 <= order <= MAX_JET_ORDER:
        raise ValueError(f"jet order must lie in [0, {MAX_JET_ORDER}], got {order}")
    partials = {
        idx: evaluate(partial_derivative(e, *idx), x, y, ctx) for idx in multi_indices(order)
    }
    return Jet((x, y), order, partials)
