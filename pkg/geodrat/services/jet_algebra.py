"""Exact polynomial algebra over the jets of λ and w.

A :class:`JetPolynomial` is ``num · E^s · W^t`` where ``num`` lives in a sparse sympy
polynomial ring over ℚ whose generators are E = e^{2λ}, W = w, the w-jets ``W_i_j`` and
the λ-jets ``L_i_j`` (λ itself only enters through E). The integer shifts s, t allow
negative powers of E and W, which the formulas divide by freely.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cache

from sympy.polys.domains import QQ
from sympy.polys.polyerrors import ExactQuotientFailed
from sympy.polys.rings import PolyElement, PolyRing, ring

from geodrat.services.jets import MAX_JET_ORDER, multi_indices

logger = logging.getLogger(__name__)

MAX_W_ORDER = 3


def lambda_name(i: int, j: int) -> str:
    return f"L_{i}_{j}"


def w_name(i: int, j: int) -> str:
    return "W" if i == j == 0 else f"W_{i}_{j}"


@dataclass(frozen=True)
class JetAlgebra:
    ring: PolyRing
    names: tuple[str, ...]

    @classmethod
    def build(cls) -> JetAlgebra:
        names = ["E"]
        names += [w_name(i, j) for i, j in multi_indices(MAX_W_ORDER)]
        names += [lambda_name(i, j) for i, j in multi_indices(MAX_JET_ORDER) if i + j >= 1]
        poly_ring, *_ = ring(",".join(names), QQ)
        return cls(poly_ring, tuple(names))

    def index(self, name: str) -> int:
        return self.names.index(name)

    def gen(self, name: str) -> PolyElement:
        return self.ring.gens[self.index(name)]

    @property
    def e_index(self) -> int:
        return 0

    @property
    def w_index(self) -> int:
        return 1

    def total_derivative_of(self, name: str, direction: str) -> PolyElement:
        """D_x or D_y of a single generator (as a ring element)."""
        di, dj = (1, 0) if direction == "x" else (0, 1)
        if name == "E":
            return 2 * self.gen(lambda_name(di, dj)) * self.gen("E")
        kind, i, j = (name, 0, 0) if name == "W" else (name[0], *map(int, name.split("_")[1:]))
        i, j = i + di, j + dj
        if kind == "W":
            if i + j > MAX_W_ORDER:
                raise ValueError(f"w-jet order {i + j} exceeds {MAX_W_ORDER}")
            return self.gen(w_name(i, j))
        if i + j > MAX_JET_ORDER:
            raise ValueError(f"λ-jet order {i + j} exceeds {MAX_JET_ORDER}")
        return self.gen(lambda_name(i, j))


@cache
def algebra() -> JetAlgebra:
    return JetAlgebra.build()


def _shift_exponents(num: PolyElement, de: int, dw: int) -> PolyElement:
    """Multiply by E^de W^dw (de, dw may be negative when every term allows it)."""
    if de == 0 and dw == 0:
        return num
    alg = algebra()
    terms = {}
    for monom, coeff in num.terms():
        m = list(monom)
        m[alg.e_index] += de
        m[alg.w_index] += dw
        terms[tuple(m)] = coeff
    return alg.ring.from_dict(terms)


@dataclass(frozen=True, eq=False)
class JetPolynomial:
    num: PolyElement
    e_shift: int = 0
    w_shift: int = 0

    # -- construction

    @classmethod
    def make(cls, num: PolyElement, e_shift: int = 0, w_shift: int = 0) -> JetPolynomial:
        """Canonical form: E and W factors common to every term move into the shifts."""
        if not num:
            return cls(algebra().ring.zero, 0, 0)
        alg = algebra()
        monoms = [m for m, _ in num.terms()]
        ke = min(m[alg.e_index] for m in monoms)
        kw = min(m[alg.w_index] for m in monoms)
        return cls(_shift_exponents(num, -ke, -kw), e_shift + ke, w_shift + kw)

    @classmethod
    def constant(cls, value: int | Fraction) -> JetPolynomial:
        value = Fraction(value)
        return cls.make(algebra().ring(QQ(value.numerator, value.denominator)))

    @classmethod
    def generator(cls, name: str, power: int = 1) -> JetPolynomial:
        alg = algebra()
        if name == "E":
            return cls(alg.ring.one, power, 0)
        if name == "W":
            return cls(alg.ring.one, 0, power)
        if power < 0:
            raise ValueError(f"negative powers are only allowed for E and W, not {name}")
        return cls(alg.gen(name) ** power)

    # -- arithmetic

    @property
    def is_zero(self) -> bool:
        return not self.num

    def __add__(self, other: JetPolynomial | int | Fraction) -> JetPolynomial:
        other = _coerce(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        e, w = min(self.e_shift, other.e_shift), min(self.w_shift, other.w_shift)
        a = _shift_exponents(self.num, self.e_shift - e, self.w_shift - w)
        b = _shift_exponents(other.num, other.e_shift - e, other.w_shift - w)
        return JetPolynomial.make(a + b, e, w)

    __radd__ = __add__

    def __neg__(self) -> JetPolynomial:
        return JetPolynomial(-self.num, self.e_shift, self.w_shift)

    def __sub__(self, other: JetPolynomial | int | Fraction) -> JetPolynomial:
        return self + (-_coerce(other))

    def __rsub__(self, other: JetPolynomial | int | Fraction) -> JetPolynomial:
        return _coerce(other) - self

    def __mul__(self, other: JetPolynomial | int | Fraction) -> JetPolynomial:
        other = _coerce(other)
        return JetPolynomial.make(self.num * other.num, self.e_shift + other.e_shift, self.w_shift + other.w_shift)

    __rmul__ = __mul__

    def __truediv__(self, other: int | Fraction) -> JetPolynomial:
        if isinstance(other, JetPolynomial):
            raise TypeError("use exquo() for division by a jet polynomial")
        return self * (1 / Fraction(other))

    def __pow__(self, power: int) -> JetPolynomial:
        if power < 0:
            raise ValueError("negative powers are only allowed for E and W shifts")
        return JetPolynomial.make(self.num**power, self.e_shift * power, self.w_shift * power)

    def exquo(self, other: JetPolynomial) -> JetPolynomial | None:
        """Exact quotient, or None when ``other`` does not divide ``self``."""
        try:
            quotient = self.num.exquo(other.num)
        except ExactQuotientFailed:
            return None
        return JetPolynomial.make(quotient, self.e_shift - other.e_shift, self.w_shift - other.w_shift)

    # -- calculus

    def total_derivative(self, direction: str) -> JetPolynomial:
        """D_x or D_y; E' = 2λ_x E and the W-jets and λ-jets climb one order."""
        alg = algebra()
        d_num = alg.ring.zero
        for k, name in enumerate(alg.names):
            if self.num.degree(alg.ring.gens[k]) <= 0:
                continue
            d_num += self.num.diff(alg.ring.gens[k]) * alg.total_derivative_of(name, direction)
        lam1 = alg.gen(lambda_name(1, 0) if direction == "x" else lambda_name(0, 1))
        w1 = alg.gen(w_name(1, 0) if direction == "x" else w_name(0, 1))
        W = alg.gen("W")
        combined = (d_num + 2 * self.e_shift * lam1 * self.num) * W + self.w_shift * self.num * w1
        return JetPolynomial.make(combined, self.e_shift, self.w_shift - 1)

    def substitute(self, name: str, value: JetPolynomial) -> JetPolynomial:
        """Replace generator ``name`` (not E, not W) by ``value``."""
        alg = algebra()
        k = alg.index(name)
        if k in (alg.e_index, alg.w_index):
            raise ValueError("E and W cannot be substituted")
        by_power: dict[int, dict] = {}
        for monom, coeff in self.num.terms():
            m = list(monom)
            power, m[k] = m[k], 0
            by_power.setdefault(power, {})[tuple(m)] = coeff
        result = JetPolynomial.constant(0)
        for power, terms in by_power.items():
            part = JetPolynomial.make(alg.ring.from_dict(terms))
            result = result + part * value**power
        return JetPolynomial.make(result.num, result.e_shift + self.e_shift, result.w_shift + self.w_shift)

    def substitute_rational(self, names: tuple[str, ...], numerators: tuple[JetPolynomial, ...], den: JetPolynomial) -> JetPolynomial:
        """den^d · self with each generator in ``names`` replaced by numerator/den (d = total degree in them)."""
        alg = algebra()
        idx = [alg.index(n) for n in names]
        grouped: dict[tuple[int, ...], dict] = {}
        for monom, coeff in self.num.terms():
            m = list(monom)
            powers = tuple(m[k] for k in idx)
            for k in idx:
                m[k] = 0
            grouped.setdefault(powers, {})[tuple(m)] = coeff
        degree = max((sum(p) for p in grouped), default=0)
        result = JetPolynomial.constant(0)
        for powers, terms in grouped.items():
            part = JetPolynomial.make(alg.ring.from_dict(terms))
            for numerator, p in zip(numerators, powers):
                part = part * numerator**p
            result = result + part * den ** (degree - sum(powers))
        return JetPolynomial.make(result.num, result.e_shift + self.e_shift, result.w_shift + self.w_shift)

    # -- inspection

    def degree_in(self, *names: str) -> int:
        """Total degree in the given generators (W includes its shift)."""
        if self.is_zero:
            return -1
        alg = algebra()
        idx = [alg.index(n) for n in names]
        shift = self.w_shift if "W" in names else 0
        return max(sum(m[k] for k in idx) for m, _ in self.num.terms()) + shift

    def w_coefficients(self) -> dict[int, JetPolynomial]:
        """Coefficients of the powers of W (W-free jet polynomials)."""
        alg = algebra()
        grouped: dict[int, dict] = {}
        for monom, coeff in self.num.terms():
            m = list(monom)
            power, m[alg.w_index] = m[alg.w_index] + self.w_shift, 0
            grouped.setdefault(power, {})[tuple(m)] = coeff
        return {p: JetPolynomial.make(alg.ring.from_dict(t), self.e_shift) for p, t in grouped.items()}

    def w_exponents(self) -> set[int]:
        return set(self.w_coefficients())

    def depends_on(self, name: str) -> bool:
        return self.num.degree(algebra().gen(name)) > 0

    def equals(self, other: JetPolynomial) -> bool:
        return (self - other).is_zero

    def term_lines(self) -> list[str]:
        """One line per term: coefficient, E power, then generator^exponent factors."""
        alg = algebra()
        lines = []
        for monom, coeff in sorted(self.num.terms(), reverse=True):
            factors = [f"{alg.names[k]}^{e}" for k, e in enumerate(monom) if e and k not in (alg.e_index, alg.w_index)]
            e_power = monom[alg.e_index] + self.e_shift
            w_power = monom[alg.w_index] + self.w_shift
            lines.append(" ".join([str(coeff), f"E^{e_power}", f"W^{w_power}", *factors]))
        return lines

    @classmethod
    def from_term_lines(cls, lines: list[str]) -> JetPolynomial:
        alg = algebra()
        result = cls.constant(0)
        for line in lines:
            coeff, *factors = line.split()
            term = cls.constant(Fraction(coeff))
            for factor in factors:
                name, power = factor.rsplit("^", 1)
                term = term * cls.generator(name, int(power))
            result = result + term
        return result

    def __str__(self) -> str:
        return " + ".join(self.term_lines()) or "0"


def _coerce(value: JetPolynomial | int | Fraction) -> JetPolynomial:
    if isinstance(value, JetPolynomial):
        return value
    return JetPolynomial.constant(value)


def lam(i: int, j: int) -> JetPolynomial:
    return JetPolynomial.generator(lambda_name(i, j))


def wjet(i: int, j: int) -> JetPolynomial:
    return JetPolynomial.generator(w_name(i, j))


def E(power: int = 1) -> JetPolynomial:
    return JetPolynomial.generator("E", power)


def W(power: int = 1) -> JetPolynomial:
    return JetPolynomial.generator("W", power)


def curvature_jet(i: int = 0, j: int = 0) -> JetPolynomial:
    """∂^{i+j} k / ∂x^i ∂y^j with k = −E^{-1}(λ_xx + λ_yy)."""
    k = -(E(-1) * (lam(2, 0) + lam(0, 2)))
    for _ in range(i):
        k = k.total_derivative("x")
    for _ in range(j):
        k = k.total_derivative("y")
    return k
