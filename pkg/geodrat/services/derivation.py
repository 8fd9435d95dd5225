"""Automated prolongation of the cofactor equations down to zero order in w.

Gauge b = 0, a_y = w. The second-order system (w_xx, w_xy, w_yy) and the first-order
relation are entered literally; everything after that is computed: the compatibility
conditions, the solved first-order system w_x = N₁/D, w_y = N₂/D, and the four
polynomials in w that a cofactor root must satisfy at every point.
"""

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from pathlib import Path

from geodrat.errors import DerivationMismatchError
from geodrat.services.jet_algebra import (
    E,
    JetPolynomial,
    W,
    algebra,
    curvature_jet,
    lam,
    w_name,
    wjet,
)

logger = logging.getLogger(__name__)

FIRST_ORDER = (w_name(1, 0), w_name(0, 1))
SECOND_ORDER = (w_name(2, 0), w_name(1, 1), w_name(0, 2))
EQ0_NAMES = ("Eq0'", "Eq0''", "Eq0'''", "Eq0")
EXPECTED_DEGREES = (6, 7, 8, 10)
EQ0_LEADING = 5400
DUMP_HEADER = "# geodrat derived system"


@dataclass(frozen=True)
class SecondOrderSystem:
    w_xx: JetPolynomial
    w_xy: JetPolynomial
    w_yy: JetPolynomial
    eq1: JetPolynomial

    def reduce(self, p: JetPolynomial) -> JetPolynomial:
        """Eliminate second-order w-jets."""
        for name, value in zip(SECOND_ORDER, (self.w_xx, self.w_xy, self.w_yy)):
            if p.depends_on(name):
                p = p.substitute(name, value)
        return p


@dataclass(frozen=True)
class Checksum:
    label: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{self.label}: {'ok' if self.passed else 'MISMATCH'}{' (' + self.detail + ')' if self.detail else ''}"


@dataclass(frozen=True)
class DerivedSystem:
    eq2: SecondOrderSystem
    den: JetPolynomial
    n1: JetPolynomial
    n2: JetPolynomial
    eq0: dict[str, JetPolynomial]
    pairing: tuple[str, str] = ("", "")
    checksums: list[Checksum] = field(default_factory=list)

    @property
    def degrees(self) -> dict[str, int]:
        return {name: p.degree_in("W") for name, p in self.eq0.items()}

    @property
    def consistent(self) -> bool:
        return all(c.passed for c in self.checksums)

    def reduce_x(self, p: JetPolynomial) -> JetPolynomial:
        return _reduced_derivative(p, "x", self.n1, self.den)

    def reduce_y(self, p: JetPolynomial) -> JetPolynomial:
        return _reduced_derivative(p, "y", self.n2, self.den)


def _F(n: int, d: int = 1) -> Fraction:
    return Fraction(n, d)


def build_EQ2() -> SecondOrderSystem:
    """The second-order system for w and the first-order relation accompanying it."""
    k = curvature_jet()
    kx, ky = curvature_jet(1, 0), curvature_jet(0, 1)
    kxx, kxy, kyy = curvature_jet(2, 0), curvature_jet(1, 1), curvature_jet(0, 2)
    lx, ly = lam(1, 0), lam(0, 1)
    lxx, lxy = lam(2, 0), lam(1, 1)
    w, wx, wy, winv = W(), wjet(1, 0), wjet(0, 1), W(-1)

    w_xx = (
        (3 * k * w - _F(7, 3) * lx * ky + ly * kx - kxy + _F(5, 3) * ky * wx * winv) * E()
        + ky * ky * winv * E(2) / 3
        + (2 * ly * ly - _F(2, 3) * lx * lx + 2 * lxx) * w
        - lx * wx / 3
        - ly * wy
        + _F(4, 3) * wx * wx * winv
    )
    w_xy = (
        ((4 * ky * wy - kx * wx) * winv / 3 - lx * kx / 3 - _F(5, 3) * ly * ky - kyy) * E()
        - kx * ky * winv * E(2) / 3
        - 3 * w**2
        + (2 * lxy - _F(8, 3) * lx * ly) * w
        + (lx * wy + ly * wx) / 3
        + _F(4, 3) * wx * wy * winv
    )
    w_yy = (
        (k * w - lx * ky + _F(7, 3) * ly * kx + kxy - _F(5, 3) * kx * wy * winv) * E()
        + kx * kx * winv * E(2) / 3
        + (2 * lx * lx - _F(2, 3) * ly * ly - 2 * lxx) * w
        - lx * wx
        - ly * wy / 3
        + _F(4, 3) * wy * wy * winv
    )
    # Δk enters whole; the mirror symmetry (x ↔ y, w ↦ −w) of the system requires it.
    eq1 = (kx * wx + ky * wy) * winv - 2 * lx * kx - 2 * ly * ky - kxx - kyy - 6 * w**2 * E(-1)
    return SecondOrderSystem(w_xx, w_xy, w_yy, eq1)


def _cleared(p: JetPolynomial) -> JetPolynomial:
    """Drop the monomial factor E^s W^t (nonvanishing, irrelevant for zero sets)."""
    return JetPolynomial(p.num)


def _linear_parts(p: JetPolynomial) -> tuple[JetPolynomial, JetPolynomial, JetPolynomial]:
    alg = algebra()
    alpha = JetPolynomial.make(p.num.diff(alg.gen(FIRST_ORDER[0])), p.e_shift, p.w_shift)
    beta = JetPolynomial.make(p.num.diff(alg.gen(FIRST_ORDER[1])), p.e_shift, p.w_shift)
    zero = JetPolynomial.constant(0)
    gamma = p.substitute(FIRST_ORDER[0], zero).substitute(FIRST_ORDER[1], zero)
    return alpha, beta, gamma


def _reduced_derivative(p: JetPolynomial, direction: str, numerator: JetPolynomial, den: JetPolynomial) -> JetPolynomial:
    """den · D p with the first-order w-jet replaced by numerator/den (p free of w-jets)."""
    name = FIRST_ORDER[0] if direction == "x" else FIRST_ORDER[1]
    d = p.total_derivative(direction)
    alg = algebra()
    slope = JetPolynomial.make(d.num.diff(alg.gen(name)), d.e_shift, d.w_shift)
    rest = d.substitute(name, JetPolynomial.constant(0))
    return den * rest + slope * numerator


def _divide_out(p: JetPolynomial, factor: JetPolynomial) -> JetPolynomial:
    if factor.num.is_ground:
        return p
    while True:
        q = p.exquo(factor)
        if q is None:
            return p
        p = _cleared(q)


def _normalize_denominator(den, n1, n2):
    """Cancel common factors and scale so the w² coefficient of the denominator is 30·k_x."""
    shift = JetPolynomial(algebra().ring.one, -den.e_shift, -den.w_shift)
    den, n1, n2 = den * shift, n1 * shift, n2 * shift
    common = den.num.gcd(n1.num).gcd(n2.num)
    if not common.is_ground:
        den, n1, n2 = (JetPolynomial.make(p.num.exquo(common), p.e_shift, p.w_shift) for p in (den, n1, n2))

    leading = den.w_coefficients().get(2)
    ratio = leading.exquo(curvature_jet(1, 0)) if leading is not None else None
    if ratio is None or not ratio.num.is_ground:
        logger.debug("First-order denominator is not of the form c·k_x·w² + ...; left unscaled")
        return den, n1, n2
    c = Fraction(str(ratio.num.LC))
    scale = JetPolynomial.constant(Fraction(30) / c) * E(-ratio.e_shift) * W(-ratio.w_shift)
    return den * scale, n1 * scale, n2 * scale


def _scale_leading(p: JetPolynomial, target: int) -> JetPolynomial:
    degree = p.degree_in("W")
    leading = p.w_coefficients()[degree]
    if not leading.num.is_ground:
        return p
    c = Fraction(str(leading.num.LC))
    return p * JetPolynomial.constant(Fraction(target) / c) * E(-leading.e_shift)


def _coefficients_in(p: JetPolynomial, name: str) -> dict[int, JetPolynomial]:
    """Coefficients of the powers of generator ``name`` (not E, not W)."""
    alg = algebra()
    k = alg.index(name)
    grouped: dict[int, dict] = {}
    for monom, coeff in p.num.terms():
        m = list(monom)
        power, m[k] = m[k], 0
        grouped.setdefault(power, {})[tuple(m)] = coeff
    return {power: JetPolynomial.make(alg.ring.from_dict(t), p.e_shift, p.w_shift) for power, t in grouped.items()}


def _cancel_top(p: JetPolynomial, q: JetPolynomial, name: str) -> JetPolynomial:
    """lc(q)·p − lc(p)·x^(deg p − deg q)·q for x = ``name``, leading coefficients made coprime first."""
    dp, dq = p.degree_in(name), q.degree_in(name)
    lp, lq = _coefficients_in(p, name)[dp], _coefficients_in(q, name)[dq]
    common = lp.num.gcd(lq.num)
    if not common.is_ground:
        lp = JetPolynomial.make(lp.num.exquo(common), lp.e_shift, lp.w_shift)
        lq = JetPolynomial.make(lq.num.exquo(common), lq.e_shift, lq.w_shift)
    return _cleared(lq * p - lp * JetPolynomial.generator(name, dp - dq) * q)


def _remainder_chain(p: JetPolynomial, q: JetPolynomial, name: str) -> JetPolynomial | None:
    """Euclid in ``name`` down to a relation of degree at most one; None when p and q share a factor."""
    if p.degree_in(name) < q.degree_in(name):
        p, q = q, p
    while q.degree_in(name) > 1:
        r = p
        while not r.is_zero and r.degree_in(name) >= q.degree_in(name):
            r = _cancel_top(r, q, name)
        if r.is_zero:
            return None
        p, q = q, r
    return q


def _modulo_eq1(
    eq1: JetPolynomial, equations: dict[str, JetPolynomial], keep: str
) -> tuple[dict[str, JetPolynomial], list[JetPolynomial]]:
    """Eliminate the other first-order jet through Eq1, then reduce the equations to relations linear in ``keep``.

    Returns the linear relations by name and the zero-order residues met on the way.
    """
    drop = FIRST_ORDER[1] if keep == FIRST_ORDER[0] else FIRST_ORDER[0]
    a, b, g = _linear_parts(eq1)
    pivot, other = (b, a) if drop == FIRST_ORDER[1] else (a, b)
    value = -(other * JetPolynomial.generator(keep) + g)
    linear: dict[str, JetPolynomial] = {}
    residues: list[JetPolynomial] = []
    higher: dict[str, JetPolynomial] = {}
    for name, p in equations.items():
        q = _divide_out(_cleared(p.substitute_rational((drop,), (value,), pivot)), pivot)
        if q.is_zero:
            continue
        degree = q.degree_in(keep)
        logger.debug("%s modulo Eq1: degree %d in %s", name, degree, keep)
        if degree == 0:
            residues.append(q)
        elif degree == 1:
            linear[f"{name} mod Eq1 ({keep})"] = q
        else:
            higher[name] = q
    for (name1, p1), (name2, p2) in combinations(higher.items(), 2):
        r = _remainder_chain(p1, p2, keep)
        if r is None:
            continue
        if r.degree_in(keep) == 0:
            residues.append(r)
        else:
            linear[f"{name1} & {name2} ({keep})"] = r
    return linear, residues


def derive_EQ1_EQ0(eq2: SecondOrderSystem | None = None, strict: bool = True) -> DerivedSystem:
    """Run the compatibility analysis and return the solved first-order system and the zero-order set.

    Raises:
        DerivationMismatchError: when ``strict`` and a structural checksum fails.
    """
    started = time.perf_counter()
    eq2 = eq2 or build_EQ2()
    equations = {
        "Eq1": _cleared(eq2.eq1),
        "C_xx_xy": _cleared(eq2.reduce(eq2.w_xx.total_derivative("y") - eq2.w_xy.total_derivative("x"))),
        "C_xy_yy": _cleared(eq2.reduce(eq2.w_xy.total_derivative("y") - eq2.w_yy.total_derivative("x"))),
        "D_x Eq1": _cleared(eq2.reduce(eq2.eq1.total_derivative("x"))),
        "D_y Eq1": _cleared(eq2.reduce(eq2.eq1.total_derivative("y"))),
    }
    equations = {name: p for name, p in equations.items() if not p.is_zero}
    for name, p in equations.items():
        logger.debug("%s: degree %d in (w_x, w_y), %d terms", name, p.degree_in(*FIRST_ORDER), len(p.num))

    # Only Eq1 is linear in (w_x, w_y); the prolonged equations are reduced modulo Eq1 to one
    # unknown each and combined until a relation linear in that unknown is left.
    eq1 = equations["Eq1"]
    prolonged = {name: p for name, p in equations.items() if name != "Eq1"}
    linear = {"Eq1": eq1}
    residues: list[JetPolynomial] = []
    for keep in FIRST_ORDER:
        found, rest = _modulo_eq1(eq1, prolonged, keep)
        linear.update(found)
        residues.extend(rest)

    best = None
    for (name1, p1), (name2, p2) in combinations(linear.items(), 2):
        a1, b1, g1 = _linear_parts(p1)
        a2, b2, g2 = _linear_parts(p2)
        den = a1 * b2 - a2 * b1
        if den.is_zero:
            continue
        den, n1, n2 = _normalize_denominator(den, g2 * b1 - g1 * b2, g1 * a2 - g2 * a1)
        exponents = den.w_exponents()
        rank = (exponents != {0, 2}, max(exponents) - min(exponents), len(den.num) + len(n1.num) + len(n2.num))
        if best is None or rank < best[0]:
            best = (rank, (name1, name2), den, n1, n2)
    if best is None:
        raise DerivationMismatchError("no pair of first-order relations can be solved for (w_x, w_y)")
    _, pairing, den, n1, n2 = best
    logger.info("Solved (w_x, w_y) from %s and %s", *pairing)

    zero_order = []
    candidates = {**equations, **{name: p for name, p in linear.items() if name not in equations}}
    candidates.update({f"residue {i}": r for i, r in enumerate(residues)})
    for name, p in candidates.items():
        if name in pairing:
            continue
        z = _cleared(p.substitute_rational(FIRST_ORDER, (n1, n2), den))
        z = _divide_out(z, den)
        if z.degree_in("W") < 1:
            logger.debug("%s reduces to a w-free relation; skipped", name)
            continue
        zero_order.append(z)
    if not zero_order:
        raise DerivationMismatchError("the first-order system leaves no zero-order relation")
    eq0 = _scale_leading(min(zero_order, key=lambda z: (z.degree_in("W"), len(z.num))), EQ0_LEADING)

    # den³·(D_y(N₁/den) − D_x(N₂/den)) with the first-order jets eliminated
    cross = (
        den * _reduced_derivative(n1, "y", n2, den)
        - n1 * _reduced_derivative(den, "y", n2, den)
        - den * _reduced_derivative(n2, "x", n1, den)
        + n2 * _reduced_derivative(den, "x", n1, den)
    )
    eq0_prime = _divide_out(_cleared(cross), den)
    members = {
        "Eq0'": eq0_prime,
        "Eq0''": _cleared(_reduced_derivative(eq0, "x", n1, den)),
        "Eq0'''": _cleared(_reduced_derivative(eq0, "y", n2, den)),
        "Eq0": eq0,
    }
    system = DerivedSystem(eq2, den, n1, n2, members, pairing)
    checksums = structural_checksums(system)
    system = DerivedSystem(eq2, den, n1, n2, members, pairing, checksums)
    logger.info(
        "Derived system in %.1fs: degrees %s", time.perf_counter() - started, system.degrees
    )
    failed = [c for c in checksums if not c.passed]
    if failed:
        message = "; ".join(c.line() for c in failed)
        if strict:
            raise DerivationMismatchError(message)
        logger.warning("Derived system deviates from the expected shape: %s", message)
    return system


def structural_checksums(system: DerivedSystem) -> list[Checksum]:
    kx, ky, kxy = curvature_jet(1, 0), curvature_jet(0, 1), curvature_jet(1, 1)
    lx, ly = lam(1, 0), lam(0, 1)
    eq0 = system.eq0["Eq0"]
    eq0_coeffs = eq0.w_coefficients()
    den_coeffs = system.den.w_coefficients()
    n1_coeffs = system.n1.w_coefficients()
    n2_coeffs = system.n2.w_coefficients()
    zero = JetPolynomial.constant(0)

    leading_ok = eq0.degree_in("W") == 6 and eq0_coeffs[6].equals(JetPolynomial.constant(EQ0_LEADING))
    gaps_ok = all(p not in eq0_coeffs for p in (5, 4, 3))
    den_ok = set(den_coeffs) == {0, 2} and den_coeffs[2].equals(30 * kx)
    n1_ok = system.n1.degree_in("W") == 5 and n1_coeffs[5].equals(180 * E(-1)) and n1_coeffs.get(4, zero).is_zero
    n2_expected = 18 * kxy - 18 * lx * ky + 42 * ly * kx
    n2_ok = system.n2.degree_in("W") == 3 and n2_coeffs[3].equals(n2_expected)
    degrees = sorted(system.degrees.values())
    return [
        Checksum(f"Eq0: degree 6, leading {EQ0_LEADING}", leading_ok, f"degree {eq0.degree_in('W')}"),
        Checksum("Eq0: w^5, w^4, w^3 absent", gaps_ok),
        Checksum("EQ1 denominator: 30*k_x*w^2 + ...", den_ok, f"w-exponents {sorted(den_coeffs)}"),
        Checksum("w_x numerator leading: 180*E^-1*w^5", n1_ok, f"degree {system.n1.degree_in('W')}"),
        Checksum("w_y numerator leading: (18*k_xy - 18*l_x*k_y + 42*l_y*k_x)*w^3", n2_ok),
        Checksum(
            "EQ0 degrees: {10, 8, 7, 6}",
            degrees == list(EXPECTED_DEGREES),
            ", ".join(f"{name}={d}" for name, d in system.degrees.items()),
        ),
    ]


@lru_cache(maxsize=1)
def derived_system() -> DerivedSystem:
    """The derived system, computed once per process."""
    return derive_EQ1_EQ0(strict=False)


# --------------------------------------------------------------------------- text dumps


def dump_system(system: DerivedSystem) -> str:
    """Plain-text dump: one term per line per section, followed by the checksum block."""
    sections = {
        "w_xx": system.eq2.w_xx,
        "w_xy": system.eq2.w_xy,
        "w_yy": system.eq2.w_yy,
        "Eq1": system.eq2.eq1,
        "EQ1 denominator": system.den,
        "w_x numerator": system.n1,
        "w_y numerator": system.n2,
        **system.eq0,
    }
    lines = [DUMP_HEADER, f"# pairing: {system.pairing[0]} | {system.pairing[1]}"]
    for name, p in sections.items():
        lines.append(f"[{name}]")
        lines.extend(p.term_lines())
    lines.append("# checksums")
    lines.extend(f"# {c.line()}" for c in system.checksums)
    return "\n".join(lines) + "\n"


def write_system(system: DerivedSystem, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_system(system), encoding="utf-8")
    logger.info("Wrote derived system to %s", path)
    return path


def load_system(text: str) -> DerivedSystem:
    sections: dict[str, list[str]] = {}
    pairing = ("", "")
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("# pairing:"):
            left, right = line.removeprefix("# pairing:").split("|")
            pairing = (left.strip(), right.strip())
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is None:
            raise ValueError(f"term outside of a section: {line!r}")
        else:
            sections[current].append(line)
    poly = {name: JetPolynomial.from_term_lines(lines) for name, lines in sections.items()}
    eq2 = SecondOrderSystem(poly["w_xx"], poly["w_xy"], poly["w_yy"], poly["Eq1"])
    members = {name: poly[name] for name in EQ0_NAMES}
    system = DerivedSystem(eq2, poly["EQ1 denominator"], poly["w_x numerator"], poly["w_y numerator"], members, pairing)
    return DerivedSystem(
        eq2, system.den, system.n1, system.n2, members, pairing, structural_checksums(system)
    )
