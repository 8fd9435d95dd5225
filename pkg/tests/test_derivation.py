from geodrat.services.derivation import (
    EQ0_LEADING,
    EQ0_NAMES,
    FIRST_ORDER,
    _remainder_chain,
    dump_system,
    load_system,
    write_system,
)
from geodrat.services.jet_algebra import E, JetPolynomial, curvature_jet, lam, wjet


def test_checksums_pass(system):
    assert system.consistent, [c.line() for c in system.checksums if not c.passed]


def test_member_degrees(system):
    assert sorted(system.degrees.values()) == [6, 7, 8, 10]
    assert system.degrees["Eq0"] == 6


def test_eq0_leading_coefficient_and_gaps(system):
    coefficients = system.eq0["Eq0"].w_coefficients()
    assert coefficients[6].equals(JetPolynomial.constant(EQ0_LEADING))
    assert not {5, 4, 3} & set(coefficients)


def test_denominator_shape(system):
    coefficients = system.den.w_coefficients()
    assert set(coefficients) == {0, 2}
    assert coefficients[2].equals(30 * curvature_jet(1, 0))


def test_numerator_leading_terms(system):
    assert system.n1.w_coefficients()[5].equals(180 * E(-1))
    kx, ky, kxy = curvature_jet(1, 0), curvature_jet(0, 1), curvature_jet(1, 1)
    expected = 18 * kxy - 18 * lam(1, 0) * ky + 42 * lam(0, 1) * kx
    assert system.n2.w_coefficients()[3].equals(expected)


def test_checksum_block_lines(system):
    lines = [c.line() for c in system.checksums]
    assert any(line.startswith("Eq0: degree 6, leading 5400") for line in lines)
    assert any(line.startswith("EQ1 denominator: 30*k_x*w^2 + ...") for line in lines)


def test_dump_and_reload(system, tmp_path):
    path = write_system(system, tmp_path / "derived.txt")
    text = path.read_text(encoding="utf-8")
    assert text == dump_system(system)
    assert "# Eq0: degree 6, leading 5400: ok" in text
    reloaded = load_system(text)
    assert reloaded.pairing == system.pairing
    assert reloaded.consistent
    for name in EQ0_NAMES:
        assert reloaded.eq0[name].equals(system.eq0[name])
    assert reloaded.den.equals(system.den)


def test_solved_system_satisfies_eq1(system):
    eq1 = JetPolynomial(system.eq2.eq1.num)
    assert eq1.substitute_rational(FIRST_ORDER, (system.n1, system.n2), system.den).is_zero


def test_prolonged_equations_need_reduction_modulo_eq1(system):
    eq2 = system.eq2
    compatibility = eq2.reduce(eq2.w_xx.total_derivative("y") - eq2.w_xy.total_derivative("x"))
    assert eq2.eq1.degree_in(*FIRST_ORDER) == 1
    assert compatibility.degree_in(*FIRST_ORDER) >= 2


def test_remainder_chain_leaves_the_common_linear_factor():
    x, l = wjet(1, 0), lam(1, 0)
    p = (x - l) * (x - 2)
    q = (x - l) * (x + 3)
    r = _remainder_chain(p, q, FIRST_ORDER[0])
    assert r.degree_in(FIRST_ORDER[0]) == 1
    assert r.exquo(x - l).num.is_ground


def test_remainder_chain_on_proportional_equations():
    x, l = wjet(1, 0), lam(1, 0)
    p = (x - l) * (x - 2)
    assert _remainder_chain(p, 3 * p, FIRST_ORDER[0]) is None
