import numpy as np
import pytest

from geodrat.errors import DegenerateCofactorError, MetricFormError, SingularMatrixError
from geodrat.models.schemas import Tolerances
from geodrat.services.criterion import (
    SpecializedSystem,
    branches_incompatible,
    decide,
    find_w_candidates,
    mobius_orbit_check,
    phi_band,
    phi_evaluate,
    phi_grid,
    psi_factor_check,
    real_roots,
    reconstruct_cofactor,
    relative_value,
    resultant,
    revolution_fastpath,
    sylvester,
)
from geodrat.services.examples import BESSEL_INTEGRAL, bessel_a, bessel_reference_row, bessel_w
from geodrat.services.fields import GridField
from geodrat.services.flow import FractionalLinearIntegral, batch_integrate

BESSEL_POINT = (0.5, 1.2)


def test_sylvester_shape():
    s = sylvester(np.array([1.0, 0.0, -1.0]), np.array([1.0, -3.0]))
    assert s.shape == (3, 3)
    assert s[0].tolist() == [1.0, 0.0, -1.0]


def test_resultant():
    assert abs(resultant(np.array([1.0, 0.0, -1.0]), np.array([1.0, -3.0]))) == pytest.approx(8.0)
    assert resultant(np.array([1.0, 0.0, -1.0]), np.array([1.0, -1.0])) == pytest.approx(0.0, abs=1e-12)
    assert abs(resultant(np.array([2.0, 0.0, -2.0]), np.array([4.0, -12.0]), monic=True)) == pytest.approx(8.0)


def test_real_roots():
    assert real_roots(np.array([1.0, 0.0, -1.0])).tolist() == [-1.0, 1.0]
    assert real_roots(np.array([1.0, 0.0, 1.0])).size == 0


def test_relative_value():
    assert relative_value(np.array([1.0, -2.0]), 2.0) == 0.0
    assert relative_value(np.array([1.0, 1.0]), 1.0) == pytest.approx(1.0)
    assert relative_value(np.array([0.0, 0.0]), 3.0) == 0.0


def test_phi_band():
    tol = Tolerances()
    assert phi_band(np.full(10, 1e-9), tol) == "accept"
    assert phi_band(np.full(10, 0.1), tol) == "reject"
    assert phi_band(np.array([1e-9, 0.1]), tol) == "inconclusive"
    assert phi_band(np.array([]), tol) == "inconclusive"


def test_bessel_candidate_is_the_cofactor_root(system, bessel):
    candidates = find_w_candidates(system, bessel, BESSEL_POINT)
    expected = float(bessel_w(BESSEL_POINT[1]))
    assert any(c.w == pytest.approx(expected, rel=1e-6, abs=1e-9) for c in candidates)


def test_phi_vanishes_on_bessel(system, bessel):
    phi = phi_evaluate(system, bessel, BESSEL_POINT)
    assert phi.normalized.max() < 1e-6
    assert not phi.flagged


def test_psi_factorization_on_bessel(system, bessel):
    report = psi_factor_check(bessel, system)
    assert report.passed
    assert report.psi2_degree == 5


@pytest.mark.parametrize("name", ["h2", "revolution"])
def test_phi_rejects_metrics_without_integrals(name, system, metric_of):
    stats = phi_grid(system, metric_of(name), (11, 11), Tolerances())
    assert stats.band == "reject"
    assert stats.minimum >= 1e-3
    assert stats.points + stats.flagged == 121


@pytest.mark.parametrize("name", ["flat", "sphere"])
def test_constant_curvature_short_circuit(name, metric_of):
    report = decide(metric_of(name))
    assert report.verdict == "constant_curvature"
    assert report.moduli == "RP2"


def test_sphere_curvature_mean(sphere):
    assert decide(sphere).curvature_mean == pytest.approx(1.0, rel=1e-6)


def test_revolution_has_no_integral(revolution):
    report = decide(revolution)
    assert report.verdict == "none"
    assert report.moduli == "empty"
    assert branches_incompatible(report.revolution)


def test_revolution_is_decided_without_deriving(revolution, monkeypatch):
    def refuse():
        raise AssertionError("the derived system was requested")

    monkeypatch.setattr("geodrat.services.criterion.derived_system", refuse)
    report = decide(revolution)
    assert report.verdict == "none"
    assert report.phi is None
    assert report.revolution is not None


def test_first_order_system_reproduces_bessel_slopes(system, bessel):
    ys = np.array([0.8, 1.2, 1.6])
    spec = SpecializedSystem(system, bessel, np.full_like(ys, 0.5), ys)
    h = 1e-5
    for index, y in enumerate(ys):
        w = float(bessel_w(y))
        expected = float(bessel_w(y + h) - bessel_w(y - h)) / (2.0 * h)
        assert spec.slope("x", index, w) == pytest.approx(0.0, abs=1e-5 * (1.0 + abs(expected)))
        assert spec.slope("y", index, w) == pytest.approx(expected, rel=1e-5, abs=1e-7)


def test_revolution_fastpath_rejects_other_forms(bessel, flat):
    with pytest.raises(MetricFormError):
        revolution_fastpath(bessel)
    with pytest.raises(MetricFormError):
        revolution_fastpath(flat)


def test_reconstruct_cofactor(bessel):
    xs, ys = bessel.domain.grid(41, 41)
    w = GridField(xs, ys, np.tile(bessel_w(ys), (len(xs), 1)))
    cofactor = reconstruct_cofactor(w, bessel_reference_row(xs, ys[0]))
    assert np.allclose(cofactor.a.values, np.tile(bessel_a(ys), (len(xs), 1)), rtol=1e-5, atol=1e-7)


def test_reconstruct_cofactor_refuses_closed_cofactors():
    xs = ys = np.linspace(-1.0, 1.0, 11)
    with pytest.raises(DegenerateCofactorError):
        reconstruct_cofactor(GridField(xs, ys, np.tile(ys, (11, 1))))


@pytest.fixture(scope="module")
def bessel_integral():
    return FractionalLinearIntegral.from_texts(*BESSEL_INTEGRAL)


@pytest.mark.parametrize("matrix", [[[2.0, 1.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 3.0]], [[0.0, 1.0], [1.0, 0.0]]])
def test_mobius_orbit(matrix, bessel, bessel_integral):
    trajectories = batch_integrate(bessel, 4, 2.0, seed=3)
    assert mobius_orbit_check(bessel_integral, matrix, bessel, trajectories)


def test_mobius_singular_matrix(bessel, bessel_integral):
    with pytest.raises(SingularMatrixError):
        mobius_orbit_check(bessel_integral, [[1.0, 2.0], [2.0, 4.0]], bessel, [])


@pytest.mark.slow
def test_bessel_has_one_moebius_class(system, bessel):
    report = decide(bessel, system=system)
    assert report.verdict == "exists"
    assert report.moduli == "points(1)"
    assert report.integral_p is not None and report.cofactor_a is not None


@pytest.mark.slow
def test_h2_deformation_at_known_parameter(system, metric_of):
    assert decide(metric_of("h2eps", eps=4.0), system=system).verdict == "exists"


def test_h2_has_no_integral(system, h2):
    report = decide(h2, system=system)
    assert report.verdict == "none"
    assert report.phi.minimum >= 1e-3
