import numpy as np
import pytest

from conftest import ambient_for
from psasaki.catalog import heisenberg, hyperbolic, immersion_catalog, round_sphere
from psasaki.submanifold import NotLegendrianError
from psasaki.tanno import (
    TannoError,
    connection_difference_check,
    curvature_relation_check,
    deform,
    einstein_constant_map,
    einstein_constants_check,
    minimality_preservation_check,
    stability_equivalence_check,
    tangent_connection_check,
)

S3 = round_sphere(1)
S5 = round_sphere(2)


def test_deformation_examples():
    T = deform(S3, 2.0)
    assert T.beta == 6.0
    F = T.target.fields(np.array([[0.3, -0.2, 0.5]]))
    _, xi0, _, _ = S3.values(np.array([[0.3, -0.2, 0.5]]))
    assert F.g(xi0, xi0)[0] == pytest.approx(-4.0, abs=1e-12)
    assert F.g(F.xi, F.xi)[0] == pytest.approx(-1.0, abs=1e-12)
    assert T.target.eps == -1


def test_bad_parameters_are_rejected():
    for a in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(TannoError):
            deform(S3, a)
    with pytest.raises(TannoError):
        deform(deform(S3, 1.0).target, 1.0)
    with pytest.raises(TannoError):
        einstein_constant_map(2.0, 0.0)


@pytest.mark.parametrize("S", [S3, S5], ids=["S3", "S5"])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0])
def test_target_is_lorentzian_sasakian(S, alpha):
    T = deform(S, alpha)
    rep = T.invariants(count=8)
    assert rep.passed, [r.id for r in rep.failures()]
    assert connection_difference_check(T, count=8).passed
    assert curvature_relation_check(T, count=8).passed


def test_curvature_relation_named_cases():
    assert curvature_relation_check(deform(S3, 1.0)).passed
    assert curvature_relation_check(deform(S5, 3.0)).passed


def test_einstein_constant_map_examples():
    assert einstein_constant_map(2.0, 1.0) == 6.0
    assert einstein_constant_map(-2.0, 0.5) == 2.0
    assert einstein_constant_map(-4.0, 1.0) == 0.0
    assert einstein_constant_map(-6.0, 1.0) == -2.0


@pytest.mark.parametrize("S, alpha", [(S3, 0.5), (S3, 2.0), (S5, 3.0), (heisenberg(1), 2.0), (hyperbolic(1), 0.5)])
def test_fitted_constants_follow_the_map(S, alpha):
    chk = einstein_constants_check(deform(S, alpha), count=10)
    assert chk.report.passed
    assert chk.target.A == pytest.approx(chk.predicted, abs=1e-5)
    assert chk.target.B == pytest.approx(2 * S.n + chk.predicted, abs=1e-5)


@pytest.mark.parametrize("name, alpha", [("great-circle", 1.0), ("clifford-torus", 2.0), ("torus-knot", 0.5)])
def test_minimality_is_preserved(name, alpha):
    T = deform(ambient_for(name), alpha)
    cmp = minimality_preservation_check(immersion_catalog(name), T)
    assert cmp.report.passed
    assert cmp.homothety < 1e-9


def test_bumped_knot_stays_non_minimal():
    cmp = minimality_preservation_check(immersion_catalog("bumped-knot"), deform(S3, 2.0))
    assert cmp.report.passed
    assert cmp.source_l_defect > 1e-2 and cmp.target_l_defect > 1e-2


def test_tangent_connection_fails_off_legendrian():
    slanted = immersion_catalog("slanted-circle")
    T = deform(S3, 2.0)
    rep = tangent_connection_check(slanted, T)
    assert not rep.passed
    assert rep.failures()[0].residual > 1e-2
    with pytest.raises(NotLegendrianError):
        minimality_preservation_check(slanted, T)
    assert tangent_connection_check(immersion_catalog("great-circle"), T).passed


@pytest.mark.parametrize(
    "name, alpha",
    [("great-circle", 2.0), ("torus-knot", 0.5), ("clifford-torus", 3.0)],
)
def test_stability_equivalence(name, alpha):
    eq = stability_equivalence_check(immersion_catalog(name), deform(ambient_for(name), alpha))
    assert eq.report.passed
    assert eq.source.stable == eq.target.stable
    assert eq.target.lambda1 == pytest.approx(eq.source.lambda1 / alpha, rel=1e-6)


def test_great_circle_target_is_unstable():
    eq = stability_equivalence_check(immersion_catalog("great-circle"), deform(S3, 2.0))
    assert eq.A_alpha == pytest.approx(4.0, abs=1e-6)
    assert eq.target.label == "unstable" and eq.source.label == "unstable"


@pytest.mark.parametrize("name, alpha", [("hyperbolic-geodesic", 0.5), ("heisenberg-line", 2.0)])
def test_corollary_path(name, alpha):
    S = ambient_for(name)
    eq = stability_equivalence_check(immersion_catalog(name), deform(S, alpha))
    assert eq.report.passed
    assert eq.source.corollary and eq.source.stable
    assert eq.A_alpha - 2.0 <= 1e-9
    assert eq.target.stable
