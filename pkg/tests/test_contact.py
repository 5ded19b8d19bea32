import numpy as np
import pytest

from psasaki.catalog import CatalogError, heisenberg, hyperbolic, model_catalog, round_sphere
from psasaki.contact import (
    AmbientStructure,
    _rm_phi_defect,
    curvature_identity_suite,
    eta_einstein_constants,
    sabotage,
    verify_sasakian,
)
from psasaki.tanno import deform


def catalog_structures():
    out = [hyperbolic(1)]
    for n in (1, 2):
        out += [round_sphere(n), heisenberg(n)]
        out += [deform(round_sphere(n), a).target for a in (0.5, 2.0)]
    return out


@pytest.mark.parametrize("S", catalog_structures(), ids=lambda S: f"{S.name}-n{S.n}")
def test_catalog_structures_pass_every_identity(S):
    rng = np.random.default_rng(1)
    axioms = verify_sasakian(S, rng=rng, count=20, tol=1e-7 if S.eps == 1 else 1e-6)
    assert axioms.passed, axioms.summary()
    suite = curvature_identity_suite(S, rng=rng, count=20, tol=1e-6)
    assert suite.passed, suite.summary()
    assert suite["nabla_eta"].residual < 1e-7


@pytest.mark.parametrize("n, expected", [(1, 2.0), (2, 4.0)])
def test_reeb_ricci_is_2n(n, expected):
    S = round_sphere(n)
    pts = S.sample_points(np.random.default_rng(0), 20)
    F = S.fields(pts)
    np.testing.assert_allclose(F.geo.ricci(F.xi, F.xi), expected, atol=1e-6)


@pytest.mark.parametrize(
    "kwargs, failing",
    [
        ({"phi_sign": -1.0}, {"nabla_phi", "contact_metric", "nabla_xi"}),
        ({"eta_scale": 2.0}, {"eta_xi", "phi_squared", "eta_metric_dual"}),
        ({"xi_scale": 1.5}, {"eta_xi", "g_xi_xi", "nabla_xi"}),
    ],
)
def test_sabotage_fails_with_large_residual(kwargs, failing):
    S = sabotage(round_sphere(1), **kwargs)
    rep = verify_sasakian(S)
    names = {r.id for r in rep.failures()}
    assert failing <= names
    assert all(rep[name].residual > 1e-2 for name in failing)


def test_scaled_eta_breaks_the_curvature_suite():
    rep = curvature_identity_suite(sabotage(round_sphere(1), eta_scale=2.0))
    assert not rep.passed
    assert rep["curvature_xi"].residual > 1e-2


def test_reeb_curvature_sign():
    """R(X,Y)ξ = η(Y)X − η(X)Y holds; the opposite sign fails at O(1)."""
    S = round_sphere(1)
    rng = np.random.default_rng(3)
    pts = S.sample_points(rng, 20)
    F = S.fields(pts)
    X, Y = rng.standard_normal((2, 20, 3))
    R = F.geo.curvature_op(X, Y, F.xi)
    adopted = R - (F.eta_of(Y)[:, None] * X - F.eta_of(X)[:, None] * Y)
    flipped = R - (F.eta_of(X)[:, None] * Y - F.eta_of(Y)[:, None] * X)
    assert np.max(np.abs(adopted)) < 1e-10
    assert np.max(np.abs(flipped)) > 1e-2


def test_phi_commutation_grouping():
    """ε multiplies all four correction terms; the other reading fails when ε = −1."""
    rng = np.random.default_rng(4)
    for S in (round_sphere(1), deform(round_sphere(1), 2.0).target, deform(round_sphere(2), 0.5).target):
        pts = S.sample_points(rng, 20)
        F = S.fields(pts)
        X, Y, Z = rng.standard_normal((3, 20, S.dim))
        assert np.max(np.abs(_rm_phi_defect(F, X, Y, Z, "all"))) < 1e-9
        other = np.max(np.abs(_rm_phi_defect(F, X, Y, Z, "first_two")))
        if S.eps == 1:
            assert other < 1e-9
        else:
            assert other > 1e-2


@pytest.mark.parametrize("n", [1, 2])
def test_sphere_einstein_constants(n):
    fit = eta_einstein_constants(round_sphere(n))
    assert fit.is_eta_einstein
    assert fit.A == pytest.approx(2 * n, abs=1e-9)
    assert fit.B == pytest.approx(0.0, abs=1e-9)
    assert fit.relation_residual < 1e-6


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0])
def test_deformed_sphere_constant(alpha):
    fit = eta_einstein_constants(deform(round_sphere(1), alpha).target)
    assert fit.A == pytest.approx(4.0 / alpha + 2.0, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_heisenberg_constants_and_deformation(alpha):
    for n in (1, 2):
        fit = eta_einstein_constants(heisenberg(n))
        assert fit.is_eta_einstein
        assert (fit.A, fit.B) == pytest.approx((-2.0, 2 * n + 2.0), abs=1e-9)
        assert eta_einstein_constants(deform(heisenberg(n), alpha).target).A == pytest.approx(2.0, abs=1e-9)


def test_hyperbolic_model_constants():
    fit = eta_einstein_constants(hyperbolic(1, A=-4.0))
    assert (fit.A, fit.B) == pytest.approx((-4.0, 6.0), abs=1e-9)
    assert eta_einstein_constants(deform(hyperbolic(1), 0.5).target).A == pytest.approx(-2.0, abs=1e-9)


def test_non_einstein_metric_is_reported_not_raised():
    spec = heisenberg(1).to_text()
    spec["metric"][0][0] = "0.5 + y1^2 + 0.3*x1^2"
    fit = eta_einstein_constants(AmbientStructure.from_text(spec))
    assert not fit.is_eta_einstein
    assert fit.residual > 1e-2


def test_catalog_lookup():
    T = model_catalog("tanno(round-sphere, alpha=1)", 1)
    assert T.metric.signature == (1, 1, -1)
    assert T.eps == -1
    pts = T.sample_points(np.random.default_rng(0), 10)
    F = T.fields(pts)
    np.testing.assert_allclose(F.g(F.xi, F.xi), -1.0, atol=1e-9)
    assert model_catalog("tanno(round-sphere,α=2)", 1).name == "tanno(round-sphere,alpha=2)"
    assert verify_sasakian(model_catalog("heisenberg", 1)).passed
    with pytest.raises(CatalogError):
        model_catalog("torus", 1)
    with pytest.raises(CatalogError):
        model_catalog("round-sphere", 3)


def test_text_round_trip():
    for S in (round_sphere(1), heisenberg(2), deform(round_sphere(1), 2.0).target):
        again = AmbientStructure.from_text(S.to_text())
        pts = S.sample_points(np.random.default_rng(2), 10)
        for a, b in zip(S.values(pts), again.values(pts)):
            np.testing.assert_array_equal(a, b)
        assert again.eps == S.eps and again.metric.signature == S.metric.signature
