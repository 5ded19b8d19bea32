import math

import numpy as np
import pytest

from conftest import LEGENDRIANS, ambient_for
from psasaki.catalog import immersion_catalog, round_sphere
from psasaki.expr import parse
from psasaki.submanifold import (
    Immersion,
    ImmersionError,
    NotSpacelikeError,
    RankDeficiencyError,
    gauss_equation_check,
    induced_geometry,
    legendrian_defect,
    submanifold_checks,
    trace_curvature_check,
)
from psasaki.tanno import deform


def _geom(name):
    imm = immersion_catalog(name)
    return imm, ambient_for(name), induced_geometry(imm, ambient_for(name))


def _H_norm(geom):
    return float(np.sqrt(np.max(np.abs(geom.g(geom.H, geom.H)))))


def test_legendrian_defect_examples():
    S3, S5 = round_sphere(1), round_sphere(2)
    assert legendrian_defect(immersion_catalog("great-circle"), S3) < 1e-12
    assert legendrian_defect(immersion_catalog("real-sphere"), S5) < 1e-12
    assert legendrian_defect(immersion_catalog("reeb-orbit"), S3) == pytest.approx(1.0, abs=1e-9)
    assert legendrian_defect(immersion_catalog("slanted-circle"), S3) > 1e-2


def test_dimension_mismatch():
    with pytest.raises(ImmersionError):
        legendrian_defect(immersion_catalog("great-circle"), round_sphere(2))


def test_totally_geodesic_examples():
    _, _, g = _geom("great-circle")
    assert _H_norm(g) < 1e-7
    _, _, g = _geom("real-sphere")
    assert np.max(np.abs(g.h)) < 1e-7
    assert _H_norm(g) < 1e-7
    _, _, g = _geom("clifford-torus")
    assert _H_norm(g) < 1e-6
    _, _, g = _geom("torus-knot")
    assert _H_norm(g) > 0.1


def test_volumes():
    assert _geom("great-circle")[2].volume() == pytest.approx(2 * math.pi, abs=1e-10)
    assert _geom("real-sphere")[2].volume() == pytest.approx(4 * math.pi, abs=1e-6)
    # constant induced metric [[2/3, 1/3], [1/3, 2/3]] on [0, 2π]²
    assert _geom("clifford-torus")[2].volume() == pytest.approx(4 * math.pi**2 / math.sqrt(3), rel=1e-10)


@pytest.mark.parametrize("name", LEGENDRIANS)
def test_submanifold_suites_on_catalog_legendrians(name):
    imm, S, geom = _geom(name)
    rng = np.random.default_rng(5)
    rep = submanifold_checks(geom, rng=rng, legendrian=True)
    assert rep.passed, rep.summary()
    trace = trace_curvature_check(imm, S, rng=rng)
    assert trace.passed, trace.summary()
    assert trace["trace_phi_xi_phi_V"].residual < 1e-7


def test_trace_identity_values():
    for name, n, tol in (("great-circle", 1, 1e-7), ("clifford-torus", 2, 1e-6)):
        imm, S, _ = _geom(name)
        assert trace_curvature_check(imm, S)["trace_phi_xi_xi_phi"].residual < tol


def test_gauss_equation():
    for name, tol in (("great-circle", 1e-9), ("clifford-torus", 1e-5), ("real-sphere", 1e-6), ("torus-knot", 1e-5)):
        imm, S, _ = _geom(name)
        rep = gauss_equation_check(imm, S, rng=np.random.default_rng(6))
        assert rep["gauss_equation"].residual < tol, name


def test_gauss_equation_sees_curvature_of_real_sphere():
    imm, S, _ = _geom("real-sphere")
    geom = induced_geometry(imm, S, [[1.0, 2.0], [0.7, 0.3]])
    _, Rm, _ = geom.intrinsic
    # unit round S²: Rm(∂θ, ∂φ, ∂φ, ∂θ) = sin²θ
    np.testing.assert_allclose(Rm[:, 0, 1, 1, 0], np.sin([1.0, 0.7]) ** 2, rtol=1e-6)


def test_degenerate_immersions_rejected():
    S = round_sphere(1)
    flat = Immersion("point", tuple(parse(t, names=["u"]) for t in ("0.1", "0.2", "0.3")), ((0.0, 1.0),), (False,), (16,))
    with pytest.raises(RankDeficiencyError):
        induced_geometry(flat, S)
    T = deform(S, 2.0).target
    with pytest.raises(NotSpacelikeError):
        induced_geometry(immersion_catalog("reeb-orbit"), T)
    induced_geometry(immersion_catalog("reeb-orbit"), T, require_spacelike=False)


def test_immersion_text_round_trip():
    imm = immersion_catalog("clifford-torus")
    again = Immersion.from_text(imm.to_text())
    pts = np.random.default_rng(0).uniform(0, 6, (50, 2))
    np.testing.assert_array_equal(imm.values(pts), again.values(pts))
    assert again.periodic == imm.periodic and again.grid == imm.grid
    assert imm.map_is_periodic()
    assert not immersion_catalog("heisenberg-line").map_is_periodic()
