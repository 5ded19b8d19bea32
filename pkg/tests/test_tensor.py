import numpy as np
import pytest

from psasaki.catalog import heisenberg, hyperbolic, round_sphere
from psasaki.expr import Const, derivative_oracle, eval_jet2_many, evaluate, parse
from psasaki.tanno import deform
from psasaki.tensor import (
    MetricField,
    PointGeometry,
    SignatureError,
    SingularMetricError,
    check_signature,
    christoffel,
    contract,
    inverse,
    lower,
    raise_,
    riemann,
    sectional_curvature,
)


def _constant_metric(diag, signature):
    d = len(diag)
    rows = [[Const(float(diag[i]) if i == j else 0.0) for j in range(d)] for i in range(d)]
    return MetricField.from_rows(rows, signature)


def _points(S, rng, count=8):
    return S.sample_points(rng, count)


def _vector_field(texts, d):
    return [parse(t, d=d) for t in texts]


def _field_jets(exprs, pts):
    js = eval_jet2_many(exprs, pts)
    return np.stack([j.val for j in js], -1), np.stack([j.grad for j in js], 1)


def test_flat_and_minkowski_have_no_connection(rng):
    pts = rng.uniform(-1, 1, (5, 3))
    for diag, sig in (([1, 1, 1], [1, 1, 1]), ([1, 1, -1], [1, 1, -1])):
        g = _constant_metric(diag, sig)
        assert not christoffel(g, pts).Gamma.any()
        assert not riemann(g, pts).Rm.any()


def test_christoffel_matches_difference_oracle(rng):
    S = round_sphere(1)
    pts = _points(S, rng)
    Gamma = christoffel(S.metric, pts).Gamma
    d = S.dim
    for n, p in enumerate(pts):
        dG = np.empty((d, d, d))
        for i in range(d):
            for j in range(d):
                dG[i, j], _ = derivative_oracle(S.metric.components[i][j], p, h=1e-3)
        Ginv = np.linalg.inv(S.metric.values(p[None])[0])
        T = np.einsum("jli->lij", dG) + np.einsum("ilj->lij", dG) - np.einsum("ijl->lij", dG)
        oracle = 0.5 * np.einsum("kl,lij->kij", Ginv, T)
        assert np.max(np.abs(Gamma[n] - oracle)) < 1e-7


def test_christoffel_symmetric(rng):
    for S in (round_sphere(2), heisenberg(1), deform(round_sphere(1), 2.0).target):
        G = christoffel(S.metric, _points(S, rng)).Gamma
        np.testing.assert_array_equal(G, np.swapaxes(G, -1, -2))


@pytest.mark.parametrize("n", [1, 2])
def test_round_sphere_curvature(rng, n):
    S = round_sphere(n)
    pts = _points(S, rng, 20)
    geo = PointGeometry.of(S.metric, pts)
    assert np.max(np.abs(geo.Ric - 2 * n * geo.G)) < 1e-9
    X, Y = rng.standard_normal((2, len(pts), S.dim))
    assert np.max(np.abs(sectional_curvature(geo, X, Y) - 1.0)) < 1e-6
    _, xi, _, _ = S.values(pts)
    assert np.max(np.abs(geo.ricci(xi, xi) - 2 * n)) < 1e-9


def test_curvature_symmetries_on_catalog(rng):
    models = [round_sphere(1), round_sphere(2), heisenberg(1), heisenberg(2), hyperbolic(1),
              deform(round_sphere(1), 0.5).target, deform(round_sphere(2), 3.0).target]
    for S in models:
        Rm = riemann(S.metric, _points(S, rng)).Rm
        scale = 1.0 + np.max(np.abs(Rm))
        assert np.max(np.abs(Rm + np.swapaxes(Rm, 1, 2))) < 1e-8 * scale
        assert np.max(np.abs(Rm + np.swapaxes(Rm, 3, 4))) < 1e-8 * scale
        assert np.max(np.abs(Rm - np.transpose(Rm, (0, 3, 4, 1, 2)))) < 1e-8 * scale
        bianchi = Rm + np.transpose(Rm, (0, 2, 3, 1, 4)) + np.transpose(Rm, (0, 3, 1, 2, 4))
        assert np.max(np.abs(bianchi)) < 1e-8 * scale


def test_musical_isomorphisms(rng):
    S = round_sphere(1)
    pts = _points(S, rng)
    G = S.metric.values(pts)
    Ginv = inverse(G)
    w = rng.standard_normal((len(pts), 3))
    assert np.max(np.abs(lower(G, raise_(Ginv, w)) - w)) < 1e-12
    assert np.max(np.abs(contract(Ginv, G) - 3.0)) < 1e-10
    for T in (S, deform(S, 2.0).target):
        G, xi, eta, _ = T.values(pts)
        assert np.max(np.abs(lower(G, xi) - T.eps * eta)) < 1e-9


def test_metric_compatibility_and_torsion(rng):
    S = round_sphere(1)
    d = S.dim
    X = _vector_field(["x1 + 0.3", "sin(x0)", "x0*x2"], d)
    Y = _vector_field(["cos(x2)", "x0^2 - x1", "1 + 0.5*x1"], d)
    Z = _vector_field(["exp(0.2*x1)", "x2", "x0 - x1*x2"], d)
    g = S.metric.components
    gYZ = sum((g[i][j] * Y[i] * Z[j] for i in range(d) for j in range(d)), Const(0.0))
    pts = _points(S, rng)
    geo = PointGeometry.of(S.metric, pts)
    (Xv, dX), (Yv, dY), (Zv, dZ) = (_field_jets(F, pts) for F in (X, Y, Z))
    deriv = np.array([derivative_oracle(gYZ, p, h=1e-3)[0] @ Xv[n] for n, p in enumerate(pts)])
    compat = deriv - geo.inner(geo.nabla(Xv, Yv, dY), Zv) - geo.inner(Yv, geo.nabla(Xv, Zv, dZ))
    assert np.max(np.abs(compat)) < 1e-7
    bracket = np.einsum("nk,nik->ni", Xv, dY) - np.einsum("nk,nik->ni", Yv, dX)
    torsion = geo.nabla(Xv, Yv, dY) - geo.nabla(Yv, Xv, dX) - bracket
    assert np.max(np.abs(torsion)) < 1e-7


def test_degenerate_metrics_rejected():
    g = MetricField.from_rows([[parse("x0", d=2), Const(0.0)], [Const(0.0), Const(1.0)]], [1, 1])
    with pytest.raises(SingularMetricError):
        christoffel(g, [[0.0, 0.3]])
    G = g.values([[-1.0, 0.0]])
    with pytest.raises(SignatureError):
        check_signature(G, [1, 1])
    with pytest.raises(ValueError):
        MetricField.from_rows([[Const(1.0)]], [2])


def test_metric_components_share_trees():
    S = round_sphere(1)
    g = S.metric.components
    assert all(g[i][j] is g[j][i] for i in range(3) for j in range(3))
    assert evaluate(g[0][0], [[0.0, 0.0, 0.0]])[0] > 0
