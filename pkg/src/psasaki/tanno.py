"""Deformation of a Sasakian structure into a Lorentzian-Sasakian one.

For ``α > 0`` and ``β = α + α²`` the deformed structure is
``(αg − βη⊗η, αη, ξ/α, φ)`` with ``ε = −1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .contact import AmbientStructure, EinsteinFit, curvature_identity_suite, eta_einstein_constants, verify_sasakian
from .expr import as_expr
from .report import IdentityReport
from .spectral import SpectrumResult, Verdict, laplace_spectrum, stability_verdict
from .submanifold import Immersion, NotLegendrianError, induced_geometry, legendrian_defect
from .tensor import MetricField
from .variation import l_minimality_defect


class TannoError(ValueError):
    pass


@dataclass(frozen=True)
class TannoDeformation:
    alpha: float
    source: AmbientStructure
    target: AmbientStructure

    @property
    def beta(self) -> float:
        return self.alpha + self.alpha**2

    def invariants(self, sample=None, *, rng=None, count: int = 20, tol: float = 1e-6) -> IdentityReport:
        """Normalization of the new Reeb field plus the full axiom suite for the target."""
        rng = rng if rng is not None else np.random.default_rng(0)
        pts = self.source.sample_points(rng, count) if sample is None else np.atleast_2d(sample)
        F = self.target.fields(pts)
        G0, xi0, _, _ = self.source.values(pts)
        rep = IdentityReport()
        rep.add("beta", "beta = alpha + alpha^2", [self.beta - (self.alpha + self.alpha**2)], 0.0)
        rep.add("reeb_norm", "g~(xi~, xi~) = -1", F.g(F.xi, F.xi) + 1.0, 1e-9)
        rep.add("old_reeb_norm", "g~(xi, xi) = -alpha^2", F.g(xi0, xi0) + self.alpha**2, 1e-9 * max(1.0, self.alpha**2))
        rep.extend(verify_sasakian(self.target, pts, rng=rng, tol=tol), "target.")
        rep.extend(curvature_identity_suite(self.target, pts, rng=rng, tol=tol), "target.curvature.")
        return rep


def deform(S: AmbientStructure, alpha: float, *, check_source: bool = True) -> TannoDeformation:
    """Build the deformed structure; the source must be Sasakian (``ε = +1``)."""
    alpha = float(alpha)
    if not alpha > 0.0 or not np.isfinite(alpha):
        raise TannoError(f"alpha must be a positive real, got {alpha}")
    if S.eps != 1:
        raise TannoError("the source structure must have epsilon = +1")
    if check_source:
        rep = verify_sasakian(S)
        if not rep.passed:
            names = ", ".join(r.id for r in rep.failures())
            raise TannoError(f"source {S.name} is not Sasakian (failed: {names})")
    beta = alpha + alpha**2
    d = S.dim
    g = S.metric.components
    rows = [[alpha * g[i][j] - beta * S.eta[i] * S.eta[j] for j in range(d)] for i in range(d)]
    target = replace(
        S,
        name=f"tanno({S.name},alpha={alpha:g})",
        metric=MetricField.from_rows(rows, [1] * (d - 1) + [-1]),
        eta=tuple(alpha * e for e in S.eta),
        xi=tuple(e / as_expr(alpha) for e in S.xi),
        eps=-1,
        einstein_hint=None,
    )
    return TannoDeformation(alpha, S, target)


def _pair_fields(T: TannoDeformation, sample, rng, count):
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = T.source.sample_points(rng, count) if sample is None else np.atleast_2d(sample)
    return T.source.fields(pts), T.target.fields(pts), rng


def connection_difference_check(
    T: TannoDeformation, sample=None, *, rng=None, count: int = 20, tol: float = 1e-5
) -> IdentityReport:
    """``∇̃_X Y = ∇_X Y − (β/α)(η(X)φY + η(Y)φX)`` for mixed, horizontal and Reeb arguments."""
    F, Ft, rng = _pair_fields(T, sample, rng, count)
    N, d = F.points.shape
    dGamma = Ft.geo.Gamma - F.geo.Gamma
    c = T.beta / T.alpha

    def defect(X, Y):
        diff = np.einsum("nkij,ni,nj->nk", dGamma, X, Y)
        return diff + c * (F.eta_of(X)[:, None] * F.phi_of(Y) + F.eta_of(Y)[:, None] * F.phi_of(X))

    X, Y = rng.standard_normal((2, N, d))
    rep = IdentityReport()
    anchor = "nabla~_X Y = nabla_X Y - (beta/alpha)(eta(X) phi Y + eta(Y) phi X)"
    rep.add("connection_difference", anchor, defect(X, Y), tol)
    Xd, Yd = F.project_d(X), F.project_d(Y)
    rep.add("connection_difference_D", "nabla~_X Y = nabla_X Y for X, Y in D",
            np.einsum("nkij,ni,nj->nk", dGamma, Xd, Yd), tol)
    rep.add("connection_reeb", "nabla~_xi xi = nabla_xi xi = 0",
            np.concatenate([Ft.geo.nabla(F.xi, F.xi, F.dxi), F.geo.nabla(F.xi, F.xi, F.dxi)]), 1e-7)
    return rep


def curvature_relation_check(
    T: TannoDeformation, sample=None, *, rng=None, count: int = 20, tol: float = 1e-4
) -> IdentityReport:
    """``R̃(X,Y)Z = R(X,Y)Z + (β/α)(g(φY,Z)φX − g(φX,Z)φY − 2g(φX,Y)φZ)`` on ``D``."""
    F, Ft, rng = _pair_fields(T, sample, rng, count)
    N, d = F.points.shape
    X, Y, Z = (F.project_d(v) for v in rng.standard_normal((3, N, d)))
    c = T.beta / T.alpha
    pX, pY, pZ = F.phi_of(X), F.phi_of(Y), F.phi_of(Z)
    corr = c * (F.g(pY, Z)[:, None] * pX - F.g(pX, Z)[:, None] * pY - 2.0 * F.g(pX, Y)[:, None] * pZ)
    lhs = Ft.geo.curvature_op(X, Y, Z)
    rhs = F.geo.curvature_op(X, Y, Z) + corr
    scale = max(1.0, float(np.max(np.abs(lhs))))
    rep = IdentityReport()
    rep.add("curvature_relation",
            "R~(X,Y)Z = R(X,Y)Z + (beta/alpha)(g(phi Y,Z) phi X - g(phi X,Z) phi Y - 2 g(phi X,Y) phi Z), X,Y,Z in D",
            (lhs - rhs) / scale, tol)
    return rep


def einstein_constant_map(A: float, alpha: float) -> float:
    """η-Einstein constant of the deformed structure, ``(A + 2)/α + 2``."""
    if not alpha > 0:
        raise TannoError(f"alpha must be a positive real, got {alpha}")
    return (A + 2.0) / alpha + 2.0


@dataclass
class EinsteinMapCheck:
    source: EinsteinFit
    target: EinsteinFit
    predicted: float
    report: IdentityReport


def einstein_constants_check(T: TannoDeformation, *, rng=None, count: int = 20, tol: float = 1e-5) -> EinsteinMapCheck:
    """Fit both structures' constants and compare with :func:`einstein_constant_map`."""
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = T.source.sample_points(rng, count)
    src = eta_einstein_constants(T.source, pts)
    tgt = eta_einstein_constants(T.target, pts)
    predicted = einstein_constant_map(src.A, T.alpha)
    n = T.source.n
    rep = IdentityReport()
    rep.add("source_eta_einstein", "Ric = A g + B eta (x) eta (source fit residual)", [src.residual], tol)
    rep.add("target_eta_einstein", "Ric~ = A~ g~ + B~ eta~ (x) eta~ (target fit residual)", [tgt.residual], tol)
    rep.add("einstein_map", "A_alpha = (A + 2)/alpha + 2", [tgt.A - predicted], tol)
    rep.add("target_B", "B~ = 2n + A_alpha", [tgt.B - (2 * n + tgt.A)], tol)
    return EinsteinMapCheck(src, tgt, predicted, rep)


@dataclass
class MinimalityComparison:
    source_H: float
    target_H: float
    source_l_defect: float
    target_l_defect: float
    homothety: float
    report: IdentityReport


def _max_norm(geom, V):
    return float(np.sqrt(np.max(np.abs(geom.g(V, V)))))


def tangent_connection_check(imm: Immersion, T: TannoDeformation, *, tol: float = 1e-6) -> IdentityReport:
    """``∇̃`` and ``∇`` agree on vectors tangent to ``L``.

    The difference is ``−(β/α)(η(X)φY + η(Y)φX)``, so it vanishes on a
    Legendrian and generally not otherwise.
    """
    params = imm.quadrature().nodes
    F, dF, _ = imm.jets(params)
    G0 = T.source.fields(F).geo.Gamma
    G1 = T.target.fields(F).geo.Gamma
    rep = IdentityReport()
    rep.add("tangent_connection", "nabla~_X Y = nabla_X Y for X, Y tangent to L",
            np.einsum("nkij,nia,njb->nkab", G1 - G0, dF, dF), tol)
    return rep


def minimality_preservation_check(
    imm: Immersion, T: TannoDeformation, *, tol: float = 1e-6, homothety_tol: float = 1e-9
) -> MinimalityComparison:
    """Mean curvature and L-minimality in both structures, and the induced-metric homothety."""
    defect = legendrian_defect(imm, T.source)
    if defect > 1e-9:
        raise NotLegendrianError(f"{imm.name} is not Legendrian: defect {defect:.3e}")
    g0 = induced_geometry(imm, T.source)
    g1 = induced_geometry(imm, T.target)
    H0, H1 = _max_norm(g0, g0.H), _max_norm(g1, g1.H)
    l0, l1 = l_minimality_defect(g0).defect, l_minimality_defect(g1).defect
    hom = float(np.max(np.abs(g1.gL - T.alpha * g0.gL)))
    rep = IdentityReport()
    rep.add("homothety", "g~|_L = alpha g|_L", [hom], homothety_tol)
    rep.add("minimal_agree", "H = 0 for g iff H~ = 0 for g~", [0.0 if (H0 <= tol) == (H1 <= tol) else max(H0, H1)], 0.0)
    rep.add("l_minimal_agree", "div(phi H) = 0 for g iff for g~",
            [0.0 if (l0 <= tol) == (l1 <= tol) else max(l0, l1)], 0.0)
    rep.extend(tangent_connection_check(imm, T))
    return MinimalityComparison(H0, H1, l0, l1, hom, rep)


@dataclass
class StabilityEquivalence:
    source_spectrum: SpectrumResult
    target_spectrum: SpectrumResult
    A: float
    A_alpha: float
    source: Verdict
    target: Verdict
    report: IdentityReport


def stability_equivalence_check(
    imm: Immersion,
    T: TannoDeformation,
    *,
    k: int = 4,
    A: float | None = None,
    A_alpha: float | None = None,
    band: float = 1e-3,
    scale_tol: float = 1e-6,
) -> StabilityEquivalence:
    """Verdicts for the source and the deformed structure, each from its own spectrum and fit."""
    if A is None:
        A = eta_einstein_constants(T.source).A
    if A_alpha is None:
        A_alpha = eta_einstein_constants(T.target).A
    s0 = laplace_spectrum(imm, T.source, k)
    s1 = laplace_spectrum(imm, T.target, k)
    v0 = stability_verdict(s0.lambda1, A, T.source.eps, band=band)
    v1 = stability_verdict(s1.lambda1, A_alpha, T.target.eps, band=band / T.alpha)
    lam0 = np.asarray(s0.eigenvalues[1:])
    lam1 = np.asarray(s1.eigenvalues[1:])
    rep = IdentityReport()
    rep.add("eigenvalue_scaling", "lambda~_k = lambda_k / alpha (relative)", (lam1 * T.alpha - lam0) / lam0, scale_tol)
    rep.add_flag("verdicts_agree", "lambda_1 >= A + 2 iff lambda~_1 >= A_alpha - 2", v0.stable == v1.stable)
    if v1.corollary:
        rep.add_flag("corollary_path", "A_alpha + 2 eps~ <= 0 gives stability", v1.stable)
    return StabilityEquivalence(s0, s1, A, A_alpha, v0, v1, rep)
