"""Immersed submanifolds ``F: L → M`` and their induced geometry.

Parameter-space quantities carry Latin indices ``a, b, c`` (length ``n``),
ambient ones ``i, j, k`` (length ``2n + 1``).  ``dF[..., i, a]`` is
``∂_a F^i`` and the second fundamental form is stored with ambient
components, ``h[..., i, a, b] = h(∂_a, ∂_b)^i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .contact import AmbientStructure, StructureFields
from .expr import Expr, eval_jet2_many, evaluate_many, parse, to_text
from .quadrature import Grid, tensor_grid
from .report import IdentityReport
from .tensor import christoffel_from, inverse, lower_riemann, ricci_from, riemann_from

DIFF_STEP = 1e-5


class ImmersionError(ValueError):
    pass


class RankDeficiencyError(ImmersionError):
    pass


class NotSpacelikeError(ImmersionError):
    pass


class NotLegendrianError(ImmersionError):
    pass


@dataclass(frozen=True)
class Immersion:
    """A parametrized map from a box ``domain ⊂ R^n`` into an ambient chart.

    Axes flagged ``periodic`` are identified end to end; an immersion whose
    axes are all periodic describes a closed ``L``.  ``eigen_hint`` may hold
    a known first eigenfunction of the induced Laplacian.
    """

    name: str
    components: tuple
    domain: tuple
    periodic: tuple
    grid: tuple
    param_names: tuple = ()
    eigen_hint: Expr | None = None
    spacelike: bool = True

    def __post_init__(self):
        n = len(self.domain)
        if not (len(self.periodic) == len(self.grid) == n):
            raise ImmersionError("domain, periodic and grid must have one entry per parameter")
        if len(self.components) != 2 * n + 1:
            raise ImmersionError(
                f"an {n}-dimensional immersion needs {2 * n + 1} components, got {len(self.components)}"
            )
        if not self.param_names:
            object.__setattr__(self, "param_names", tuple(f"u{a}" for a in range(n)))

    @property
    def n(self) -> int:
        return len(self.domain)

    @property
    def closed(self) -> bool:
        return all(self.periodic)

    def quadrature(self, counts: Sequence[int] | None = None) -> Grid:
        return tensor_grid(self.domain, self.periodic, counts or self.grid)

    def with_grid(self, counts: Sequence[int]) -> "Immersion":
        return Immersion(
            self.name, self.components, self.domain, self.periodic, tuple(int(c) for c in counts),
            self.param_names, self.eigen_hint, self.spacelike,
        )

    def values(self, params) -> np.ndarray:
        return evaluate_many(list(self.components), np.atleast_2d(params)).T

    def jets(self, params) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        js = eval_jet2_many(list(self.components), np.atleast_2d(params))
        F = np.stack([j.val for j in js], axis=-1)
        dF = np.stack([j.grad for j in js], axis=-2)
        ddF = np.stack([j.hess for j in js], axis=-3)
        return F, dF, ddF

    def map_is_periodic(self, tol: float = 1e-9, probes: int = 7) -> bool:
        """True when the component map itself closes up across every periodic axis."""
        rng = np.random.default_rng(12345)
        box = np.asarray(self.domain, dtype=float)
        for a, per in enumerate(self.periodic):
            if not per:
                continue
            p = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((probes, self.n))
            lo, hi = p.copy(), p.copy()
            lo[:, a], hi[:, a] = box[a, 0], box[a, 1]
            if np.max(np.abs(self.values(lo) - self.values(hi))) > tol:
                return False
        return True

    def to_text(self) -> dict:
        names = list(self.param_names)
        out = {
            "name": self.name,
            "parameters": names,
            "components": [to_text(c, names) for c in self.components],
            "domain": [list(b) for b in self.domain],
            "periodic": list(self.periodic),
            "grid": list(self.grid),
        }
        if self.eigen_hint is not None:
            out["eigen_hint"] = to_text(self.eigen_hint, names)
        return out

    @classmethod
    def from_text(cls, spec: dict) -> "Immersion":
        domain = [tuple(float(v) for v in b) for b in spec["domain"]]
        n = len(domain)
        names = list(spec.get("parameters") or [f"u{a}" for a in range(n)])
        aliases = spec.get("aliases") or {}

        def p(s):
            return parse(str(s), names=names, aliases=aliases)

        hint = spec.get("eigen_hint")
        return cls(
            name=str(spec.get("name", "inline")),
            components=tuple(p(s) for s in spec["components"]),
            domain=tuple(domain),
            periodic=tuple(bool(v) for v in spec.get("periodic", [True] * n)),
            grid=tuple(int(v) for v in spec.get("grid", [64] * n)),
            param_names=tuple(names),
            eigen_hint=None if hint is None else p(hint),
            spacelike=bool(spec.get("spacelike", True)),
        )


def _check_dims(imm: Immersion, S: AmbientStructure) -> None:
    if imm.n != S.n:
        raise ImmersionError(f"dimension mismatch: L has dimension {imm.n}, ambient has n = {S.n}")


def legendrian_defect(imm: Immersion, S: AmbientStructure, params=None) -> float:
    """max over nodes and directions of ``|η(∂_a F)|``."""
    _check_dims(imm, S)
    params = imm.quadrature().nodes if params is None else np.atleast_2d(params)
    F, dF, _ = imm.jets(params)
    eta = evaluate_many(list(S.eta), F).T
    return float(np.max(np.abs(np.einsum("ni,nia->na", eta, dF))))


def induced_metric_values(S: AmbientStructure, F: np.ndarray, dF: np.ndarray) -> np.ndarray:
    G = S.metric.values(F)
    return np.einsum("nij,nia,njb->nab", G, dF, dF)


def _induced_metric_jets(S: AmbientStructure, F, dF, ddF, G=None, dG=None):
    """``g_L`` and its exact parameter derivatives ``dgL[..., a, b, c] = ∂_c g_L(a, b)``."""
    if G is None:
        G, dG, _ = S.metric.jets(F)
    gL = np.einsum("nij,nia,njb->nab", G, dF, dF)
    dgL = (
        np.einsum("nijk,nkc,nia,njb->nabc", dG, dF, dF, dF)
        + np.einsum("nij,niac,njb->nabc", G, ddF, dF)
        + np.einsum("nij,nia,njbc->nabc", G, dF, ddF)
    )
    return gL, dgL


def intrinsic_christoffel(imm: Immersion, S: AmbientStructure, params) -> np.ndarray:
    F, dF, ddF = imm.jets(params)
    gL, dgL = _induced_metric_jets(S, F, dF, ddF)
    return christoffel_from(inverse(gL, params), dgL)


def parameter_derivative(fn: Callable[[np.ndarray], np.ndarray], params, step: float = DIFF_STEP) -> np.ndarray:
    """Central difference of ``fn`` along each parameter; derivative axis last.

    This is the package's only differencing of exact data; it is used where
    one more derivative than the jets carry is needed.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    out = []
    for a in range(params.shape[1]):
        e = np.zeros(params.shape[1])
        e[a] = step
        out.append((fn(params + e) - fn(params - e)) / (2.0 * step))
    return np.stack(out, axis=-1)


def _gram_schmidt(G: np.ndarray, vectors: np.ndarray, tol: float = 1e-10):
    """Orthonormalize the columns of ``vectors`` (N, d, n) under ``G``, in column order.

    Returns frames, signs ``ε_i`` and the coefficient matrix ``C`` with
    ``frame = vectors @ C``.
    """
    N, d, n = vectors.shape
    frame = np.zeros_like(vectors)
    coeff = np.zeros((N, n, n))
    signs = np.zeros((N, n))
    for i in range(n):
        v = vectors[:, :, i].copy()
        c = np.zeros((N, n))
        c[:, i] = 1.0
        for j in range(i):
            proj = signs[:, j] * np.einsum("nkl,nk,nl->n", G, v, frame[:, :, j])
            v -= proj[:, None] * frame[:, :, j]
            c -= proj[:, None] * coeff[:, :, j]
        norm2 = np.einsum("nkl,nk,nl->n", G, v, v)
        scale = np.einsum("nkl,nk,nl->n", G, vectors[:, :, i], vectors[:, :, i])
        if np.any(np.abs(norm2) <= tol * np.maximum(np.abs(scale), 1e-300)):
            k = int(np.argmin(np.abs(norm2)))
            raise RankDeficiencyError(f"tangent frame degenerates at node {k}")
        s = np.sign(norm2)
        r = np.sqrt(np.abs(norm2))
        frame[:, :, i] = v / r[:, None]
        coeff[:, :, i] = c / r[:, None]
        signs[:, i] = s
    return frame, signs, coeff


@dataclass
class InducedGeometry:
    """Induced metric, frames and extrinsic curvature at a set of parameter points."""

    immersion: Immersion
    structure: AmbientStructure
    params: np.ndarray
    F: np.ndarray
    dF: np.ndarray
    ddF: np.ndarray
    amb: StructureFields
    gL: np.ndarray
    gLinv: np.ndarray
    dgL: np.ndarray
    density: np.ndarray
    Gamma_L: np.ndarray
    h: np.ndarray
    H: np.ndarray
    frame: np.ndarray
    frame_signs: np.ndarray
    frame_coeff: np.ndarray
    weights: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.immersion.n

    def push(self, v: np.ndarray) -> np.ndarray:
        """Push a parameter-space vector forward to ambient components."""
        return np.einsum("nia,n...a->n...i", self.dF, v) if v.ndim > 2 else np.einsum("nia,na->ni", self.dF, v)

    def g(self, X, Y):
        return self.amb.g(X, Y)

    def tangent_coords(self, W: np.ndarray) -> np.ndarray:
        """Parameter components of the tangential part of an ambient vector."""
        return np.einsum("nab,nij,nj,nib->na", self.gLinv, self.amb.geo.G, W, self.dF)

    def tangent_part(self, W):
        return self.push(self.tangent_coords(W))

    def normal_part(self, W):
        return W - self.tangent_part(W)

    def normal_frame(self) -> np.ndarray:
        """``(ξ, φe_1, …, φe_n)`` as columns, shape (N, d, n+1)."""
        phi_e = np.einsum("nij,nja->nia", self.amb.phi, self.frame)
        return np.concatenate([self.amb.xi[:, :, None], phi_e], axis=2)

    def second_ff(self, X, Y):
        """h(X, Y) for parameter-space vectors X, Y."""
        return np.einsum("niab,na,nb->ni", self.h, X, Y)

    def volume(self) -> float:
        if self.weights is None:
            raise ValueError("geometry was built off the quadrature grid")
        return float(self.weights @ self.density)

    def integrate(self, values) -> float:
        if self.weights is None:
            raise ValueError("geometry was built off the quadrature grid")
        return float(self.weights @ (np.asarray(values) * self.density))

    def laplacian_and_hessian(self, df: np.ndarray, ddf: np.ndarray):
        """Positive Laplacian ``Δf`` and covariant Hessian ``∇²f`` from parameter partials."""
        hess = ddf - np.einsum("ncab,nc->nab", self.Gamma_L, df)
        return -np.einsum("nab,nab->n", self.gLinv, hess), hess

    @cached_property
    def intrinsic(self):
        """Intrinsic ``(R^d_cab, Rm, Ric)`` of ``g_L``, via one differencing layer on ``Γ_L``."""
        dGam = parameter_derivative(
            lambda p: intrinsic_christoffel(self.immersion, self.structure, p), self.params
        )
        R = riemann_from(self.Gamma_L, dGam)
        return R, lower_riemann(self.gL, R), ricci_from(R)


def induced_geometry(
    imm: Immersion,
    S: AmbientStructure,
    params=None,
    *,
    require_spacelike: bool | None = None,
) -> InducedGeometry:
    """Induced geometry at ``params`` (default: the immersion's quadrature nodes)."""
    _check_dims(imm, S)
    weights = None
    if params is None:
        grid = imm.quadrature()
        params, weights = grid.nodes, grid.weights
    params = np.atleast_2d(np.asarray(params, dtype=float))
    F, dF, ddF = imm.jets(params)
    amb = S.fields(F)
    G, dG = amb.geo.G, amb.geo.dG
    sv = np.linalg.svd(dF, compute_uv=False)
    if np.any(sv[:, -1] <= 1e-8):
        k = int(np.argmin(sv[:, -1]))
        raise RankDeficiencyError(f"Jacobian loses rank at parameters {tuple(params[k])}")
    gL, dgL = _induced_metric_jets(S, F, dF, ddF, G, dG)
    spacelike = imm.spacelike if require_spacelike is None else require_spacelike
    if spacelike:
        ev = np.linalg.eigvalsh(gL)
        if np.any(ev[:, 0] <= 0):
            k = int(np.argmin(ev[:, 0]))
            raise NotSpacelikeError(f"induced metric is not positive definite at parameters {tuple(params[k])}")
    gLinv = inverse(gL, params)
    Gamma_L = christoffel_from(gLinv, dgL)
    accel = ddF + np.einsum("nkij,nia,njb->nkab", amb.geo.Gamma, dF, dF)
    tang = np.einsum("ncd,nij,niab,njd->ncab", gLinv, G, accel, dF)
    h = accel - np.einsum("nkc,ncab->nkab", dF, tang)
    H = np.einsum("nab,nkab->nk", gLinv, h)
    frame, signs, coeff = _gram_schmidt(G, dF)
    density = np.sqrt(np.abs(np.linalg.det(gL)))
    return InducedGeometry(
        imm, S, params, F, dF, ddF, amb, gL, gLinv, dgL, density, Gamma_L, h, H, frame, signs, coeff, weights
    )


def normal_field_derivative(geom: InducedGeometry, field_fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """``∇̄_{∂_a} V`` for a field along ``L`` given as a function of the parameters.

    Returns shape (N, d, n).
    """
    dV = parameter_derivative(field_fn, geom.params)
    V = field_fn(geom.params)
    return dV + np.einsum("nkij,nia,nj->nka", geom.amb.geo.Gamma, geom.dF, V)


def _normal_combination(imm: Immersion, S: AmbientStructure, coeffs: np.ndarray):
    """Field ``c_0 ξ + Σ c_a φ ∂_a F`` along ``L`` as a function of the parameters."""

    def fn(params):
        F, dF, _ = imm.jets(params)
        _, xi, _, phi = S.values(F)
        return coeffs[0] * xi + np.einsum("nij,nja,a->ni", phi, dF, coeffs[1:])

    return fn


def submanifold_checks(
    geom: InducedGeometry,
    *,
    rng: np.random.Generator | None = None,
    legendrian: bool = True,
    tol: float = 1e-6,
) -> IdentityReport:
    """Frame, second-fundamental-form and shape-operator consistency at every node."""
    rng = rng if rng is not None else np.random.default_rng(0)
    rep = IdentityReport()
    N, n = geom.params.shape
    G = geom.amb.geo.G
    gram = np.einsum("nij,nia,njb->nab", G, geom.frame, geom.frame)
    rep.add("frame_orthonormal", "g(e_i, e_j) = eps_i delta_ij",
            gram - np.einsum("na,ab->nab", geom.frame_signs, np.eye(n)), 1e-9)
    rep.add("h_symmetric", "h(X, Y) = h(Y, X)", geom.h - np.swapaxes(geom.h, -1, -2), 1e-7)
    rep.add("h_normal", "g(h(X, Y), dF Z) = 0",
            np.einsum("nij,niab,njc->nabc", G, geom.h, geom.dF), 1e-7)
    if legendrian:
        NF = geom.normal_frame()
        full = np.concatenate([geom.frame, NF], axis=2)
        gram_full = np.einsum("nij,nia,njb->nab", G, full, full)
        det = np.abs(np.linalg.det(gram_full))
        rep.add("normal_frame_complete", "{e_i, xi, phi e_i} spans TM (|Gram det| bounded below)",
                np.maximum(0.0, 1e-6 - det), 0.0)
        rep.add("h_xi", "g(h(X, Y), xi) = 0",
                np.einsum("nij,niab,nj->nab", G, geom.h, geom.amb.xi), tol)
        phi_dF = np.einsum("nij,njc->nic", geom.amb.phi, geom.dF)
        C = np.einsum("nij,niab,njc->nabc", G, geom.h, phi_dF)
        rep.add("cubic_form_symmetric", "g(h(X, Y), phi Z) is symmetric in X, Y, Z",
                np.concatenate([(C - np.einsum("nabc->nacb", C)).ravel(), (C - np.einsum("nabc->ncba", C)).ravel()]),
                tol)
        coeffs = rng.standard_normal(n + 1)
        fn = _normal_combination(geom.immersion, geom.structure, coeffs)
        V = fn(geom.params)
        nablaV = normal_field_derivative(geom, fn)
        shape = -np.einsum("nij,nia,njb->nab", G, nablaV, geom.dF)
        rep.add("shape_operator", "g(A_V X, Y) = g(h(X, Y), V), A_V X = -(nabla_X V)^T",
                shape - np.einsum("nij,niab,nj->nab", G, geom.h, V), tol)
    return rep


def _random_tangent(geom: InducedGeometry, rng, k: int) -> list[np.ndarray]:
    N, n = geom.params.shape
    return [rng.standard_normal((N, n)) for _ in range(k)]


def gauss_equation_check(
    imm: Immersion,
    S: AmbientStructure,
    params=None,
    *,
    rng: np.random.Generator | None = None,
    count: int = 12,
    tol: float = 1e-5,
) -> IdentityReport:
    """Ambient curvature on tangent vectors against intrinsic curvature and ``h``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if params is None:
        box = np.asarray(imm.domain, dtype=float)
        params = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((count, imm.n))
    geom = induced_geometry(imm, S, params)
    a, b, c, d = _random_tangent(geom, rng, 4)
    A, B, C, D = (geom.push(v) for v in (a, b, c, d))
    _, RmL, _ = geom.intrinsic
    intrinsic = np.einsum("nabcd,na,nb,nc,nd->n", RmL, a, b, c, d)
    ambient = geom.amb.geo.rm(A, B, C, D)
    h = geom.second_ff
    extrinsic = -geom.g(h(b, c), h(a, d)) + geom.g(h(a, c), h(b, d))
    rep = IdentityReport()
    rep.add("gauss_equation", "Rm_M(A,B,C,D) = Rm_L(A,B,C,D) - g(h(B,C), h(A,D)) + g(h(A,C), h(B,D))",
            ambient - intrinsic - extrinsic, tol)
    return rep


def trace_curvature_check(
    imm: Immersion,
    S: AmbientStructure,
    params=None,
    *,
    rng: np.random.Generator | None = None,
    tol: float = 1e-6,
) -> IdentityReport:
    """Frame traces of the ambient curvature along a Legendrian."""
    rng = rng if rng is not None else np.random.default_rng(0)
    geom = induced_geometry(imm, S, params)
    amb = geom.amb
    xi = amb.xi
    phi_e = np.einsum("nij,nja->nia", amb.phi, geom.frame)
    Rm = amb.geo.Rm
    eps_i = geom.frame_signs
    tr = np.einsum("nx,nabcd,nax,nb,nc,ndx->n", eps_i, Rm, phi_e, xi, xi, phi_e)
    VH = amb.project_d(rng.standard_normal(xi.shape))
    mixed = np.einsum("nx,nabcd,nax,nb,ncx,nd->n", eps_i, Rm, phi_e, xi, phi_e, VH)
    rep = IdentityReport()
    rep.add("trace_phi_xi_xi_phi", "sum_i eps_i Rm(phi e_i, xi, xi, phi e_i) = n", tr - S.n, tol)
    rep.add("trace_phi_xi_phi_V", "sum_i eps_i Rm(phi e_i, xi, phi e_i, V_H) = 0", mixed, tol)
    return rep
