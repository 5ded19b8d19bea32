"""Almost contact metric structures and their identity checks."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .expr import Expr, as_expr, eval_jet2_many, evaluate_many, parse, to_text
from .report import IdentityReport
from .tensor import MetricField, PointGeometry, check_signature


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class AmbientStructure:
    """A candidate pseudo-Sasakian structure ``(g, η, ξ, φ, ε)`` on one chart.

    ``phi[i][j]`` is the component ``φ^i_j``, so ``(φX)^i = φ^i_j X^j``.
    ``sample_box`` bounds the region where the chart is regular; random
    sample points are drawn from it.
    """

    name: str
    n: int
    metric: MetricField
    xi: tuple
    eta: tuple
    phi: tuple
    eps: int
    coord_names: tuple
    sample_box: tuple
    chart_note: str = ""
    einstein_hint: tuple | None = None

    def __post_init__(self):
        d = 2 * self.n + 1
        if self.metric.dim != d:
            raise StructureError(f"metric is {self.metric.dim}-dimensional, expected {d}")
        if len(self.xi) != d or len(self.eta) != d or len(self.phi) != d:
            raise StructureError("xi, eta and phi must have 2n+1 components")
        if any(len(row) != d for row in self.phi):
            raise StructureError("phi must be square")
        if self.eps not in (-1, 1):
            raise StructureError("epsilon must be +1 or -1")
        if len(self.sample_box) != d:
            raise StructureError("sample_box needs one interval per coordinate")

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def all_exprs(self) -> list[Expr]:
        d = self.dim
        return (
            self.metric.upper()
            + list(self.xi)
            + list(self.eta)
            + [self.phi[i][j] for i in range(d) for j in range(d)]
        )

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        box = np.asarray(self.sample_box, dtype=float)
        return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((count, self.dim))

    def fields(self, points) -> "StructureFields":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.dim
        jets = eval_jet2_many(self.all_exprs(), pts)
        m = len(self.metric.upper())
        gj, xj, ej, pj = jets[:m], jets[m : m + d], jets[m + d : m + 2 * d], jets[m + 2 * d :]
        G = self.metric._unpack([j.val for j in gj], ())
        dG = self.metric._unpack([j.grad for j in gj], (d,))
        d2G = self.metric._unpack([j.hess for j in gj], (d, d))
        geo = PointGeometry.from_jets(pts, G, dG, d2G)
        xi = np.stack([j.val for j in xj], axis=-1)
        dxi = np.stack([j.grad for j in xj], axis=-2)
        eta = np.stack([j.val for j in ej], axis=-1)
        deta = np.stack([j.grad for j in ej], axis=-2)
        N = pts.shape[0]
        phi = np.stack([j.val for j in pj], axis=-1).reshape(N, d, d)
        dphi = np.stack([j.grad for j in pj], axis=-2).reshape(N, d, d, d)
        return StructureFields(self, geo, xi, dxi, eta, deta, phi, dphi)

    def values(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Plain values ``(G, xi, eta, phi)`` without derivatives."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.dim
        vals = evaluate_many(self.all_exprs(), pts)
        m = len(self.metric.upper())
        G = self.metric._unpack(list(vals[:m]), ())
        xi = vals[m : m + d].T
        eta = vals[m + d : m + 2 * d].T
        phi = vals[m + 2 * d :].T.reshape(-1, d, d)
        return G, xi, eta, phi

    # serialisation ---------------------------------------------------------

    def to_text(self) -> dict:
        names = list(self.coord_names)
        d = self.dim
        return {
            "name": self.name,
            "n": self.n,
            "coordinates": names,
            "metric": [[to_text(self.metric.components[i][j], names) for j in range(d)] for i in range(d)],
            "signature": list(self.metric.signature),
            "xi": [to_text(e, names) for e in self.xi],
            "eta": [to_text(e, names) for e in self.eta],
            "phi": [[to_text(self.phi[i][j], names) for j in range(d)] for i in range(d)],
            "epsilon": self.eps,
            "sample_box": [list(map(float, b)) for b in self.sample_box],
        }

    @classmethod
    def from_text(cls, spec: dict) -> "AmbientStructure":
        n = int(spec["n"])
        d = 2 * n + 1
        names = list(spec.get("coordinates") or [f"x{i}" for i in range(d)])
        aliases = spec.get("aliases") or {}

        def p(s):
            return parse(str(s), names=names, aliases=aliases)

        rows = [[p(s) for s in row] for row in spec["metric"]]
        for i in range(d):
            for j in range(i):
                rows[i][j] = rows[j][i]
        metric = MetricField.from_rows(rows, spec.get("signature") or [1] * d)
        return cls(
            name=str(spec.get("name", "inline")),
            n=n,
            metric=metric,
            xi=tuple(p(s) for s in spec["xi"]),
            eta=tuple(p(s) for s in spec["eta"]),
            phi=tuple(tuple(p(s) for s in row) for row in spec["phi"]),
            eps=int(spec.get("epsilon", 1)),
            coord_names=tuple(names),
            sample_box=tuple(tuple(float(v) for v in b) for b in spec.get("sample_box") or [(-1.0, 1.0)] * d),
            chart_note=str(spec.get("chart_note", "")),
        )


def sabotage(S: AmbientStructure, *, phi_sign: float = 1.0, eta_scale: float = 1.0, xi_scale: float = 1.0) -> AmbientStructure:
    """A deliberately broken copy of ``S`` for negative controls."""
    d = S.dim
    tag = []
    if phi_sign != 1.0:
        tag.append(f"phi*{phi_sign:g}")
    if eta_scale != 1.0:
        tag.append(f"eta*{eta_scale:g}")
    if xi_scale != 1.0:
        tag.append(f"xi*{xi_scale:g}")
    return replace(
        S,
        name=f"{S.name}[{','.join(tag) or 'unchanged'}]",
        phi=tuple(tuple(as_expr(phi_sign) * S.phi[i][j] for j in range(d)) for i in range(d)),
        eta=tuple(as_expr(eta_scale) * e for e in S.eta),
        xi=tuple(as_expr(xi_scale) * e for e in S.xi),
        einstein_hint=None,
    )


@dataclass
class StructureFields:
    """Every structure tensor, with first derivatives, at a batch of points."""

    structure: AmbientStructure
    geo: PointGeometry
    xi: np.ndarray
    dxi: np.ndarray  # [..., i, k] = ∂_k ξ^i
    eta: np.ndarray
    deta: np.ndarray  # [..., j, k] = ∂_k η_j
    phi: np.ndarray
    dphi: np.ndarray  # [..., i, j, k] = ∂_k φ^i_j

    @property
    def eps(self) -> int:
        return self.structure.eps

    @property
    def points(self) -> np.ndarray:
        return self.geo.points

    def g(self, X, Y):
        return self.geo.inner(X, Y)

    def eta_of(self, X):
        return np.einsum("...i,...i->...", self.eta, X)

    def phi_of(self, X):
        return np.einsum("...ij,...j->...i", self.phi, X)

    def project_d(self, X):
        """Component of ``X`` in the contact distribution ker η."""
        return X - self.eta_of(X)[..., None] * self.xi

    def nabla_xi(self, X):
        return self.geo.nabla(X, self.xi, self.dxi)

    def nabla_phi(self, X, Y):
        """(∇_X φ)Y."""
        Gam = self.geo.Gamma
        D = (
            np.einsum("...ijk->...ikj", self.dphi)
            + np.einsum("...ikl,...lj->...ikj", Gam, self.phi)
            - np.einsum("...il,...lkj->...ikj", self.phi, Gam)
        )
        return np.einsum("...ikj,...k,...j->...i", D, X, Y)

    def nabla_eta(self, X, Y):
        """(∇_X η)Y."""
        D = np.einsum("...jk->...kj", self.deta) - np.einsum("...lkj,...l->...kj", self.geo.Gamma, self.eta)
        return np.einsum("...kj,...k,...j->...", D, X, Y)

    def omega(self) -> np.ndarray:
        """ω_ij = g(φ∂_i, ∂_j)."""
        return np.einsum("...jl,...li->...ij", self.geo.G, self.phi)

    def nabla_omega(self, X, Y, Z):
        """(∇_X ω)(Y, Z), differentiated from the product g·φ."""
        G, dG, Gam = self.geo.G, self.geo.dG, self.geo.Gamma
        w = self.omega()
        dw = np.einsum("...jlk,...li->...ijk", dG, self.phi) + np.einsum("...jl,...lik->...ijk", G, self.dphi)
        cov = (
            dw
            - np.einsum("...lki,...lj->...ijk", Gam, w)
            - np.einsum("...lkj,...il->...ijk", Gam, w)
        )
        return np.einsum("...ijk,...k,...i,...j->...", cov, X, Y, Z)

    def d_eta(self) -> np.ndarray:
        """dη(∂_i, ∂_j) = ∂_i η_j − ∂_j η_i (no factor ½)."""
        return np.einsum("...ji->...ij", self.deta) - self.deta


def _random_vectors(rng: np.random.Generator, N: int, d: int, k: int) -> list[np.ndarray]:
    return [rng.standard_normal((N, d)) for _ in range(k)]


def _sample(S: AmbientStructure, sample, rng, count) -> tuple[np.ndarray, np.random.Generator]:
    rng = rng if rng is not None else np.random.default_rng(0)
    if sample is None:
        sample = S.sample_points(rng, count)
    return np.atleast_2d(np.asarray(sample, dtype=float)), rng


def verify_sasakian(
    S: AmbientStructure,
    sample=None,
    *,
    rng: np.random.Generator | None = None,
    count: int = 20,
    tol: float = 1e-7,
) -> IdentityReport:
    """Check the almost contact metric axioms and the normality identity.

    Every check is evaluated with random vector arguments at each sample
    point; the reported residual is the largest absolute component of the
    defect.
    """
    pts, rng = _sample(S, sample, rng, count)
    F = S.fields(pts)
    N, d = pts.shape
    e = S.eps
    X, Y = _random_vectors(rng, N, d, 2)
    rep = IdentityReport()

    try:
        check_signature(F.geo.G, S.metric.signature, pts)
        rep.add_flag("signature", "eigenvalue signs of g match the declared signature", True)
    except ValueError as exc:
        rep.add_flag("signature", str(exc), False, 1.0)

    xi, eta = F.xi, F.eta
    rep.add("eta_xi", "eta(xi) = 1", F.eta_of(xi) - 1.0, tol)
    rep.add(
        "phi_squared",
        "phi^2 = -id + eta (x) xi",
        F.phi_of(F.phi_of(X)) + X - F.eta_of(X)[:, None] * xi,
        tol,
    )
    rep.add("g_xi_xi", "g(xi, xi) = epsilon", F.g(xi, xi) - e, tol)
    rep.add(
        "eta_metric_dual",
        "eta(X) = epsilon g(xi, X)",
        eta - e * np.einsum("...ij,...j->...i", F.geo.G, xi),
        tol,
    )
    rep.add(
        "phi_compatible",
        "g(phi X, phi Y) = g(X, Y) - epsilon eta(X) eta(Y)",
        F.g(F.phi_of(X), F.phi_of(Y)) - F.g(X, Y) + e * F.eta_of(X) * F.eta_of(Y),
        tol,
    )
    rep.add(
        "contact_metric",
        "d eta = 2 g(phi ., .), d eta(X,Y) = X eta(Y) - Y eta(X) - eta([X,Y])",
        F.d_eta() - 2.0 * np.einsum("...jl,...li->...ij", F.geo.G, F.phi),
        tol,
    )
    rep.add(
        "nabla_phi",
        "(nabla_X phi) Y = epsilon eta(Y) X - g(X, Y) xi",
        F.nabla_phi(X, Y) - e * F.eta_of(Y)[:, None] * X + F.g(X, Y)[:, None] * xi,
        tol,
    )
    rep.add("nabla_xi", "nabla xi = epsilon phi", F.nabla_xi(X) - e * F.phi_of(X), tol)
    rep.add(
        "xi_killing",
        "g(nabla_X xi, Y) + g(X, nabla_Y xi) = 0",
        F.g(F.nabla_xi(X), Y) + F.g(X, F.nabla_xi(Y)),
        tol,
    )
    return rep


def _rm_phi_defect(F: StructureFields, X, Y, Z, grouping: str = "all") -> np.ndarray:
    """R(X,Y)φZ − φR(X,Y)Z minus the four correction terms.

    ``grouping="all"`` multiplies all four terms by ε; ``"first_two"`` puts ε
    only on the first pair.  They differ only when ε = −1.
    """
    e = F.eps
    geo = F.geo
    phiX, phiY, phiZ = F.phi_of(X), F.phi_of(Y), F.phi_of(Z)
    lhs = geo.curvature_op(X, Y, phiZ) - F.phi_of(geo.curvature_op(X, Y, Z))
    a = -F.g(phiY, Z)[:, None] * X + F.g(phiX, Z)[:, None] * Y
    b = -F.g(Y, Z)[:, None] * phiX + F.g(X, Z)[:, None] * phiY
    if grouping == "all":
        rhs = e * (a + b)
    elif grouping == "first_two":
        rhs = e * a + b
    else:
        raise ValueError(grouping)
    return lhs - rhs


def curvature_identity_suite(
    S: AmbientStructure,
    sample=None,
    *,
    rng: np.random.Generator | None = None,
    count: int = 20,
    tol: float = 1e-6,
) -> IdentityReport:
    """Curvature and covariant-derivative identities of a pseudo-Sasakian manifold."""
    pts, rng = _sample(S, sample, rng, count)
    F = S.fields(pts)
    N, d = pts.shape
    e = S.eps
    n = S.n
    geo = F.geo
    X, Y, Z = _random_vectors(rng, N, d, 3)
    xi = F.xi
    rep = IdentityReport()

    Rm = geo.Rm
    scale = max(1.0, float(np.max(np.abs(Rm))))
    rep.add("riemann_antisymmetry", "Rm_abcd = -Rm_bacd = -Rm_abdc",
            np.concatenate([(Rm + np.swapaxes(Rm, -3, -4)).ravel(), (Rm + np.swapaxes(Rm, -1, -2)).ravel()]) / scale,
            1e-8)
    rep.add("riemann_pair_symmetry", "Rm_abcd = Rm_cdab",
            (Rm - np.einsum("...abcd->...cdab", Rm)) / scale, 1e-8)
    rep.add("first_bianchi", "Rm_abcd + Rm_bcad + Rm_cabd = 0",
            (Rm + np.einsum("...bcad->...abcd", Rm) + np.einsum("...cabd->...abcd", Rm)) / scale, 1e-8)
    rep.add("ricci_symmetry", "Ric_ab = Ric_ba", geo.Ric - np.swapaxes(geo.Ric, -1, -2), tol)

    rep.add("phi_squared", "phi^2 X = -X + eta(X) xi",
            F.phi_of(F.phi_of(X)) + X - F.eta_of(X)[:, None] * xi, tol)
    rep.add("nabla_phi", "(nabla_X phi) Y = -g(X,Y) xi + epsilon eta(Y) X",
            F.nabla_phi(X, Y) + F.g(X, Y)[:, None] * xi - e * F.eta_of(Y)[:, None] * X, tol)
    rep.add("phi_skew", "g(phi X, Y) = -g(X, phi Y)", F.g(F.phi_of(X), Y) + F.g(X, F.phi_of(Y)), tol)
    rep.add("nabla_eta", "omega(X,Y) = (nabla_X eta) Y = g(phi X, Y)",
            F.nabla_eta(X, Y) - F.g(F.phi_of(X), Y), tol)
    rep.add("nabla_omega", "(nabla_X omega)(Y,Z) = epsilon g(X,Z) eta(Y) - epsilon g(X,Y) eta(Z)",
            F.nabla_omega(X, Y, Z) - e * F.g(X, Z) * F.eta_of(Y) + e * F.g(X, Y) * F.eta_of(Z), tol)
    rep.add("curvature_xi", "R(X,Y) xi = eta(Y) X - eta(X) Y",
            geo.curvature_op(X, Y, xi) - F.eta_of(Y)[:, None] * X + F.eta_of(X)[:, None] * Y, tol)
    rep.add("curvature_xi_xi", "Rm(X, xi, xi, Y) = g(X,Y) - epsilon eta(X) eta(Y)",
            geo.rm(X, xi, xi, Y) - F.g(X, Y) + e * F.eta_of(X) * F.eta_of(Y), tol)
    rep.add("ricci_xi", "Ric(xi, xi) = 2n", geo.ricci(xi, xi) - 2 * n, tol)
    rep.add("curvature_phi",
            "R(X,Y) phi Z = phi R(X,Y) Z + epsilon(-g(phi Y,Z) X + g(phi X,Z) Y - g(Y,Z) phi X + g(X,Z) phi Y)",
            _rm_phi_defect(F, X, Y, Z, "all"), tol)
    return rep


@dataclass(frozen=True)
class EinsteinFit:
    A: float
    B: float
    residual: float
    relation_residual: float
    is_eta_einstein: bool

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "residual": self.residual,
            "relation_residual": self.relation_residual,
            "is_eta_einstein": self.is_eta_einstein,
        }


def eta_einstein_constants(
    S: AmbientStructure,
    sample=None,
    *,
    rng: np.random.Generator | None = None,
    count: int = 20,
    tol: float = 1e-6,
) -> EinsteinFit:
    """Least-squares fit of ``Ric = A g + B η⊗η`` over the sample points.

    A large residual means the structure is not η-Einstein; that is reported,
    not raised.  ``relation_residual`` is ``|B − (2n − εA)|``.
    """
    pts, rng = _sample(S, sample, rng, count)
    F = S.fields(pts)
    Ric = F.geo.Ric
    G = F.geo.G
    EE = np.einsum("...i,...j->...ij", F.eta, F.eta)
    M = np.stack([G.ravel(), EE.ravel()], axis=1)
    coef, *_ = np.linalg.lstsq(M, Ric.ravel(), rcond=None)
    A, B = (float(c) for c in coef)
    resid = float(np.max(np.abs(Ric - A * G - B * EE)))
    relation = abs(B - (2 * S.n - S.eps * A))
    return EinsteinFit(A, B, resid, relation, resid <= tol)
