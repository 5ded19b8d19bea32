"""Metric-dependent objects on a chart, batched over points.

Index conventions used throughout the package (``...`` is the batch axis):

* ``dG[..., i, j, k]`` is the partial of ``g_ij`` along coordinate ``k``.
* ``Gamma[..., k, i, j]`` is the Christoffel symbol ``Γ^k_ij``.
* ``R[..., l, k, i, j]`` are the components of ``R(∂_i, ∂_j)∂_k = R^l_kij ∂_l``
  with ``R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]``.
* ``Rm[..., a, b, c, d] = g(R(∂_a, ∂_b)∂_c, ∂_d)``.
* ``Ric[..., b, c]`` is the trace of ``X ↦ R(X, ∂_b)∂_c``; the round unit
  sphere gets ``Ric = (d − 1) g``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import Expr, eval_jet2_many, evaluate_many


class SingularMetricError(ArithmeticError):
    def __init__(self, message: str, point=None):
        self.point = None if point is None else tuple(float(v) for v in point)
        where = "" if point is None else f" at {self.point}"
        super().__init__(message + where)


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class MetricField:
    """Symmetric matrix of expressions with a declared signature.

    ``components[i][j]`` and ``components[j][i]`` are the same tree.
    """

    components: tuple
    signature: tuple

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Expr]], signature: Sequence[int]) -> "MetricField":
        d = len(rows)
        comps = [[None] * d for _ in range(d)]
        for i in range(d):
            if len(rows[i]) != d:
                raise ValueError("metric must be square")
            for j in range(i, d):
                comps[i][j] = comps[j][i] = rows[i][j]
        sig = tuple(int(s) for s in signature)
        if len(sig) != d or any(s not in (-1, 1) for s in sig):
            raise ValueError(f"signature must be {d} entries of +1/-1")
        return cls(tuple(tuple(r) for r in comps), sig)

    @property
    def dim(self) -> int:
        return len(self.components)

    def upper(self) -> list[Expr]:
        d = self.dim
        return [self.components[i][j] for i in range(d) for j in range(i, d)]

    def _unpack(self, arrs: list[np.ndarray], tail: tuple) -> np.ndarray:
        d = self.dim
        N = arrs[0].shape[0]
        out = np.empty((N, d, d) + tail)
        k = 0
        for i in range(d):
            for j in range(i, d):
                out[:, i, j] = arrs[k]
                out[:, j, i] = arrs[k]
                k += 1
        return out

    def values(self, points) -> np.ndarray:
        vals = evaluate_many(self.upper(), points)
        return self._unpack(list(vals), ())

    def jets(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        js = eval_jet2_many(self.upper(), points)
        d = self.dim
        G = self._unpack([j.val for j in js], ())
        dG = self._unpack([j.grad for j in js], (d,))
        d2G = self._unpack([j.hess for j in js], (d, d))
        return G, dG, d2G


def check_signature(G: np.ndarray, signature: Sequence[int], points=None) -> None:
    """Raise if the eigenvalue signs of ``G`` differ from ``signature`` at any point."""
    ev = np.linalg.eigvalsh(G)
    pos = np.sum(ev > 0, axis=-1)
    neg = np.sum(ev < 0, axis=-1)
    want_pos = sum(1 for s in signature if s > 0)
    want_neg = len(signature) - want_pos
    bad = (pos != want_pos) | (neg != want_neg)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        where = "" if points is None else f" at {tuple(np.asarray(points)[k])}"
        raise SignatureError(
            f"metric has signature (+{pos[k]}, -{neg[k]}), expected (+{want_pos}, -{want_neg}){where}"
        )


def inverse(G: np.ndarray, points=None) -> np.ndarray:
    det = np.linalg.det(G)
    scale = np.max(np.abs(G), axis=(-1, -2)) ** G.shape[-1]
    bad = np.abs(det) <= 1e-14 * np.maximum(scale, 1e-300)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise SingularMetricError("singular metric", None if points is None else np.asarray(points)[k])
    return np.linalg.inv(G)


def christoffel_from(Ginv: np.ndarray, dG: np.ndarray) -> np.ndarray:
    """Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)."""
    T = (
        np.einsum("...jli->...lij", dG)
        + np.einsum("...ilj->...lij", dG)
        - np.einsum("...ijl->...lij", dG)
    )
    return 0.5 * np.einsum("...kl,...lij->...kij", Ginv, T)


def christoffel_derivative(Ginv: np.ndarray, dG: np.ndarray, d2G: np.ndarray) -> np.ndarray:
    """``dGamma[..., k, i, j, m]`` = ∂_m Γ^k_ij, from exact second partials of g."""
    T = (
        np.einsum("...jli->...lij", dG)
        + np.einsum("...ilj->...lij", dG)
        - np.einsum("...ijl->...lij", dG)
    )
    dT = (
        np.einsum("...jlim->...lijm", d2G)
        + np.einsum("...iljm->...lijm", d2G)
        - np.einsum("...ijlm->...lijm", d2G)
    )
    dGinv = -np.einsum("...ka,...abm,...bl->...klm", Ginv, dG, Ginv)
    return 0.5 * (
        np.einsum("...klm,...lij->...kijm", dGinv, T) + np.einsum("...kl,...lijm->...kijm", Ginv, dT)
    )


def riemann_from(Gamma: np.ndarray, dGamma: np.ndarray) -> np.ndarray:
    """R^l_kij = ∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik."""
    dterm = np.einsum("...ljki->...lkij", dGamma)
    R = dterm - np.swapaxes(dterm, -1, -2)
    quad = np.einsum("...lim,...mjk->...lkij", Gamma, Gamma)
    return R + quad - np.swapaxes(quad, -1, -2)


def lower_riemann(G: np.ndarray, R: np.ndarray) -> np.ndarray:
    return np.einsum("...dl,...lcab->...abcd", G, R)


def ricci_from(R: np.ndarray) -> np.ndarray:
    return np.einsum("...acab->...bc", R)


@dataclass
class ConnectionCoefficients:
    Gamma: np.ndarray  # (..., k, i, j)


@dataclass
class CurvatureTensor:
    Rm: np.ndarray  # all indices down
    Ric: np.ndarray
    R: np.ndarray  # R^l_kij


@dataclass
class PointGeometry:
    """Metric, connection and curvature of one metric at a batch of points."""

    points: np.ndarray
    G: np.ndarray
    Ginv: np.ndarray
    dG: np.ndarray
    Gamma: np.ndarray
    dGamma: np.ndarray
    R: np.ndarray
    Rm: np.ndarray
    Ric: np.ndarray

    @classmethod
    def from_jets(cls, points, G, dG, d2G) -> "PointGeometry":
        Ginv = inverse(G, points)
        Gamma = christoffel_from(Ginv, dG)
        dGamma = christoffel_derivative(Ginv, dG, d2G)
        R = riemann_from(Gamma, dGamma)
        Rm = lower_riemann(G, R)
        Ric = ricci_from(R)
        return cls(np.asarray(points), G, Ginv, dG, Gamma, dGamma, R, Rm, Ric)

    @classmethod
    def of(cls, metric: MetricField, points) -> "PointGeometry":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        G, dG, d2G = metric.jets(pts)
        return cls.from_jets(pts, G, dG, d2G)

    # vector helpers --------------------------------------------------------

    def inner(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...i,...j->...", self.G, X, Y)

    def nabla(self, X: np.ndarray, Y: np.ndarray, dY: np.ndarray) -> np.ndarray:
        """∇_X Y for a vector field with values ``Y`` and partials ``dY[..., i, k] = ∂_k Y^i``."""
        return np.einsum("...ik,...k->...i", dY, X) + np.einsum("...ikl,...k,...l->...i", self.Gamma, X, Y)

    def curvature_op(self, X, Y, Z) -> np.ndarray:
        """R(X, Y)Z."""
        return np.einsum("...lkij,...i,...j,...k->...l", self.R, X, Y, Z)

    def rm(self, A, B, C, D) -> np.ndarray:
        return np.einsum("...abcd,...a,...b,...c,...d->...", self.Rm, A, B, C, D)

    def ricci(self, X, Y) -> np.ndarray:
        return np.einsum("...ab,...a,...b->...", self.Ric, X, Y)


def christoffel(metric: MetricField, points) -> ConnectionCoefficients:
    """Levi-Civita connection coefficients at ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    G, dG, _ = metric.jets(pts)
    return ConnectionCoefficients(christoffel_from(inverse(G, pts), dG))


def riemann(metric: MetricField, points) -> CurvatureTensor:
    geo = PointGeometry.of(metric, points)
    return CurvatureTensor(geo.Rm, geo.Ric, geo.R)


def sectional_curvature(geo: PointGeometry, X, Y) -> np.ndarray:
    num = geo.rm(X, Y, Y, X)
    den = geo.inner(X, X) * geo.inner(Y, Y) - geo.inner(X, Y) ** 2
    return num / den


def lower(G: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", G, v)


def raise_(Ginv: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", Ginv, w)


def contract(Ginv: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Full contraction g^ij T_ij."""
    return np.einsum("...ij,...ij->...", Ginv, T)


def metric_values(metric: MetricField, points) -> np.ndarray:
    return metric.values(points)


def evaluate_vector(exprs: Sequence[Expr], points) -> np.ndarray:
    """Values of a list of component expressions, shape (N, len(exprs))."""
    return evaluate_many(list(exprs), points).T
