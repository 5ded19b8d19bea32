"""Low Laplace–Beltrami spectrum of a closed ``L`` and the stability verdict."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .contact import AmbientStructure
from .submanifold import Immersion, induced_geometry

DENSE_LIMIT = 1600
MARGINAL_BAND = 1e-3
THRESHOLD_ZERO = 1e-9  # fitted constants carry roundoff; treat |A + 2ε| below this as zero


class SpectrumError(ValueError):
    pass


@dataclass
class SpectrumResult:
    eigenvalues: list
    raw_eigenvalues: list
    resolution: tuple
    error_estimate: float  # for λ₁
    method: str
    history: list = field(default_factory=list)

    @property
    def lambda1(self) -> float:
        return self.eigenvalues[1]

    def to_dict(self) -> dict:
        return {
            "eigenvalues": list(self.eigenvalues),
            "raw_eigenvalues": list(self.raw_eigenvalues),
            "resolution": list(self.resolution),
            "error_estimate": self.error_estimate,
            "method": self.method,
            "history": [[list(r), lam] for r, lam in self.history],
        }


def _check_closed(imm: Immersion) -> None:
    if not imm.closed:
        raise SpectrumError(f"{imm.name}: the spectrum needs a closed L (every parameter axis periodic)")
    if imm.n not in (1, 2):
        raise SpectrumError("the grid Laplacian is implemented for dim L in {1, 2}")


def _matrices_1d(imm: Immersion, S: AmbientStructure, m: int):
    (lo, hi), = imm.domain
    h = (hi - lo) / m
    nodes = lo + h * np.arange(m)
    geom = induced_geometry(imm, S, nodes[:, None])
    mids = induced_geometry(imm, S, (nodes + 0.5 * h)[:, None])
    q = 1.0 / np.sqrt(mids.gL[:, 0, 0])  # √g g^{-1} in one dimension
    i = np.arange(m)
    j = (i + 1) % m
    w = q / h
    K = sp.coo_matrix(
        (np.concatenate([w, w, -w, -w]), (np.concatenate([i, j, i, j]), np.concatenate([i, j, j, i]))),
        shape=(m, m),
    ).tocsr()
    M = geom.density * h
    return K, M


def _matrices_2d(imm: Immersion, S: AmbientStructure, shape: tuple):
    grid = imm.quadrature(shape)
    geom = induced_geometry(imm, S, grid.nodes)
    mu, mv = shape
    hu = (imm.domain[0][1] - imm.domain[0][0]) / mu
    hv = (imm.domain[1][1] - imm.domain[1][0]) / mv
    Q = geom.density[:, None, None] * geom.gLinv
    idx = np.arange(mu * mv).reshape(mu, mv)
    rows, cols, vals = [], [], []
    w = hu * hv / 4.0
    for s, t in itertools.product((1, -1), repeat=2):
        p = idx.ravel()
        pu = np.roll(idx, -s, axis=0).ravel()
        pv = np.roll(idx, -t, axis=1).ravel()
        # gradient = D @ (f_p, f_pu, f_pv)
        D = np.array([[-1.0 / (s * hu), 1.0 / (s * hu), 0.0], [-1.0 / (t * hv), 0.0, 1.0 / (t * hv)]])
        local = w * np.einsum("ax,nab,by->nxy", D, Q, D)
        nodes = np.stack([p, pu, pv], axis=1)
        for x in range(3):
            for y in range(3):
                rows.append(nodes[:, x])
                cols.append(nodes[:, y])
                vals.append(local[:, x, y])
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(mu * mv,) * 2)
    return K.tocsr(), geom.density * hu * hv


def _solve(K, M: np.ndarray, k: int) -> np.ndarray:
    N = K.shape[0]
    if N <= DENSE_LIMIT:
        ev = scipy.linalg.eigh(K.toarray(), np.diag(M), eigvals_only=True, subset_by_index=[0, min(k, N) - 1])
    else:
        v0 = np.ones(N)
        ev = spla.eigsh(K, k=k, M=sp.diags(M), sigma=-1.0, which="LM", v0=v0, return_eigenvectors=False)
    ev = np.sort(np.real(ev))
    ev[0] = 0.0 if abs(ev[0]) < 1e-8 * max(1.0, abs(ev[-1])) else ev[0]
    return ev


def grid_eigenvalues(imm: Immersion, S: AmbientStructure, k: int, resolution) -> np.ndarray:
    """Smallest ``k`` eigenvalues of the divergence-form grid Laplacian at one resolution."""
    _check_closed(imm)
    if imm.n == 1:
        K, M = _matrices_1d(imm, S, int(resolution[0]))
    else:
        K, M = _matrices_2d(imm, S, tuple(int(r) for r in resolution))
    return _solve(K, M, k)


def laplace_spectrum(
    imm: Immersion,
    S: AmbientStructure,
    k: int = 6,
    *,
    resolution=None,
    tol: float = 0.01,
    max_nodes: int = 128,
) -> SpectrumResult:
    """Low spectrum of the positive Laplacian of the induced metric.

    The resolution is doubled until ``λ₁`` moves by less than ``tol``
    (relative); the reported eigenvalues are Richardson-extrapolated from
    the last two resolutions assuming second-order convergence.
    """
    _check_closed(imm)
    if k < 2:
        raise SpectrumError("k must be at least 2 to include lambda_1")
    res = np.array(resolution or imm.grid, dtype=int)
    prev = grid_eigenvalues(imm, S, k, res)
    history = [(tuple(int(r) for r in res), float(prev[1]))]
    while True:
        if np.any(2 * res > max_nodes):
            raise SpectrumError(f"lambda_1 did not settle to {tol:.0%} below {max_nodes} nodes per axis")
        res = 2 * res
        cur = grid_eigenvalues(imm, S, k, res)
        history.append((tuple(int(r) for r in res), float(cur[1])))
        if abs(cur[1] - prev[1]) < tol * abs(cur[1]):
            break
        prev = cur
    ext = cur + (cur - prev) / 3.0
    ext[0] = cur[0]
    err = float(abs(ext[1] - cur[1]))
    return SpectrumResult(
        eigenvalues=[float(v) for v in ext],
        raw_eigenvalues=[float(v) for v in cur],
        resolution=tuple(int(r) for r in res),
        error_estimate=err,
        method="grid-fd",
        history=history,
    )


def lattice_spectrum(G: np.ndarray, periods, k: int = 6, max_index: int = 6) -> list:
    """Exact low spectrum of the flat torus ``R^n / (periods Z^n)`` with constant metric ``G``."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    L = np.asarray(periods, dtype=float)
    Ginv = np.linalg.inv(G)
    rng = range(-max_index, max_index + 1)
    vals = []
    for m in itertools.product(rng, repeat=len(L)):
        kv = 2.0 * np.pi * np.asarray(m) / L
        vals.append(float(kv @ Ginv @ kv))
    return sorted(vals)[:k]


def flat_lattice_spectrum(imm: Immersion, S: AmbientStructure, k: int = 6, tol: float = 1e-10) -> SpectrumResult:
    """Closed-form spectrum when the induced metric is constant on a parameter torus."""
    _check_closed(imm)
    geom = induced_geometry(imm, S)
    G = geom.gL.mean(axis=0)
    if np.max(np.abs(geom.gL - G)) > tol * max(1.0, np.max(np.abs(G))):
        raise SpectrumError(f"{imm.name}: induced metric is not constant, no lattice closed form")
    ev = lattice_spectrum(G, [hi - lo for lo, hi in imm.domain], k)
    return SpectrumResult(ev, ev, tuple(imm.grid), 0.0, "lattice-closed-form")


@dataclass(frozen=True)
class Verdict:
    stable: bool
    marginal: bool
    corollary: bool
    lambda1: float
    threshold: float

    @property
    def label(self) -> str:
        if self.marginal:
            return "marginal"
        return "stable" if self.stable else "unstable"

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "stable": self.stable,
            "marginal": self.marginal,
            "path": "corollary" if self.corollary else "spectral",
            "lambda1": self.lambda1,
            "threshold": self.threshold,
        }


def stability_verdict(lambda1: float, A: float, eps: int, *, band: float = MARGINAL_BAND) -> Verdict:
    """Legendrian stability of a minimal Legendrian from ``λ₁`` and the threshold ``A + 2ε``.

    A non-positive threshold makes every minimal Legendrian stable regardless
    of ``λ₁``.  Values within ``band`` of the threshold count as stable and
    are flagged marginal.
    """
    threshold = A + 2.0 * eps
    if threshold <= THRESHOLD_ZERO:
        return Verdict(True, False, True, float(lambda1), threshold)
    marginal = abs(lambda1 - threshold) < band
    return Verdict(bool(marginal or lambda1 >= threshold), bool(marginal), False, float(lambda1), threshold)
