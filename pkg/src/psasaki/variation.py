"""Legendrian deformations and the first and second variation of volume.

A potential ``f`` on the parameter domain generates the Legendrian field
``V = f ξ + ½ φ ∇f``.  Its volume derivatives are computed three ways: two
closed forms built on different intermediate quantities, and a finite
difference of the volume along an actual Legendrian flow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .contact import AmbientStructure
from .expr import Expr, eval_jet2_many, parse, to_text
from .quadrature import Grid
from .submanifold import (
    Immersion,
    ImmersionError,
    InducedGeometry,
    NotLegendrianError,
    induced_geometry,
    legendrian_defect,
    parameter_derivative,
)


class FlowError(RuntimeError):
    pass


class NotLMinimalError(ValueError):
    def __init__(self, defect: float, tol: float):
        self.defect = defect
        self.tol = tol
        super().__init__(f"immersion is not L-minimal: div(phi H) defect {defect:.3e} exceeds {tol:.1e}")


@dataclass(frozen=True)
class DeformationPotential:
    expr: Expr
    text: str

    @classmethod
    def parse(cls, text: str, names) -> "DeformationPotential":
        return cls(parse(str(text), names=list(names)), str(text))

    @classmethod
    def of(cls, expr: Expr, names) -> "DeformationPotential":
        return cls(expr, to_text(expr, list(names)))

    def jets(self, params):
        (j,) = eval_jet2_many([self.expr], np.atleast_2d(params))
        return j.val, j.grad, j.hess


def random_potentials(imm: Immersion, count: int, rng: np.random.Generator, max_mode: int = 2) -> list[DeformationPotential]:
    """Random trigonometric polynomials in the periodic parameters, ``|k_a| ≤ max_mode``."""
    names = list(imm.param_names)
    pots = []
    for _ in range(count):
        terms = [f"{rng.normal():.6f}"]
        for _ in range(3):
            k = rng.integers(-max_mode, max_mode + 1, size=imm.n)
            if not k.any():
                k[rng.integers(imm.n)] = 1
            arg = " + ".join(f"{int(c)}*{names[a]}" for a, c in enumerate(k) if c)
            fn = "cos" if rng.random() < 0.5 else "sin"
            terms.append(f"{rng.normal():.6f}*{fn}({arg})")
        pots.append(DeformationPotential.parse(" + ".join(terms), names))
    return pots


@dataclass
class PotentialFields:
    """A potential and its induced-metric derivatives at the nodes of a geometry."""

    f: np.ndarray
    df: np.ndarray
    grad: np.ndarray  # parameter components of ∇f
    grad_amb: np.ndarray
    lap: np.ndarray  # positive Laplacian
    hess: np.ndarray
    grad_norm2: np.ndarray
    hess_norm2: np.ndarray


def potential_fields(pot: DeformationPotential, geom: InducedGeometry) -> PotentialFields:
    f, df, ddf = pot.jets(geom.params)
    grad = np.einsum("nab,nb->na", geom.gLinv, df)
    lap, hess = geom.laplacian_and_hessian(df, ddf)
    return PotentialFields(
        f=f,
        df=df,
        grad=grad,
        grad_amb=geom.push(grad),
        lap=lap,
        hess=hess,
        grad_norm2=np.einsum("na,na->n", grad, df),
        hess_norm2=np.einsum("nac,nbd,nab,ncd->n", geom.gLinv, geom.gLinv, hess, hess),
    )


def variation_field(pot: DeformationPotential, geom: InducedGeometry) -> np.ndarray:
    """``V = f ξ + ½ φ ∇f`` at every node, shape (N, 2n+1)."""
    P = potential_fields(pot, geom)
    return P.f[:, None] * geom.amb.xi + 0.5 * geom.amb.phi_of(P.grad_amb)


def _variation_field_fn(imm: Immersion, S: AmbientStructure, pot: DeformationPotential):
    """``V`` as a function of parameters, from values and first partials only."""

    def fn(params):
        F, dF, _ = imm.jets(params)
        G, xi, _, phi = S.values(F)
        f, df, _ = pot.jets(params)
        gL = np.einsum("nij,nia,njb->nab", G, dF, dF)
        grad = np.einsum("nia,na->ni", dF, np.linalg.solve(gL, df[..., None])[..., 0])
        return f[:, None] * xi + 0.5 * np.einsum("nij,nj->ni", phi, grad)

    return fn


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------


@dataclass
class FlowResult:
    t: float
    F: np.ndarray
    volume: float
    legendrian_defect: float


def _grid_jacobian(grid: Grid, F: np.ndarray) -> np.ndarray:
    return np.stack([grid.derivative(F, a) for a in range(grid.dim)], axis=-1)


def discrete_volume(S: AmbientStructure, grid: Grid, F: np.ndarray) -> float:
    """Volume of the immersion sampled at ``grid`` nodes, with spectral tangents."""
    dF = _grid_jacobian(grid, F)
    G = S.metric.values(F)
    gL = np.einsum("nij,nia,njb->nab", G, dF, dF)
    return float(grid.weights @ np.sqrt(np.linalg.det(gL)))


def discrete_legendrian_defect(S: AmbientStructure, grid: Grid, F: np.ndarray) -> float:
    dF = _grid_jacobian(grid, F)
    _, _, eta, _ = S.values(F)
    return float(np.max(np.abs(np.einsum("ni,nia->na", eta, dF))))


def flow(
    imm: Immersion,
    S: AmbientStructure,
    pot: DeformationPotential,
    t: float,
    *,
    steps: int = 8,
    grid: Grid | None = None,
    check_tol: float | None = 1e-6,
) -> FlowResult:
    """Move ``L`` by the Legendrian flow of the potential ``f`` for time ``t``.

    The velocity at every instant is ``f ξ + ½ φ ∇_t f`` where ``f`` stays
    fixed on the parameter domain and ``∇_t`` is the gradient of the current
    induced metric.  Such a velocity keeps ``F_t^* η = 0`` exactly, so the
    discrete Legendrian defect only measures discretization error.
    Tangents come from spectral differentiation; time stepping is RK4 with
    a fixed number of steps.
    """
    grid = grid or imm.quadrature()
    if not grid.closed:
        raise FlowError("flows need a closed parameter domain (every axis periodic)")
    if not imm.map_is_periodic():
        raise FlowError(f"{imm.name}: the component map does not close up; the flow needs a closed chart image")
    params = grid.nodes
    F = imm.values(params)
    f, df, _ = pot.jets(params)

    def rhs(X):
        dX = _grid_jacobian(grid, X)
        G, xi, _, phi = S.values(X)
        gL = np.einsum("nij,nia,njb->nab", G, dX, dX)
        grad = np.einsum("nia,na->ni", dX, np.linalg.solve(gL, df[..., None])[..., 0])
        return f[:, None] * xi + 0.5 * np.einsum("nij,nj->ni", phi, grad)

    if t != 0.0:
        dt = t / steps
        for _ in range(steps):
            k1 = rhs(F)
            k2 = rhs(F + 0.5 * dt * k1)
            k3 = rhs(F + 0.5 * dt * k2)
            k4 = rhs(F + dt * k3)
            F = F + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(F)):
                raise FlowError(f"flow left the chart before t = {t}")
    defect = discrete_legendrian_defect(S, grid, F)
    if check_tol is not None and defect > check_tol * (1.0 + abs(t)):
        raise FlowError(f"Legendrian defect {defect:.3e} at t = {t} exceeds {check_tol:.1e}(1 + |t|)")
    return FlowResult(t, F, discrete_volume(S, grid, F), defect)


def volume(imm: Immersion, S: AmbientStructure) -> float:
    """Quadrature of the induced volume density on the immersion's grid."""
    return induced_geometry(imm, S).volume()


# ---------------------------------------------------------------------------
# first variation and L-minimality
# ---------------------------------------------------------------------------


@dataclass
class FirstVariation:
    closed_form: float
    oracle: float
    residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def first_variation(
    imm: Immersion, S: AmbientStructure, pot: DeformationPotential, *, h_t: float = 1e-2, steps: int = 8
) -> FirstVariation:
    """``−∫ g(V, H)`` against a 4th-order central difference of the flowed volume.

    The step is ``h_t`` divided by the potential's :func:`feature_scale`.
    """
    geom = induced_geometry(imm, S)
    V = variation_field(pot, geom)
    closed = -geom.integrate(geom.g(V, geom.H))
    h = h_t / feature_scale(pot, geom)
    v = {k: flow(imm, S, pot, k * h, steps=steps).volume for k in (-2, -1, 1, 2)}
    oracle = (-v[2] + 8.0 * v[1] - 8.0 * v[-1] + v[-2]) / (12.0 * h)
    return FirstVariation(closed, oracle, abs(closed - oracle))


@dataclass
class LMinimality:
    defect: float
    spectral_defect: float | None
    divergence: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"defect": self.defect, "spectral_defect": self.spectral_defect}


def _phi_H_density(imm: Immersion, S: AmbientStructure):
    def fn(params):
        # the caller's geometry already enforced its signature requirement
        g = induced_geometry(imm, S, params, require_spacelike=False)
        w = g.tangent_coords(g.amb.phi_of(g.H))
        return g.density[:, None] * w

    return fn


def l_minimality_defect(geom: InducedGeometry) -> LMinimality:
    """L² norm of ``div(φH)`` over ``L``.

    The divergence ``(1/√g) ∂_a(√g w^a)`` of the tangent field ``φH`` is
    differentiated twice independently: by central differences of exact
    data, and spectrally on the quadrature grid when ``L`` is closed.
    """
    imm, S = geom.immersion, geom.structure
    fn = _phi_H_density(imm, S)
    dens = parameter_derivative(fn, geom.params)  # (N, n, n): [node, a, ∂_b]
    div = np.einsum("naa->n", dens) / geom.density
    defect = math.sqrt(max(geom.integrate(div**2), 0.0))
    spectral = None
    grid = imm.quadrature()
    if grid.closed and geom.weights is not None:
        vals = fn(geom.params)
        sdiv = sum(grid.derivative(vals[:, a], a) for a in range(imm.n)) / geom.density
        spectral = math.sqrt(max(geom.integrate(sdiv**2), 0.0))
    return LMinimality(defect, spectral, div)


# ---------------------------------------------------------------------------
# second variation
# ---------------------------------------------------------------------------


def closed_form_integrand(pot: DeformationPotential, geom: InducedGeometry) -> np.ndarray:
    """``¼{(Δf)² − 2ε|∇f|² − Ric(φ∇f, φ∇f) − 2g(H, h(∇f, ∇f)) + g(H, φ∇f)²}`` per node."""
    P = potential_fields(pot, geom)
    amb = geom.amb
    phi_grad = amb.phi_of(P.grad_amb)
    return 0.25 * (
        P.lap**2
        - 2.0 * amb.eps * P.grad_norm2
        - amb.geo.ricci(phi_grad, phi_grad)
        - 2.0 * geom.g(geom.H, geom.second_ff(P.grad, P.grad))
        + geom.g(geom.H, phi_grad) ** 2
    )


def trace_form_integrand(pot: DeformationPotential, geom: InducedGeometry) -> np.ndarray:
    """``tr[g(∇⊥V, ∇⊥V) + Rm(·, V, ·, V)] − |A_V|² − ¼ g(h(∇f, ∇f), H) + g(H, V)²`` per node.

    ``∇̄V`` is differentiated from the field itself, so this path shares no
    curvature-contraction code with :func:`closed_form_integrand`.
    """
    imm, S = geom.immersion, geom.structure
    fn = _variation_field_fn(imm, S, pot)
    V = fn(geom.params)
    DV = parameter_derivative(fn, geom.params) + np.einsum("nkij,nia,nj->nka", geom.amb.geo.Gamma, geom.dF, V)
    G = geom.amb.geo.G
    coords = np.einsum("ncd,nij,nia,njd->nca", geom.gLinv, G, DV, geom.dF)  # tangential coords of D_a V
    T = np.einsum("nic,nca->nia", geom.dF, coords)
    Nrm = DV - T
    gi = geom.gLinv
    normal_sq = np.einsum("nab,nij,nia,njb->n", gi, G, Nrm, Nrm)
    shape_sq = np.einsum("nab,nij,nia,njb->n", gi, G, T, T)
    curv = np.einsum("nab,nijkl,nia,nj,nkb,nl->n", gi, geom.amb.geo.Rm, geom.dF, V, geom.dF, V)
    P = potential_fields(pot, geom)
    return (
        normal_sq
        + curv
        - shape_sq
        - 0.25 * geom.g(geom.second_ff(P.grad, P.grad), geom.H)
        + geom.g(geom.H, V) ** 2
    )


def short_form_integrand(pot: DeformationPotential, geom: InducedGeometry, A: float) -> np.ndarray:
    """``¼{(Δf)² − (A + 2ε)|∇f|²}`` per node, valid on η-Einstein ambients."""
    P = potential_fields(pot, geom)
    return 0.25 * (P.lap**2 - (A + 2.0 * geom.amb.eps) * P.grad_norm2)


def fourth_order_second_difference(values: dict, h: float) -> float:
    return (-values[2] + 16.0 * values[1] - 30.0 * values[0] + 16.0 * values[-1] - values[-2]) / (12.0 * h * h)


def feature_scale(pot: DeformationPotential, geom: InducedGeometry) -> float:
    """``max(1, sup |∇f|, sup |∇²f|)``; flows of larger potentials focus sooner."""
    P = potential_fields(pot, geom)
    return float(max(1.0, np.sqrt(P.grad_norm2.max()), np.sqrt(P.hess_norm2.max())))


@dataclass
class FDStudy:
    steps: list
    estimates: list
    richardson: float
    order: float | None
    converged_to_roundoff: bool
    max_legendrian_defect: float
    first_derivative: float

    @property
    def order_ok(self) -> bool:
        return self.converged_to_roundoff or (self.order is not None and self.order >= 2.0)

    def to_dict(self) -> dict:
        return asdict(self)


def volume_second_derivative(
    imm: Immersion,
    S: AmbientStructure,
    pot: DeformationPotential,
    *,
    h_t: float = 0.04,
    levels: int = 3,
    flow_steps: int = 8,
    geom: InducedGeometry | None = None,
) -> FDStudy:
    """4th-order second difference of ``vol(L_t)`` at steps ``h, h/2, ...``.

    ``h`` is ``h_t`` divided by the potential's :func:`feature_scale`.  The
    observed order compares successive differences of the estimates; when
    those differences sit at the volume's rounding level the order is not
    measurable and the study is marked converged instead.
    """
    grid = imm.quadrature()
    geom = geom or induced_geometry(imm, S)
    h0 = h_t / feature_scale(pot, geom)
    cache: dict[float, FlowResult] = {}

    def vol(t):
        key = round(t, 15)
        if key not in cache:
            cache[key] = flow(imm, S, pot, t, steps=flow_steps, grid=grid)
        return cache[key].volume

    hs = [h0 / 2**k for k in range(levels)]
    est = [fourth_order_second_difference({k: vol(k * h) for k in (-2, -1, 0, 1, 2)}, h) for h in hs]
    rich = est[-1] + (est[-1] - est[-2]) / 15.0
    h = hs[-1]
    first = (-vol(2 * h) + 8.0 * vol(h) - 8.0 * vol(-h) + vol(-2 * h)) / (12.0 * h)
    noise = 64.0 * np.finfo(float).eps * max(abs(vol(0.0)), 1.0) / h**2
    diffs = [abs(est[k] - est[k + 1]) for k in range(levels - 1)]
    order = None
    if len(diffs) >= 2 and diffs[-1] > 0 and diffs[-2] > 0:
        order = math.log2(diffs[-2] / diffs[-1])
    roundoff = diffs[-1] <= noise
    defect = max(r.legendrian_defect for r in cache.values())
    return FDStudy(hs, est, rich, order, bool(roundoff), defect, first)


@dataclass
class VariationReport:
    potential: str
    volume: float
    first_closed: float
    first_fd: float | None
    first_residual: float | None
    l_minimality_defect: float
    closed_form: float
    trace_form: float
    short_form: float | None
    einstein_A: float | None
    fd: FDStudy | None
    closed_vs_fd: float | None
    closed_vs_trace: float
    closed_vs_short: float | None

    @property
    def fd_value(self) -> float | None:
        return None if self.fd is None else self.fd.richardson

    @property
    def sign(self) -> int:
        v = self.closed_form
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "fd"}
        d["fd"] = None if self.fd is None else self.fd.to_dict()
        d["sign"] = self.sign
        return d


def second_variation(
    imm: Immersion,
    S: AmbientStructure,
    pot: DeformationPotential,
    *,
    A: float | None = None,
    h_t: float = 0.04,
    flow_steps: int = 8,
    with_fd: bool = True,
    legendrian_tol: float = 1e-9,
    l_minimal_tol: float = 1e-6,
) -> VariationReport:
    """Closed forms of the second variation and, optionally, the flow oracle.

    Raises :class:`NotLMinimalError` when ``div(φH)`` does not vanish, since
    the closed forms assume an L-minimal ``L``.
    """
    if not imm.closed:
        raise ImmersionError("second variation needs a closed L (every parameter axis periodic)")
    defect = legendrian_defect(imm, S)
    if defect > legendrian_tol:
        raise NotLegendrianError(f"{imm.name} is not Legendrian: defect {defect:.3e}")
    geom = induced_geometry(imm, S)
    lmin = l_minimality_defect(geom)
    if lmin.defect > l_minimal_tol:
        raise NotLMinimalError(lmin.defect, l_minimal_tol)
    closed = geom.integrate(closed_form_integrand(pot, geom))
    trace = geom.integrate(trace_form_integrand(pot, geom))
    short = None if A is None else geom.integrate(short_form_integrand(pot, geom, A))
    V = variation_field(pot, geom)
    first_closed = -geom.integrate(geom.g(V, geom.H))
    fd = first_fd = first_res = closed_vs_fd = None
    if with_fd:
        fd = volume_second_derivative(imm, S, pot, h_t=h_t, flow_steps=flow_steps, geom=geom)
        closed_vs_fd = abs(closed - fd.richardson) / (1.0 + abs(fd.richardson))
        first_fd = fd.first_derivative
        first_res = abs(first_fd - first_closed)
    scale = max(1.0, abs(closed))
    return VariationReport(
        potential=pot.text,
        volume=geom.volume(),
        first_closed=first_closed,
        first_fd=first_fd,
        first_residual=first_res,
        l_minimality_defect=lmin.defect,
        closed_form=closed,
        trace_form=trace,
        short_form=short,
        einstein_A=A,
        fd=fd,
        closed_vs_fd=closed_vs_fd,
        closed_vs_trace=abs(closed - trace) / scale,
        closed_vs_short=None if short is None else abs(closed - short) / scale,
    )


def bochner_check(pot: DeformationPotential, geom: InducedGeometry) -> tuple[float, float, float]:
    """Integrated Bochner identity ``∫(Δf)² = ∫ Ric(∇f, ∇f) + |∇²f|²``.

    Returns ``(lhs, rhs, |lhs − rhs|)``.
    """
    P = potential_fields(pot, geom)
    _, _, RicL = geom.intrinsic
    lhs = geom.integrate(P.lap**2)
    rhs = geom.integrate(np.einsum("nab,na,nb->n", RicL, P.grad, P.grad) + P.hess_norm2)
    return lhs, rhs, abs(lhs - rhs)
