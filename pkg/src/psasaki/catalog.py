"""Model structures and immersions in explicit charts.

Round sphere
    ``S^{2n+1} ⊂ C^{n+1}`` with embedding coordinates ordered
    ``(X1, Y1, X2, Y2, ...)``.  The chart is stereographic projection from
    the point ``Y1 = 1``; its coordinates are ``(X1, X2, Y2, ..., X_{n+1},
    Y_{n+1}) / (1 − Y1)``.  Only that one point is missing from the chart.
    ``ξ = JP`` with ``J(X, Y) = (−Y, X)`` on every complex pair.

Heisenberg
    Coordinates ``(x1..xn, y1..yn, z)``; ``η = dz − Σ y_i dx_i`` and
    ``g = ½ Σ (dx_i² + dy_i²) + η⊗η``.  Global chart, no singular locus.

Hyperbolic (n = 1)
    The circle bundle over a hyperbolic plane: coordinates ``(x, y, z)`` with
    ``y > 0``, ``η = dz + (2c/y) dx`` and ``g = c(dx² + dy²)/y² + η⊗η`` where
    ``c = −1/(A + 2)``.  It is η-Einstein with the chosen ``A < −2``.
    Singular locus ``y = 0``.
"""

from __future__ import annotations

import math
import re
from typing import Sequence

from .contact import AmbientStructure, StructureError
from .expr import Const, Expr, as_expr, dot, variables
from .tensor import MetricField


class CatalogError(ValueError):
    pass


def _zeros(d: int) -> list[list[Expr]]:
    return [[Const(0.0)] * d for _ in range(d)]


def _sphere_embedding(n: int) -> tuple[list[Expr], list[list[Expr]], Expr]:
    """Inverse stereographic map ``P(x)``, its partials ``dP[j][A]`` and ``D = 1 + |x|²``."""
    d = 2 * n + 1
    x = variables(d)
    s = dot(x, x)
    D = 1.0 + s
    idx = [0] + list(range(2, 2 * n + 2))
    P: list[Expr] = [Const(0.0)] * (2 * n + 2)
    for i, A in enumerate(idx):
        P[A] = 2.0 * x[i] / D
    P[1] = (s - 1.0) / D
    D2 = D * D
    dP = []
    for j in range(d):
        col: list[Expr] = [Const(0.0)] * (2 * n + 2)
        for i, A in enumerate(idx):
            term = -4.0 * x[i] * x[j] / D2
            col[A] = 2.0 / D + term if i == j else term
        col[1] = 4.0 * x[j] / D2
        dP.append(col)
    return P, dP, D


def _J(v: Sequence[Expr]) -> list[Expr]:
    out = []
    for k in range(0, len(v), 2):
        out += [-v[k + 1], v[k]]
    return out


def round_sphere(n: int) -> AmbientStructure:
    d = 2 * n + 1
    P, dP, D = _sphere_embedding(n)
    conf = D * D / 4.0  # inverse of the conformal factor 4/D²
    g = _zeros(d)
    for i in range(d):
        g[i][i] = 4.0 / (D * D)
    JP = _J(P)
    eta = [dot(JP, dP[j]) for j in range(d)]
    xi = [eta[i] * conf for i in range(d)]
    phi = [[dot(_J(dP[j]), dP[i]) * conf for j in range(d)] for i in range(d)]
    names = [f"x{i}" for i in range(d)]
    return AmbientStructure(
        name="round-sphere",
        n=n,
        metric=MetricField.from_rows(g, [1] * d),
        xi=tuple(xi),
        eta=tuple(eta),
        phi=tuple(tuple(r) for r in phi),
        eps=1,
        coord_names=tuple(names),
        sample_box=tuple((-1.0, 1.0) for _ in range(d)),
        chart_note="stereographic from Y1 = 1; regular on the whole chart",
        einstein_hint=(2.0 * n, 0.0),
    )


def heisenberg(n: int) -> AmbientStructure:
    d = 2 * n + 1
    v = variables(d)
    ys = v[n : 2 * n]
    eta: list[Expr] = [-y for y in ys] + [Const(0.0)] * n + [Const(1.0)]
    g = _zeros(d)
    for i in range(d):
        for j in range(d):
            base = 0.5 if (i == j and i < 2 * n) else 0.0
            g[i][j] = as_expr(base) + eta[i] * eta[j]
    xi = [Const(0.0)] * (2 * n) + [Const(1.0)]
    phi = _zeros(d)
    for i in range(n):
        phi[n + i][i] = Const(1.0)  # φ∂x_i = ∂y_i
        phi[i][n + i] = Const(-1.0)  # φ∂y_i = −∂x_i − y_i ∂z
        phi[2 * n][n + i] = -ys[i]
    names = [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["z"]
    return AmbientStructure(
        name="heisenberg",
        n=n,
        metric=MetricField.from_rows(g, [1] * d),
        xi=tuple(xi),
        eta=tuple(eta),
        phi=tuple(tuple(r) for r in phi),
        eps=1,
        coord_names=tuple(names),
        sample_box=tuple((-1.0, 1.0) for _ in range(d)),
        chart_note="global chart",
        einstein_hint=(-2.0, 2.0 * n + 2.0),
    )


def hyperbolic(n: int = 1, A: float = -4.0) -> AmbientStructure:
    if n != 1:
        raise CatalogError("the hyperbolic model is only available for n = 1")
    if not A < -2.0:
        raise CatalogError("the hyperbolic model needs A < -2")
    c = -1.0 / (A + 2.0)
    x, y, z = variables(3)
    eta = [2.0 * c / y, Const(0.0), Const(1.0)]
    g = _zeros(3)
    base = [c / (y * y), c / (y * y), Const(0.0)]
    for i in range(3):
        for j in range(3):
            g[i][j] = (base[i] if i == j else Const(0.0)) + eta[i] * eta[j]
    phi = _zeros(3)
    phi[1][0] = Const(1.0)  # φ∂x = ∂y
    phi[0][1] = Const(-1.0)  # φ∂y = −∂x + (2c/y)∂z
    phi[2][1] = 2.0 * c / y
    return AmbientStructure(
        name=f"hyperbolic(A={A:g})",
        n=1,
        metric=MetricField.from_rows(g, [1, 1, 1]),
        xi=(Const(0.0), Const(0.0), Const(1.0)),
        eta=tuple(eta),
        phi=tuple(tuple(r) for r in phi),
        eps=1,
        coord_names=("x", "y", "z"),
        sample_box=((-1.0, 1.0), (0.5, 2.0), (-1.0, 1.0)),
        chart_note="upper half plane times a line; singular at y = 0",
        einstein_hint=(A, 2.0 - A),
    )


MODELS = ("round-sphere", "heisenberg", "hyperbolic")

_TANNO = re.compile(r"^\s*tanno\s*\(\s*(?P<src>[A-Za-z\-]+)\s*,\s*(?:(?:alpha|α)\s*=\s*)?(?P<a>[^)]+?)\s*\)\s*$")


def model_catalog(name: str, n: int = 1, **params) -> AmbientStructure:
    """Look up a model structure by name.

    ``name`` is one of :data:`MODELS` or ``"tanno(<model>, α=<value>)"``.
    ``params`` are forwarded to the model (only ``A`` for ``hyperbolic``).
    """
    if n not in (1, 2):
        raise CatalogError(f"unsupported n={n}; the catalog covers n in {{1, 2}}")
    m = _TANNO.match(name)
    if m:
        from .tanno import deform

        try:
            alpha = float(m.group("a"))
        except ValueError:
            raise CatalogError(f"cannot read alpha in {name!r}") from None
        return deform(model_catalog(m.group("src"), n, **params), alpha).target
    key = name.strip()
    try:
        if key == "round-sphere":
            return round_sphere(n)
        if key == "heisenberg":
            return heisenberg(n)
        if key == "hyperbolic":
            return hyperbolic(n, **params)
    except StructureError as exc:
        raise CatalogError(str(exc)) from exc
    raise CatalogError(f"unknown model {name!r}; known: {', '.join(MODELS)} and tanno(<model>, alpha)")


# ---------------------------------------------------------------------------
# immersions
# ---------------------------------------------------------------------------

TWO_PI = 2.0 * math.pi


def sphere_chart(embedding: Sequence) -> list[Expr]:
    """Stereographic chart coordinates of a map into ``S^{2n+1} ⊂ R^{2n+2}``."""
    P = [as_expr(c) for c in embedding]
    denom = 1.0 - P[1]
    return [P[A] / denom for A in [0] + list(range(2, len(P)))]


def _torus_knot(u: Expr, bump: float = 0.0) -> list[Expr]:
    """``(√(2/3) e^{iu}, √(1/3) e^{−2iu})``, optionally with a Legendrian bump.

    The bump makes ``cos² a = (2 + b cos u)/(3 + b cos u)`` and
    ``θ₂ = −2u − b sin u``, which keeps ``cos² a θ₁' + sin² a θ₂' = 0``.
    """
    from .expr import cos, sin, sqrt

    if bump == 0.0:
        r1, r2 = Const(math.sqrt(2.0 / 3.0)), Const(math.sqrt(1.0 / 3.0))
        t2 = -2.0 * u
    else:
        c = cos(u)
        r1 = sqrt((2.0 + bump * c) / (3.0 + bump * c))
        r2 = sqrt(1.0 / (3.0 + bump * c))
        t2 = -2.0 * u - bump * sin(u)
    return [r1 * cos(u), r1 * sin(u), r2 * cos(t2), r2 * sin(t2)]


def immersion_catalog(name: str, grid: Sequence[int] | None = None):
    """Catalog immersions by name.

    ``great-circle``, ``reeb-orbit``, ``torus-knot``, ``bumped-knot`` map into
    the round ``S³``; ``clifford-torus`` and ``real-sphere`` into ``S⁵``;
    ``heisenberg-line`` into the Heisenberg group and
    ``hyperbolic-geodesic`` into the hyperbolic model.  The last two close up
    only after an isometric quotient, so they are usable for spectra and
    verdicts but not for flows.
    """
    from .expr import cos, sin, exp
    from .submanifold import Immersion

    u, v = variables(2)
    r3 = 1.0 / math.sqrt(3.0)
    zero = Const(0.0)
    if name == "great-circle":
        comps, dom, per, g, hint = sphere_chart([cos(u), zero, sin(u), zero]), [(0, TWO_PI)], [True], [64], cos(u)
    elif name == "reeb-orbit":
        comps, dom, per, g, hint = sphere_chart([zero, zero, cos(u), sin(u)]), [(0, TWO_PI)], [True], [64], None
    elif name == "torus-knot":
        comps, dom, per, g, hint = sphere_chart(_torus_knot(u)), [(0, TWO_PI)], [True], [64], None
    elif name == "bumped-knot":
        comps, dom, per, g, hint = sphere_chart(_torus_knot(u, 0.5)), [(0, TWO_PI)], [True], [64], None
    elif name == "slanted-circle":
        r = Const(math.sqrt(0.5))
        comps, dom, per, g, hint = sphere_chart([r * cos(u), r * sin(u), r, zero]), [(0, TWO_PI)], [True], [64], None
    elif name == "clifford-torus":
        w = -u - v
        emb = [r3 * cos(u), r3 * sin(u), r3 * cos(v), r3 * sin(v), r3 * cos(w), r3 * sin(w)]
        comps, dom, per, g, hint = sphere_chart(emb), [(0, TWO_PI)] * 2, [True, True], [40, 40], cos(u)
    elif name == "real-sphere":
        th, ph = u, v
        emb = [sin(th) * cos(ph), zero, sin(th) * sin(ph), zero, cos(th), zero]
        comps, dom, per, g, hint = sphere_chart(emb), [(0, math.pi), (0, TWO_PI)], [False, True], [24, 32], cos(th)
    elif name == "heisenberg-line":
        comps, dom, per, g, hint = [u, zero, zero], [(0, TWO_PI)], [True], [64], cos(u)
    elif name == "hyperbolic-geodesic":
        comps, dom, per, g, hint = [zero, exp(u), zero], [(0, TWO_PI)], [True], [64], cos(u)
    else:
        raise CatalogError(f"unknown immersion {name!r}; known: {', '.join(IMMERSIONS)}")
    return Immersion(
        name=name,
        components=tuple(comps),
        domain=tuple((float(a), float(b)) for a, b in dom),
        periodic=tuple(per),
        grid=tuple(grid or g),
        param_names=("u", "v")[: len(dom)],
        eigen_hint=hint,
    )


IMMERSIONS = (
    "great-circle",
    "reeb-orbit",
    "torus-knot",
    "bumped-knot",
    "slanted-circle",
    "clifford-torus",
    "real-sphere",
    "heisenberg-line",
    "hyperbolic-geodesic",
)
