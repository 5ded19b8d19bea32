"""Run configuration: a YAML document validated into :class:`RunConfig`.

Validation errors carry the dotted path of the offending field, e.g.
``alphas[1]: must be a positive real``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .catalog import CatalogError, IMMERSIONS, immersion_catalog, model_catalog
from .contact import AmbientStructure, sabotage
from .expr import ExprError
from .submanifold import Immersion
from .variation import DeformationPotential

COMMANDS = ("verify", "second-variation", "tanno", "spectrum")
MIN_GRID = 8

DEFAULT_TOLERANCES = {
    "identity": 1e-6,
    "legendrian": 1e-9,
    "l_minimal": 1e-6,
    "submanifold": 1e-6,
    "gauss": 1e-5,
    "second_variation": 1e-3,
    "dual_forms": 1e-5,
    "first_variation": 1e-6,
    "einstein": 1e-5,
    "connection": 1e-5,
    "curvature_relation": 1e-4,
    "homothety": 1e-9,
    "eigen_scaling": 1e-6,
    "spectrum": 1e-3,
}

_TOP_KEYS = {
    "command", "seed", "ambient", "immersion", "potentials", "random_potentials",
    "alphas", "tolerances", "fd", "spectral", "samples", "checks", "outputs",
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class RunConfig:
    raw: dict
    command: str | None
    seed: int
    ambient: AmbientStructure
    immersion: Immersion | None
    potentials: list[DeformationPotential]
    random_potentials: int
    random_max_mode: int
    alphas: list[float]
    tolerances: dict
    fd: dict
    spectral: dict
    samples: int
    checks: dict
    outputs: dict = field(default_factory=dict)

    def tol(self, key: str) -> float:
        return self.tolerances[key]

    def echo(self) -> dict:
        """Normalized configuration as recorded in reports."""
        out = copy.deepcopy(self.raw)
        out["seed"] = self.seed
        out["tolerances"] = dict(sorted(self.tolerances.items()))
        out["fd"] = dict(self.fd)
        out["spectral"] = dict(self.spectral)
        out["samples"] = self.samples
        out["checks"] = dict(self.checks)
        out["alphas"] = list(self.alphas)
        return out


# ---------------------------------------------------------------------------
# field helpers
# ---------------------------------------------------------------------------


def _mapping(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _unknown(d: dict, allowed, path: str) -> None:
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


def _number(value, path: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ConfigError(path, "must be finite")
    if positive and x <= 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    return x


def _integer(value, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be at least {minimum}, got {value}")
    return int(value)


def _boolean(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true or false, got {value!r}")
    return value


def _grid(value, path: str, n: int) -> tuple[int, ...]:
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(path, f"expected a list of {n} integers")
    return tuple(_integer(v, f"{path}[{i}]", minimum=MIN_GRID) for i, v in enumerate(value))


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------


def _ambient(spec, path: str = "ambient") -> AmbientStructure:
    spec = _mapping(spec, path)
    if not spec:
        raise ConfigError(path, "required")
    _unknown(spec, {"model", "n", "params", "inline", "sabotage"}, path)
    if ("model" in spec) == ("inline" in spec):
        raise ConfigError(path, "give exactly one of 'model' or 'inline'")
    if "inline" in spec:
        try:
            S = AmbientStructure.from_text(_mapping(spec["inline"], f"{path}.inline"))
        except ConfigError:
            raise
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path}.inline", f"invalid structure: {exc}") from exc
    else:
        n = _integer(spec.get("n", 1), f"{path}.n", minimum=1)
        params = _mapping(spec.get("params"), f"{path}.params")
        for k, v in params.items():
            _number(v, f"{path}.params.{k}")
        try:
            S = model_catalog(str(spec["model"]), n, **params)
        except TypeError as exc:
            raise ConfigError(f"{path}.params", str(exc)) from exc
        except CatalogError as exc:
            raise ConfigError(f"{path}.model", str(exc)) from exc
    sab = _mapping(spec.get("sabotage"), f"{path}.sabotage")
    if sab:
        _unknown(sab, {"phi_sign", "eta_scale", "xi_scale"}, f"{path}.sabotage")
        S = sabotage(S, **{k: _number(v, f"{path}.sabotage.{k}") for k, v in sab.items()})
    return S


def _immersion(spec, S: AmbientStructure, path: str = "immersion") -> Immersion:
    if isinstance(spec, str):
        spec = {"catalog": spec}
    spec = _mapping(spec, path)
    _unknown(spec, {"catalog", "grid", "inline"}, path)
    if ("catalog" in spec) == ("inline" in spec):
        raise ConfigError(path, "give exactly one of 'catalog' or 'inline'")
    if "catalog" in spec:
        name = str(spec["catalog"])
        if name not in IMMERSIONS:
            raise ConfigError(f"{path}.catalog", f"unknown immersion {name!r}; known: {', '.join(IMMERSIONS)}")
        imm = immersion_catalog(name)
    else:
        inline = _mapping(spec["inline"], f"{path}.inline")
        try:
            imm = Immersion.from_text(inline)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path}.inline", f"invalid immersion: {exc}") from exc
        if len(imm.components) != S.dim:
            raise ConfigError(f"{path}.inline.components", f"expected {S.dim} components, got {len(imm.components)}")
        _grid(list(imm.grid), f"{path}.inline.grid", imm.n)
    if "grid" in spec:
        imm = imm.with_grid(_grid(spec["grid"], f"{path}.grid", imm.n))
    if imm.n != S.n:
        raise ConfigError(path, f"dim L = {imm.n} but the ambient has n = {S.n}")
    return imm


def _potentials(spec, imm: Immersion | None, path: str = "potentials") -> list[DeformationPotential]:
    if spec is None:
        return []
    if not isinstance(spec, list):
        raise ConfigError(path, "expected a list of expression strings")
    if spec and imm is None:
        raise ConfigError(path, "potentials need an immersion")
    out = []
    for i, text in enumerate(spec):
        if isinstance(text, bool) or not isinstance(text, (str, int, float)):
            raise ConfigError(f"{path}[{i}]", f"expected an expression string, got {text!r}")
        try:
            out.append(DeformationPotential.parse(str(text), imm.param_names))
        except ExprError as exc:
            raise ConfigError(f"{path}[{i}]", str(exc)) from exc
    return out


def _section(spec, defaults: dict, path: str) -> dict:
    spec = _mapping(spec, path)
    _unknown(spec, defaults, path)
    return {**defaults, **spec}


def validate(raw: dict, *, command: str | None = None, seed: int | None = None, tolerance_scale: float = 1.0) -> RunConfig:
    """Build a :class:`RunConfig`; ``command``, ``seed`` and the scale override the document."""
    raw = _mapping(raw, "")
    _unknown(raw, _TOP_KEYS, "")
    cmd = command or raw.get("command")
    if cmd is not None and cmd not in COMMANDS:
        raise ConfigError("command", f"unknown command {cmd!r}; known: {', '.join(COMMANDS)}")
    seed = _integer(raw.get("seed", 0) if seed is None else seed, "seed", minimum=0)
    if seed >= 2**64:
        raise ConfigError("seed", "must fit in an unsigned 64-bit integer")
    scale = _number(tolerance_scale, "tolerance_scale", positive=True)

    S = _ambient(raw.get("ambient"))
    imm = None if raw.get("immersion") is None else _immersion(raw["immersion"], S)
    pots = _potentials(raw.get("potentials"), imm)

    rp = raw.get("random_potentials", 0)
    if isinstance(rp, dict):
        _unknown(rp, {"count", "max_mode"}, "random_potentials")
        count = _integer(rp.get("count", 0), "random_potentials.count", minimum=0)
        max_mode = _integer(rp.get("max_mode", 2), "random_potentials.max_mode", minimum=1)
    else:
        count, max_mode = _integer(rp, "random_potentials", minimum=0), 2
    if count and imm is None:
        raise ConfigError("random_potentials", "potentials need an immersion")

    alphas_raw = raw.get("alphas", [])
    if not isinstance(alphas_raw, list):
        raise ConfigError("alphas", "expected a list of positive reals")
    alphas = []
    for i, a in enumerate(alphas_raw):
        try:
            alphas.append(_number(a, f"alphas[{i}]", positive=True))
        except ConfigError:
            raise ConfigError(f"alphas[{i}]", f"must be a positive real, got {a!r}") from None

    tol_spec = _section(raw.get("tolerances"), DEFAULT_TOLERANCES, "tolerances")
    tolerances = {k: scale * _number(v, f"tolerances.{k}", positive=True) for k, v in tol_spec.items()}

    fd = _section(raw.get("fd"), {"enabled": True, "h_t": 0.04, "flow_steps": 8}, "fd")
    fd["enabled"] = _boolean(fd["enabled"], "fd.enabled")
    fd["h_t"] = _number(fd["h_t"], "fd.h_t", positive=True)
    fd["flow_steps"] = _integer(fd["flow_steps"], "fd.flow_steps", minimum=1)

    spectral = _section(raw.get("spectral"), {"k": 6, "resolution": None, "tol": 0.01, "max_nodes": 128, "band": 1e-3},
                        "spectral")
    spectral["k"] = _integer(spectral["k"], "spectral.k", minimum=2)
    if spectral["resolution"] is not None:
        if imm is None:
            raise ConfigError("spectral.resolution", "a resolution needs an immersion")
        spectral["resolution"] = list(_grid(spectral["resolution"], "spectral.resolution", imm.n))
    spectral["tol"] = _number(spectral["tol"], "spectral.tol", positive=True)
    spectral["max_nodes"] = _integer(spectral["max_nodes"], "spectral.max_nodes", minimum=MIN_GRID)
    spectral["band"] = _number(spectral["band"], "spectral.band", positive=True)

    samples = _integer(raw.get("samples", 20), "samples", minimum=1)

    checks = _section(raw.get("checks"), {"legendrian": imm is not None, "submanifold": imm is not None}, "checks")
    for k in checks:
        checks[k] = _boolean(checks[k], f"checks.{k}")
        if checks[k] and imm is None:
            raise ConfigError(f"checks.{k}", "requested but no immersion is configured")

    outputs = _section(raw.get("outputs"), {"report": None, "csv": None}, "outputs")
    for k, v in outputs.items():
        if v is not None and not isinstance(v, str):
            raise ConfigError(f"outputs.{k}", "expected a path string")

    if cmd in ("second-variation", "spectrum") and imm is None:
        raise ConfigError("immersion", f"required by '{cmd}'")
    if cmd == "second-variation" and not pots and not count:
        raise ConfigError("potentials", "required by 'second-variation' (or set random_potentials)")
    if cmd == "spectrum" and not imm.closed:
        raise ConfigError("immersion", "the spectrum needs a closed L (every parameter axis periodic)")
    if cmd == "tanno" and not alphas:
        raise ConfigError("alphas", "required by 'tanno'")

    return RunConfig(
        raw=copy.deepcopy(raw),
        command=cmd,
        seed=seed,
        ambient=S,
        immersion=imm,
        potentials=pots,
        random_potentials=count,
        random_max_mode=max_mode,
        alphas=alphas,
        tolerances=tolerances,
        fd=fd,
        spectral=spectral,
        samples=samples,
        checks=checks,
        outputs=outputs,
    )


def load_config(path, **overrides) -> RunConfig:
    """Read and validate a YAML config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"config is not valid YAML: {exc}") from exc
    return validate(raw, **overrides)
