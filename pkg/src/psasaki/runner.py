"""Config-driven runs: each ``run_*`` returns a :class:`RunReport`.

Module errors never escape a run.  They become failing records named after
the stage that raised them, so a report is always produced.
"""

from __future__ import annotations

import csv
import io
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig
from .contact import curvature_identity_suite, eta_einstein_constants, verify_sasakian
from .report import IdentityReport
from .spectral import SpectrumError, flat_lattice_spectrum, laplace_spectrum, stability_verdict
from .submanifold import (
    gauss_equation_check,
    induced_geometry,
    legendrian_defect,
    submanifold_checks,
    trace_curvature_check,
)
from .tanno import (
    deform,
    connection_difference_check,
    curvature_relation_check,
    einstein_constants_check,
    minimality_preservation_check,
    stability_equivalence_check,
    tangent_connection_check,
)
from .variation import DeformationPotential, l_minimality_defect, random_potentials, second_variation

ENGINE = "psasaki"


class StageFailed(Exception):
    """Raised inside a stage to stop it after a failing precondition record."""


@dataclass
class RunReport:
    command: str
    seed: int
    config: dict
    records: IdentityReport = field(default_factory=IdentityReport)
    structure: dict = field(default_factory=dict)
    immersion: dict = field(default_factory=dict)
    variations: list = field(default_factory=list)
    spectra: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    tanno: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.records.passed

    def to_dict(self) -> dict:
        return {
            "engine": {"name": ENGINE, "version": __version__},
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "passed": self.passed,
            "records": [r.to_dict() for r in self.records.records],
            "failures": [r.id for r in self.records.failures()],
            "structure": self.structure,
            "immersion": self.immersion,
            "variations": self.variations,
            "spectra": self.spectra,
            "verdicts": self.verdicts,
            "tanno": self.tanno,
            "errors": self.errors,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def csv_tables(self) -> dict[str, str]:
        """``eigenvalues`` and ``alpha`` tables, when the run produced them."""
        tables = {}
        if self.spectra:
            rows = [
                [s["label"], i, _num(v), _num(s["raw_eigenvalues"][i])]
                for s in self.spectra
                for i, v in enumerate(s["eigenvalues"])
            ]
            tables["eigenvalues"] = _csv(["label", "index", "eigenvalue", "raw_eigenvalue"], rows)
        if self.tanno:
            cols = ["alpha", "beta", "A", "A_alpha_fit", "A_alpha_predicted", "B_alpha_fit",
                    "lambda1", "lambda1_target", "verdict", "verdict_target"]
            tables["alpha"] = _csv(cols, [[_num(t.get(c)) if c not in ("verdict", "verdict_target") else t.get(c)
                                           for c in cols] for t in self.tanno])
        return tables


def _num(v):
    return "" if v is None else repr(float(v))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


@contextmanager
def _stage(report: RunReport, name: str, anchor: str):
    """Turn an exception inside a stage into a failing ``<name>.error`` record."""
    try:
        yield
    except StageFailed:
        pass
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        report.records.add_flag(f"{name}.error", anchor, False, residual=math.inf)
        report.errors.append({"stage": name, "type": type(exc).__name__, "message": str(exc)})


def _new_report(cfg: RunConfig, command: str) -> tuple[RunReport, np.random.Generator]:
    return RunReport(command, cfg.seed, cfg.echo()), np.random.default_rng(cfg.seed)


def _einstein(cfg: RunConfig, S, rng):
    return eta_einstein_constants(S, rng=rng, count=cfg.samples, tol=cfg.tol("einstein"))


def _require_legendrian(report: RunReport, cfg: RunConfig, imm, S, prefix: str) -> float:
    defect = legendrian_defect(imm, S)
    rec = report.records.add(f"{prefix}legendrian", "f*eta = 0", [defect], cfg.tol("legendrian"))
    if not rec.passed:
        raise StageFailed
    return defect


def _spectrum_entry(label: str, spec) -> dict:
    return {"label": label, **spec.to_dict()}


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def run_verify(cfg: RunConfig) -> RunReport:
    """Structure axioms and curvature identities, plus submanifold suites when an immersion is given."""
    report, rng = _new_report(cfg, "verify")
    S, imm = cfg.ambient, cfg.immersion
    tol = cfg.tol("identity")
    with _stage(report, "ambient", "pseudo-Sasakian axioms"):
        report.records.extend(verify_sasakian(S, rng=rng, count=cfg.samples, tol=tol), "ambient.")
        report.records.extend(curvature_identity_suite(S, rng=rng, count=cfg.samples, tol=tol), "ambient.curvature.")
        fit = _einstein(cfg, S, rng)
        report.structure = {"name": S.name, "n": S.n, "epsilon": S.eps, "einstein": fit.to_dict()}
        if fit.is_eta_einstein:
            report.records.add("ambient.eta_einstein_relation", "B = 2n - eps A",
                               [fit.relation_residual], cfg.tol("einstein"))
    if imm is None:
        return report
    with _stage(report, "immersion", "induced geometry of L"):
        defect = legendrian_defect(imm, S)
        is_legendrian = defect <= cfg.tol("legendrian")
        report.immersion = {"name": imm.name, "legendrian_defect": defect}
        if cfg.checks["legendrian"]:
            report.records.add("immersion.legendrian", "f*eta = 0", [defect], cfg.tol("legendrian"))
        if cfg.checks["submanifold"]:
            geom = induced_geometry(imm, S)
            report.immersion["volume"] = geom.volume()
            report.immersion["mean_curvature_max"] = float(np.sqrt(np.max(np.abs(geom.g(geom.H, geom.H)))))
            legendrian_suites = cfg.checks["legendrian"] and is_legendrian
            report.records.extend(
                submanifold_checks(geom, rng=rng, legendrian=legendrian_suites, tol=cfg.tol("submanifold")),
                "immersion.",
            )
            report.records.extend(gauss_equation_check(imm, S, rng=rng, tol=cfg.tol("gauss")), "immersion.")
            if legendrian_suites:
                report.records.extend(trace_curvature_check(imm, S, rng=rng, tol=cfg.tol("submanifold")), "immersion.")
                report.immersion["l_minimality"] = l_minimality_defect(geom).to_dict()
    return report


# ---------------------------------------------------------------------------
# second variation
# ---------------------------------------------------------------------------


def run_second_variation(cfg: RunConfig) -> RunReport:
    """Closed forms against the flow oracle for every configured potential."""
    report, rng = _new_report(cfg, "second-variation")
    S, imm = cfg.ambient, cfg.immersion
    with _stage(report, "sv", "second variation of the volume"):
        _require_legendrian(report, cfg, imm, S, "sv.")
        geom = induced_geometry(imm, S)
        lmin = l_minimality_defect(geom)
        H_max = float(np.sqrt(np.max(np.abs(geom.g(geom.H, geom.H)))))
        report.immersion = {"name": imm.name, "volume": geom.volume(), "mean_curvature_max": H_max,
                            "l_minimality": lmin.to_dict()}
        rec = report.records.add("sv.l_minimal", "div(phi H) = 0", [lmin.defect], cfg.tol("l_minimal"))
        if not rec.passed:
            raise StageFailed
        fit = _einstein(cfg, S, rng)
        report.structure = {"name": S.name, "n": S.n, "epsilon": S.eps, "einstein": fit.to_dict()}
        A = fit.A if fit.is_eta_einstein else None
        pots = list(cfg.potentials)
        pots += random_potentials(imm, cfg.random_potentials, rng, cfg.random_max_mode)
        for i, pot in enumerate(pots):
            _one_variation(report, cfg, imm, S, pot, A, f"sv[{i}].")
        if A is not None and H_max <= cfg.tol("l_minimal"):
            _variation_verdict(report, cfg, imm, S, A)
    return report


def _one_variation(report: RunReport, cfg: RunConfig, imm, S, pot: DeformationPotential, A, prefix: str) -> None:
    with _stage(report, prefix.rstrip("."), f"second variation for f = {pot.text}"):
        v = second_variation(
            imm, S, pot, A=A, h_t=cfg.fd["h_t"], flow_steps=cfg.fd["flow_steps"], with_fd=cfg.fd["enabled"],
            legendrian_tol=cfg.tol("legendrian"), l_minimal_tol=cfg.tol("l_minimal"),
        )
        report.variations.append(v.to_dict())
        recs = report.records
        recs.add(f"{prefix}closed_vs_trace",
                 "1/4{(lap f)^2 - 2 eps |grad f|^2 - Ric(phi grad f, phi grad f) - 2 g(H, h(grad f, grad f)) "
                 "+ g(H, phi grad f)^2} vs tr[(nabla^perp V, nabla^perp V) + Rm(., V, ., V)] - g(A_V, A_V)",
                 [v.closed_vs_trace], cfg.tol("dual_forms"))
        if v.closed_vs_short is not None:
            recs.add(f"{prefix}closed_vs_short", "1/4 int (lap f)^2 - (A + 2 eps) |grad f|^2 (eta-Einstein)",
                     [v.closed_vs_short], cfg.tol("dual_forms"))
        if v.fd is not None:
            recs.add(f"{prefix}closed_vs_fd", "closed form vs d^2/dt^2 vol(L_t), |a - b| / (1 + |b|)",
                     [v.closed_vs_fd], cfg.tol("second_variation"))
            recs.add_flag(f"{prefix}fd_order", "Richardson order of the volume difference quotients >= 2",
                          v.fd.order_ok, residual=v.fd.order if v.fd.order is not None else 0.0, tolerance=2.0)
            recs.add(f"{prefix}first_variation", "d/dt vol(L_t) = -int g(V, H)",
                     [v.first_residual / (1.0 + abs(v.first_fd))], cfg.tol("first_variation"))


def _variation_verdict(report: RunReport, cfg: RunConfig, imm, S, A: float) -> None:
    with _stage(report, "sv.verdict", "lambda_1 >= A + 2 eps"):
        spec = laplace_spectrum(imm, S, cfg.spectral["k"], resolution=cfg.spectral["resolution"],
                                tol=cfg.spectral["tol"], max_nodes=cfg.spectral["max_nodes"])
        report.spectra.append(_spectrum_entry(imm.name, spec))
        verdict = stability_verdict(spec.lambda1, A, S.eps, band=cfg.spectral["band"])
        report.verdicts.append({"label": imm.name, "A": A, **verdict.to_dict()})
        negative = [v["potential"] for v in report.variations if v["closed_form"] < -1e-9 * max(1.0, v["volume"])]
        report.records.add_flag("sv.verdict_consistent", "a negative second variation rules out stability",
                                not (verdict.stable and negative))


# ---------------------------------------------------------------------------
# tanno
# ---------------------------------------------------------------------------


def run_tanno(cfg: RunConfig) -> RunReport:
    """Deformation laws for each α, and stability equivalence when an immersion is configured."""
    report, rng = _new_report(cfg, "tanno")
    S, imm = cfg.ambient, cfg.immersion
    for alpha in cfg.alphas:
        prefix = f"alpha={alpha:g}."
        row = {"alpha": alpha, "beta": alpha + alpha**2}
        report.tanno.append(row)
        with _stage(report, prefix + "deform", "alpha g - beta eta (x) eta"):
            T = deform(S, alpha)
            recs = report.records
            recs.extend(T.invariants(rng=rng, count=cfg.samples, tol=cfg.tol("identity")), prefix)
            recs.extend(connection_difference_check(T, rng=rng, count=cfg.samples, tol=cfg.tol("connection")), prefix)
            recs.extend(curvature_relation_check(T, rng=rng, count=cfg.samples, tol=cfg.tol("curvature_relation")),
                        prefix)
            ein = einstein_constants_check(T, rng=rng, count=cfg.samples, tol=cfg.tol("einstein"))
            recs.extend(ein.report, prefix)
            row.update(A=ein.source.A, A_alpha_fit=ein.target.A, A_alpha_predicted=ein.predicted, B_alpha_fit=ein.target.B)
            if imm is not None:
                _tanno_immersion(report, cfg, imm, T, ein, prefix, row)
    return report


def _tanno_immersion(report: RunReport, cfg: RunConfig, imm, T, ein, prefix: str, row: dict) -> None:
    recs = report.records
    defect = legendrian_defect(imm, T.source)
    if cfg.checks["legendrian"]:
        recs.add(prefix + "legendrian", "f*eta = 0", [defect], cfg.tol("legendrian"))
    if defect > cfg.tol("legendrian"):
        # the tangential connections differ off the contact distribution
        recs.extend(tangent_connection_check(imm, T, tol=cfg.tol("connection")), prefix)
        return
    mc = minimality_preservation_check(imm, T, tol=cfg.tol("l_minimal"), homothety_tol=cfg.tol("homothety"))
    recs.extend(mc.report, prefix)
    row.update(source_H=mc.source_H, target_H=mc.target_H)
    if not imm.closed:
        return
    if not (ein.source.is_eta_einstein and ein.target.is_eta_einstein):
        report.errors.append({"stage": prefix + "stability", "type": "skipped", "message": "not eta-Einstein"})
        return
    st = stability_equivalence_check(
        imm, T, k=cfg.spectral["k"], A=ein.source.A, A_alpha=ein.target.A,
        band=cfg.spectral["band"], scale_tol=cfg.tol("eigen_scaling"),
    )
    recs.extend(st.report, prefix)
    report.spectra.append(_spectrum_entry(f"{imm.name}@source,{prefix.rstrip('.')}", st.source_spectrum))
    report.spectra.append(_spectrum_entry(f"{imm.name}@target,{prefix.rstrip('.')}", st.target_spectrum))
    report.verdicts.append({"label": f"{imm.name}@source,{prefix.rstrip('.')}", "A": st.A, **st.source.to_dict()})
    report.verdicts.append({"label": f"{imm.name}@target,{prefix.rstrip('.')}", "A": st.A_alpha, **st.target.to_dict()})
    row.update(lambda1=st.source.lambda1, lambda1_target=st.target.lambda1,
               verdict=st.source.label, verdict_target=st.target.label)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


def run_spectrum(cfg: RunConfig) -> RunReport:
    """Low spectrum of ``L`` with its oracles, and the verdict when the ambient is η-Einstein."""
    report, rng = _new_report(cfg, "spectrum")
    S, imm = cfg.ambient, cfg.immersion
    tol = cfg.tol("spectrum")
    with _stage(report, "spectrum", "Laplace-Beltrami spectrum of the induced metric"):
        spec = laplace_spectrum(imm, S, cfg.spectral["k"], resolution=cfg.spectral["resolution"],
                                tol=cfg.spectral["tol"], max_nodes=cfg.spectral["max_nodes"])
        report.spectra.append(_spectrum_entry(imm.name, spec))
        lam1 = spec.lambda1
        report.records.add("spectrum.lambda1_error", "Richardson error estimate of lambda_1 (relative)",
                           [spec.error_estimate / max(abs(lam1), 1e-300)], tol)
        try:
            lattice = flat_lattice_spectrum(imm, S, cfg.spectral["k"])
        except SpectrumError:
            lattice = None
        if lattice is not None:
            report.spectra.append(_spectrum_entry(imm.name + "@lattice", lattice))
            grid, exact = np.asarray(spec.eigenvalues[1:]), np.asarray(lattice.eigenvalues[1:])
            report.records.add("spectrum.lattice", "lambda_k matches |2 pi m / L|^2_g on the flat torus (relative)",
                               (grid - exact) / exact, tol)
        if imm.eigen_hint is not None:
            geom = induced_geometry(imm, S)
            pot = DeformationPotential.of(imm.eigen_hint, imm.param_names)
            f, df, ddf = pot.jets(geom.params)
            lap, _ = geom.laplacian_and_hessian(df, ddf)
            resid = math.sqrt(geom.integrate((lap - lam1 * f) ** 2) / geom.integrate(f**2))
            report.records.add("spectrum.eigenfunction", "lap f = lambda_1 f for the catalog eigenfunction",
                               [resid / max(abs(lam1), 1.0)], tol)
        fit = _einstein(cfg, S, rng)
        report.structure = {"name": S.name, "n": S.n, "epsilon": S.eps, "einstein": fit.to_dict()}
        if fit.is_eta_einstein:
            verdict = stability_verdict(lam1, fit.A, S.eps, band=cfg.spectral["band"])
            report.verdicts.append({"label": imm.name, "A": fit.A, **verdict.to_dict()})
    return report


RUNNERS = {
    "verify": run_verify,
    "second-variation": run_second_variation,
    "tanno": run_tanno,
    "spectrum": run_spectrum,
}


def run(cfg: RunConfig, command: str | None = None) -> RunReport:
    cmd = command or cfg.command
    if cmd not in RUNNERS:
        raise ValueError(f"unknown command {cmd!r}")
    return RUNNERS[cmd](cfg)
