"""Numerical verification engine for pseudo-Sasakian geometry and Legendrian submanifolds."""

__version__ = "0.1.0"

from .catalog import IMMERSIONS, MODELS, immersion_catalog, model_catalog  # noqa: E402
from .contact import (  # noqa: E402
    AmbientStructure,
    curvature_identity_suite,
    eta_einstein_constants,
    sabotage,
    verify_sasakian,
)
from .expr import evaluate, parse, to_text  # noqa: E402
from .report import IdentityRecord, IdentityReport  # noqa: E402
from .spectral import laplace_spectrum, stability_verdict  # noqa: E402
from .submanifold import Immersion, induced_geometry, legendrian_defect  # noqa: E402
from .tanno import deform, einstein_constant_map  # noqa: E402
from .variation import DeformationPotential, l_minimality_defect, second_variation  # noqa: E402

__all__ = [
    "AmbientStructure",
    "DeformationPotential",
    "IMMERSIONS",
    "IdentityRecord",
    "IdentityReport",
    "Immersion",
    "MODELS",
    "curvature_identity_suite",
    "deform",
    "einstein_constant_map",
    "eta_einstein_constants",
    "evaluate",
    "immersion_catalog",
    "induced_geometry",
    "l_minimality_defect",
    "laplace_spectrum",
    "legendrian_defect",
    "model_catalog",
    "parse",
    "sabotage",
    "second_variation",
    "stability_verdict",
    "to_text",
    "verify_sasakian",
]
