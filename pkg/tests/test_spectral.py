import math

import numpy as np
import pytest

from psasaki.catalog import immersion_catalog, round_sphere
from psasaki.spectral import (
    SpectrumError,
    flat_lattice_spectrum,
    grid_eigenvalues,
    lattice_spectrum,
    laplace_spectrum,
    stability_verdict,
)
from psasaki.tanno import deform

S3 = round_sphere(1)
S5 = round_sphere(2)
CIRCLE = immersion_catalog("great-circle")


def test_great_circle_lambda1_with_multiplicity_two():
    s = laplace_spectrum(CIRCLE, S3, 6)
    assert s.eigenvalues[0] == 0.0
    assert s.lambda1 == pytest.approx(1.0, abs=1e-4)
    assert s.eigenvalues[2] == pytest.approx(1.0, abs=1e-4)
    assert s.eigenvalues[3] == pytest.approx(4.0, abs=1e-3)


def test_spectrum_is_nondecreasing_and_starts_at_zero():
    for name, S in (("great-circle", S3), ("torus-knot", S3), ("clifford-torus", S5)):
        s = laplace_spectrum(immersion_catalog(name), S, 6)
        assert s.eigenvalues[0] == 0.0
        assert np.all(np.diff(s.raw_eigenvalues) >= -1e-10)


def test_clifford_torus_matches_lattice():
    imm = immersion_catalog("clifford-torus")
    grid = laplace_spectrum(imm, S5, 7)
    exact = flat_lattice_spectrum(imm, S5, 7)
    np.testing.assert_allclose(grid.eigenvalues, exact.eigenvalues, atol=1e-3)
    assert exact.eigenvalues[1] == exact.eigenvalues[2]


def test_lattice_spectrum_of_unit_circle():
    ev = lattice_spectrum(np.eye(1), [2 * math.pi], 5)
    assert ev == pytest.approx([0.0, 1.0, 1.0, 4.0, 4.0])


def test_flat_lattice_rejects_curved_metric():
    with pytest.raises(SpectrumError):
        flat_lattice_spectrum(immersion_catalog("bumped-knot"), S3)


@pytest.mark.parametrize("alpha", [0.5, 2.0, 3.0])
def test_scaled_metric_scales_eigenvalues(alpha):
    T = deform(S3, alpha).target
    s = laplace_spectrum(CIRCLE, T, 4)
    assert s.lambda1 == pytest.approx(1.0 / alpha, rel=1e-4)


def test_grid_refinement_converges_at_second_order():
    errs = [abs(grid_eigenvalues(CIRCLE, S3, 3, (m,))[1] - 1.0) for m in (16, 32, 64)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_non_closed_immersions_are_rejected():
    with pytest.raises(SpectrumError):
        laplace_spectrum(immersion_catalog("real-sphere"), S5)
    with pytest.raises(SpectrumError):
        laplace_spectrum(CIRCLE, S3, 1)


def test_verdict_examples():
    v = stability_verdict(1.0, 2.0, 1)
    assert v.label == "unstable" and not v.corollary and v.threshold == 4.0
    v = stability_verdict(0.1, -2.0, 1)
    assert v.stable and v.corollary
    v = stability_verdict(0.1, 2.0, -1)
    assert v.stable and v.corollary and v.threshold == 0.0
    v = stability_verdict(4.0, 2.0, 1)
    assert v.label == "marginal" and v.stable
    assert stability_verdict(4.0 + 5e-4, 2.0, 1).marginal
    assert stability_verdict(4.1, 2.0, 1).label == "stable"
    assert stability_verdict(3.9, 2.0, 1).label == "unstable"
    assert stability_verdict(3.9, 2.0, 1, band=0.2).label == "marginal"
