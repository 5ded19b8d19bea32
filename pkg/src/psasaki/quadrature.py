"""Tensor-product quadrature grids on parameter boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

MIN_GAUSS_NODES = 16


@dataclass(frozen=True)
class Grid:
    """Nodes in C order over ``shape``; ``weights`` already include the box size."""

    axes: tuple
    axis_weights: tuple
    periodic: tuple
    domain: tuple

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def weights(self) -> np.ndarray:
        w = self.axis_weights[0]
        for a in self.axis_weights[1:]:
            w = np.multiply.outer(w, a)
        return np.asarray(w).ravel()

    @property
    def closed(self) -> bool:
        return all(self.periodic)

    def integrate(self, values) -> float | np.ndarray:
        """Sum of ``weights * values`` over the node axis (the first axis)."""
        v = np.asarray(values, dtype=float)
        return np.tensordot(self.weights, v, axes=(0, 0))

    def periods(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.domain])

    def derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Spectral derivative along a periodic axis of node values.

        ``values`` has the node axis first, flattened in C order; trailing
        axes are carried along.  The Nyquist mode's derivative is set to zero
        so real data stays real.
        """
        if not self.periodic[axis]:
            raise ValueError("spectral differentiation needs a periodic axis")
        v = np.asarray(values, dtype=float)
        tail = v.shape[1:]
        u = v.reshape(self.shape + tail)
        m = self.shape[axis]
        L = self.domain[axis][1] - self.domain[axis][0]
        k = np.fft.fftfreq(m, d=1.0 / m)
        if m % 2 == 0:
            k[m // 2] = 0.0
        ik = 2j * np.pi * k / L
        shape = [1] * u.ndim
        shape[axis] = m
        du = np.fft.ifft(np.fft.fft(u, axis=axis) * ik.reshape(shape), axis=axis).real
        return du.reshape(v.shape)


def tensor_grid(domain, periodic, counts) -> Grid:
    """Trapezoidal nodes on periodic axes, Gauss–Legendre on the others."""
    if not (len(domain) == len(periodic) == len(counts)):
        raise ValueError("domain, periodic and counts must have equal length")
    axes, weights = [], []
    for (lo, hi), per, m in zip(domain, periodic, counts):
        lo, hi, m = float(lo), float(hi), int(m)
        if not hi > lo:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        if per:
            if m < 3:
                raise ValueError("a periodic axis needs at least 3 nodes")
            axes.append(lo + (hi - lo) * np.arange(m) / m)
            weights.append(np.full(m, (hi - lo) / m))
        else:
            if m < MIN_GAUSS_NODES:
                raise ValueError(f"a Gauss–Legendre axis needs at least {MIN_GAUSS_NODES} nodes")
            x, w = leggauss(m)
            axes.append(lo + (hi - lo) * (x + 1.0) / 2.0)
            weights.append(w * (hi - lo) / 2.0)
    return Grid(
        tuple(axes),
        tuple(weights),
        tuple(bool(p) for p in periodic),
        tuple((float(lo), float(hi)) for lo, hi in domain),
    )
