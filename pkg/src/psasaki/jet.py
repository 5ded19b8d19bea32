"""Second-order forward-mode jets over batched numpy arrays.

A :class:`Jet` carries a value together with its gradient and Hessian with
respect to ``d`` independent variables.  Every array has a leading batch
shape, so one jet represents the same quantity at many points at once.
"""

from __future__ import annotations

import numpy as np


def _sym_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # a_i b_j + b_i a_j is symmetric bit-for-bit, which keeps Hessians exact
    return a[..., :, None] * b[..., None, :] + b[..., :, None] * a[..., None, :]


class Jet:
    """Value, first and second partials of a scalar field at a batch of points."""

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def constant(cls, c: float, shape: tuple, d: int) -> "Jet":
        return cls(
            np.full(shape, float(c)),
            np.zeros(shape + (d,)),
            np.zeros(shape + (d, d)),
        )

    @classmethod
    def variable(cls, values: np.ndarray, index: int, d: int) -> "Jet":
        values = np.asarray(values, dtype=float)
        grad = np.zeros(values.shape + (d,))
        grad[..., index] = 1.0
        return cls(values.copy(), grad, np.zeros(values.shape + (d, d)))

    @classmethod
    def seed(cls, points: np.ndarray) -> list["Jet"]:
        """Independent-variable jets for each column of ``points`` (shape (N, d))."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = points.shape[-1]
        return [cls.variable(points[..., i], i, d) for i in range(d)]

    def copy(self) -> "Jet":
        return Jet(self.val.copy(), self.grad.copy(), self.hess.copy())

    # arithmetic ------------------------------------------------------------

    def __neg__(self) -> "Jet":
        return Jet(-self.val, -self.grad, -self.hess)

    def __add__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return Jet(self.val + other.val, self.grad + other.grad, self.hess + other.hess)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return Jet(self.val - other.val, self.grad - other.grad, self.hess - other.hess)
        return Jet(self.val - other, self.grad, self.hess)

    def __rsub__(self, other) -> "Jet":
        return Jet(other - self.val, -self.grad, -self.hess)

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            a, b = self, other
            hess = (
                a.val[..., None, None] * b.hess
                + b.val[..., None, None] * a.hess
                + _sym_outer(a.grad, b.grad)
            )
            grad = a.val[..., None] * b.grad + b.val[..., None] * a.grad
            return Jet(a.val * b.val, grad, hess)
        c = np.asarray(other, dtype=float)
        return Jet(self.val * c, self.grad * c[..., None], self.hess * c[..., None, None])

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    # chain rule ------------------------------------------------------------

    def compose(self, f0, f1, f2) -> "Jet":
        """Apply a scalar function given its value and first two derivatives at ``val``."""
        grad = f1[..., None] * self.grad
        hess = f1[..., None, None] * self.hess + f2[..., None, None] * (
            self.grad[..., :, None] * self.grad[..., None, :]
        )
        return Jet(f0, grad, hess)

    def reciprocal(self) -> "Jet":
        x = self.val
        inv = 1.0 / x
        return self.compose(inv, -inv * inv, 2.0 * inv * inv * inv)

    def sin(self) -> "Jet":
        s, c = np.sin(self.val), np.cos(self.val)
        return self.compose(s, c, -s)

    def cos(self) -> "Jet":
        s, c = np.sin(self.val), np.cos(self.val)
        return self.compose(c, -s, -c)

    def exp(self) -> "Jet":
        e = np.exp(self.val)
        return self.compose(e, e, e)

    def log(self) -> "Jet":
        x = self.val
        return self.compose(np.log(x), 1.0 / x, -1.0 / (x * x))

    def sqrt(self) -> "Jet":
        r = np.sqrt(self.val)
        return self.compose(r, 0.5 / r, -0.25 / (r * self.val))

    def power(self, p: float) -> "Jet":
        x = self.val
        if float(p).is_integer():
            k = int(p)
            if k == 0:
                return Jet.constant(1.0, x.shape, self.dim)
            if k == 1:
                return self.copy()
            f0 = x**k
            f1 = k * x ** (k - 1)
            f2 = k * (k - 1) * x ** (k - 2) if k != 2 else np.full_like(x, 2.0)
            return self.compose(f0, f1, f2)
        return self.compose(x**p, p * x ** (p - 1), p * (p - 1) * x ** (p - 2))
