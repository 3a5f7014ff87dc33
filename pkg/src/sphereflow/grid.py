"""Uniform 1D grid on [0, length] with Neumann boundary conventions.

Difference operators, trapezoid quadrature norms and spatial averages.  All
operators accept scalar fields of shape (n,) or vector fields of shape (n, 3)
and are pure functions, safe to call concurrently.

Conventions (fixed across the package so that identity residuals converge at
one uniform order):

* first derivative: central difference at interior nodes, pinned to the zero
  vector at both boundary nodes (simulated fields satisfy the zero-flux
  boundary condition by construction);
* second derivative: 3-point stencil with mirrored ghost nodes, i.e.
  ``2*(f[1]-f[0])/dx^2`` at the left boundary and symmetrically on the right;
* quadrature: trapezoid weights ``dx/2, dx, ..., dx, dx/2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Grid1D",
    "d1_neumann",
    "d2_neumann",
    "norm_l2_sq",
    "norm_l4_4",
    "inner_l2",
    "space_average",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid: ``n`` nodes at ``x_i = i*dx`` spanning exactly [0, length]."""

    length: float
    n: int

    def __post_init__(self):
        if not (self.length > 0):
            raise ConfigurationError(f"grid length must be positive, got {self.length}")
        if self.n < 3:
            raise ConfigurationError(f"grid needs at least 3 nodes, got n={self.n}")

    @property
    def dx(self) -> float:
        return self.length / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


def _check_shape(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != grid.n or f.ndim not in (1, 2) or (f.ndim == 2 and f.shape[1] != 3):
        raise ConfigurationError(
            f"field of shape {f.shape} does not match grid with n={grid.n} "
            "(expected (n,) or (n, 3))"
        )
    return f


def d1_neumann(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Central first derivative; zero at the boundary nodes (zero-flux trace)."""
    f = _check_shape(f, grid)
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * grid.dx)
    return out


def d2_neumann(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Second derivative with mirrored ghost nodes at the boundary."""
    f = _check_shape(f, grid)
    inv = 1.0 / grid.dx**2
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) * inv
    out[0] = 2.0 * (f[1] - f[0]) * inv
    out[-1] = 2.0 * (f[-2] - f[-1]) * inv
    return out


def _node_sq(f: np.ndarray) -> np.ndarray:
    """Per-node squared magnitude, |f_i|^2."""
    if f.ndim == 1:
        return f * f
    return np.einsum("ij,ij->i", f, f)


def norm_l2_sq(f: np.ndarray, grid: Grid1D) -> float:
    """Trapezoid quadrature of |f|^2."""
    f = _check_shape(f, grid)
    return float(np.dot(grid.weights, _node_sq(f)))


def norm_l4_4(f: np.ndarray, grid: Grid1D) -> float:
    """Trapezoid quadrature of |f|^4."""
    f = _check_shape(f, grid)
    return float(np.dot(grid.weights, _node_sq(f) ** 2))


def inner_l2(f: np.ndarray, g: np.ndarray, grid: Grid1D) -> float:
    """Trapezoid quadrature of the pointwise product f . g."""
    f = _check_shape(f, grid)
    g = _check_shape(g, grid)
    if f.shape != g.shape:
        raise ConfigurationError(f"inner product shape mismatch: {f.shape} vs {g.shape}")
    if f.ndim == 1:
        return float(np.dot(grid.weights, f * g))
    return float(np.dot(grid.weights, np.einsum("ij,ij->i", f, g)))


def space_average(f: np.ndarray, grid: Grid1D):
    """Quadrature of f divided by the domain length; 3-vector for vector fields."""
    f = _check_shape(f, grid)
    if f.ndim == 1:
        return float(np.dot(grid.weights, f) / grid.length)
    return grid.weights @ f / grid.length
