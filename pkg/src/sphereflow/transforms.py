"""Geometric transforms: spatial primitive (curve flow) and curvature/torsion map.

The spatial primitive of a unit field evolving under u_t = u x u'' traces a
curve moving by its own binormal curvature; its defect is measurable on the
grid.  The primitive uses a left-endpoint cumulative sum on purpose: the
forward difference of the curve then recovers the field exactly, so the
discrete arclength condition holds to machine precision.  That structural
exactness is worth more here than the quadrature order a trapezoid rule
would buy.

The curve solves the flow only up to a spatially constant, time-dependent
drift (the boundary term of the telescoped discrete integral, O(dx) for
zero-flux data); curves are physically defined modulo such rigid
translations, so :func:`bcf_residual` removes the constant component of the
defect before taking the norm and reports the raw defect separately.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .fields import Curve, SphereField
from .grid import Grid1D, d1_neumann, d2_neumann

__all__ = [
    "HashimotoField",
    "bcf_transform",
    "arclength_residual",
    "bcf_defect",
    "bcf_residual",
    "hashimoto",
]


@dataclass(frozen=True)
class HashimotoField:
    """Curvature k, torsion tau and the complex field q = k*exp(i*int tau).

    tau is NaN and ``defined`` False at nodes where k <= eps (the torsion
    quotient degenerates); |q| = k wherever defined.
    """

    grid: Grid1D
    k: np.ndarray
    tau: np.ndarray
    q: np.ndarray
    defined: np.ndarray


def bcf_transform(u: SphereField) -> Curve:
    """Left-endpoint primitive: gamma_0 = 0, gamma_{i+1} = gamma_i + dx*u_i.

    Forward differencing the result returns u exactly, hence the discrete
    arclength |gamma_{i+1}-gamma_i|/dx is exactly 1.
    """
    g = u.grid
    pts = np.zeros((g.n, 3))
    np.cumsum(u.values[:-1] * g.dx, axis=0, out=pts[1:])
    return Curve(g, pts)


def arclength_residual(curve: Curve) -> float:
    """max_i | |gamma_{i+1}-gamma_i|/dx - 1 |."""
    seg = np.diff(curve.points, axis=0)
    return float(np.abs(np.linalg.norm(seg, axis=1) / curve.grid.dx - 1.0).max())


def _curve_velocity(points: np.ndarray, dx: float) -> np.ndarray:
    """gamma' x gamma'' by plain central differences, interior nodes only."""
    dgamma = (points[2:] - points[:-2]) / (2.0 * dx)
    d2gamma = (points[2:] - 2.0 * points[1:-1] + points[:-2]) / dx**2
    return np.cross(dgamma, d2gamma)


def bcf_defect(curves: Sequence[Curve], times: Sequence[float]) -> np.ndarray:
    """Interior-node defect gamma(t_m) - gamma(t_0) - int gamma' x gamma'' dt.

    The time integral is a trapezoid over the snapshots.
    """
    if len(curves) < 2:
        raise InvalidInputError(f"need at least 2 snapshots, got {len(curves)}")
    if len(curves) != len(times):
        raise InvalidInputError("snapshot and time counts differ")
    times = np.asarray(times, dtype=float)
    if not np.all(np.diff(times) > 0):
        raise InvalidInputError("snapshot times must be strictly increasing")
    grid = curves[0].grid
    vel = np.stack([_curve_velocity(c.points, grid.dx) for c in curves])
    integral = np.trapezoid(vel, times, axis=0)
    return curves[-1].points[1:-1] - curves[0].points[1:-1] - integral


def bcf_residual(curves: Sequence[Curve], times: Sequence[float]) -> float:
    """L2 norm of the flow defect modulo its spatially constant component."""
    grid = curves[0].grid
    defect = bcf_defect(curves, times)
    w = grid.weights[1:-1]
    mean = (w[:, None] * defect).sum(axis=0) / w.sum()
    centered = defect - mean
    return float(math.sqrt(np.dot(w, np.einsum("ij,ij->i", centered, centered))))


def hashimoto(u: SphereField, eps: float = 1e-8) -> HashimotoField:
    """Curvature k = |u'|, torsion tau = (u x u').u'' / |u'|^2, q = k*exp(i*T).

    T is the left-endpoint cumulative integral of tau from 0; nodes with
    k <= eps have undefined torsion and contribute zero phase, so the phase
    is only meaningful piecewise when interior gaps exist (a warning is
    emitted in that case).  q vanishes wherever k does, and |q| = k exactly
    wherever tau is defined.
    """
    g = u.grid
    du = d1_neumann(u.values, g)
    lap = d2_neumann(u.values, g)
    k = np.linalg.norm(du, axis=1)
    defined = k > eps
    tau = np.full(g.n, np.nan)
    if defined.any():
        num = np.einsum("ij,ij->i", np.cross(u.values[defined], du[defined]), lap[defined])
        tau[defined] = num / k[defined] ** 2
    if not defined[1:-1].all():
        warnings.warn(
            "torsion undefined at interior nodes (|u'| <= eps); "
            "the cumulative phase is only piecewise meaningful",
            stacklevel=2,
        )
    tau_eff = np.where(defined, tau, 0.0)
    phase = np.zeros(g.n)
    np.cumsum(tau_eff[:-1] * g.dx, out=phase[1:])
    q = k * np.exp(1j * phase)
    return HashimotoField(g, k, tau, q, defined)
