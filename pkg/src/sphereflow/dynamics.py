"""Drift and noise coefficients for the five model variants.

All drifts have the node-wise form ``u x G(u)``: the precession term is
``u x u''`` and the damping term is ``-nu * u x (u x u'')``.  The damping is
deliberately computed in that double-cross form (rather than the equivalent
``u'' + u|u'|^2``) so the pointwise identity between the two stays an
independent cross-check instead of a tautology.

Ito corrections are defined here because they belong to the model, but only
the Ito-mode scheme consumes them; the Stratonovich rotation stepping never
adds them.  That split keeps the Ito/Stratonovich equivalence testable as a
scheme-level property.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fields import NoiseIntensity, SphereField
from .grid import Grid1D, d2_neumann

__all__ = [
    "MODEL_KINDS",
    "ModelSpec",
    "drift_sme",
    "drift_model",
    "cross_argument",
    "noise_coefficient",
    "ito_correction",
]

MODEL_KINDS = ("sme", "llg_fluc_diss", "llg_modified", "ssme", "spherical_bm")

# kinds whose drift carries the -nu u x (u x u'') damping term
_DAMPED = ("llg_fluc_diss", "llg_modified")


@dataclass(frozen=True)
class ModelSpec:
    """Which equation to integrate: kind, viscosity nu in [0, 1], intensity h."""

    kind: str
    nu: float = 0.0
    h: NoiseIntensity | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if not (0.0 <= self.nu <= 1.0):
            raise ConfigurationError(f"nu must lie in [0, 1], got {self.nu}")
        if self.kind in _DAMPED and self.h is None:
            raise ConfigurationError(f"model kind {self.kind!r} requires a noise intensity h")


def drift_sme(u: SphereField) -> np.ndarray:
    """Precession drift u x u'' of the undamped map flow."""
    return np.cross(u.values, d2_neumann(u.values, u.grid))


def cross_argument(values: np.ndarray, spec: ModelSpec, grid: Grid1D) -> np.ndarray:
    """G(u) such that the model drift is u x G(u) node-wise.

    G = u'' for the undamped kinds, G = u'' - nu*(u x u'') for the damped
    ones, and G = 0 for spherical Brownian motion.  The midpoint solver
    relies on this factorization for exact norm conservation.
    """
    if spec.kind == "spherical_bm":
        return np.zeros_like(values)
    lap = d2_neumann(values, grid)
    if spec.kind in _DAMPED:
        return lap - spec.nu * np.cross(values, lap)
    return lap


def drift_model(u: SphereField, spec: ModelSpec) -> np.ndarray:
    """Full drift of the chosen model (no Ito correction)."""
    return np.cross(u.values, cross_argument(u.values, spec, u.grid))


def noise_coefficient(spec: ModelSpec, grid: Grid1D) -> np.ndarray:
    """Scalar noise coefficient g(x): the node-wise rotation rate per unit noise.

    g = sqrt(nu)*h for the damped-driven flow, g = sqrt(nu)*h + 1 for its
    modified variant, g = 1 for the stochastic map flow and spherical
    Brownian motion, g = 0 for the deterministic flow.
    """
    if spec.kind == "sme":
        return np.zeros(grid.n)
    if spec.kind in ("ssme", "spherical_bm"):
        return np.ones(grid.n)
    if spec.h is None or spec.h.grid.n != grid.n:
        raise ConfigurationError("noise intensity h missing or on a different grid")
    if spec.kind == "llg_fluc_diss":
        return np.sqrt(spec.nu) * spec.h.h
    # llg_modified
    return np.sqrt(spec.nu) * spec.h.h + 1.0


def ito_correction(u: SphereField, spec: ModelSpec) -> np.ndarray:
    """Stratonovich-to-Ito drift correction -g(x)^2 u, node-wise anti-parallel to u."""
    g = noise_coefficient(spec, u.grid)
    return -(g * g)[:, None] * u.values
