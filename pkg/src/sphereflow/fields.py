"""Sphere-valued fields, noise-intensity profiles and pointwise identity residuals.

A :class:`SphereField` stores one unit 3-vector per grid node.  Construction
always validates the unit constraint; nothing else in the package silently
renormalizes, so a constraint violation points at the producer, not here.

The residual functions turn geometric identities that hold exactly for smooth
unit fields into grid diagnostics; on smooth data they vanish at second order
under grid refinement, and they stay O(1) on deliberately invalid inputs,
which makes them usable as negative controls.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateProjectionError, InvalidInputError
from .grid import Grid1D, d1_neumann, d2_neumann, norm_l2_sq, norm_l4_4

__all__ = [
    "SphereField",
    "NoiseIntensity",
    "Curve",
    "HMoments",
    "make_initial",
    "project_sphere",
    "tangency_residual",
    "fundamental_identity_residual",
    "damping_identity_residual",
    "h_moments",
    "cosine_analytic_moments",
]

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class SphereField:
    """Unit 3-vector field over a grid.  Immutable after construction."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, 3):
            raise ConfigurationError(
                f"sphere field values of shape {v.shape} do not match grid n={self.grid.n}"
            )
        dev = np.abs(np.linalg.norm(v, axis=1) - 1.0).max()
        if dev > UNIT_TOL:
            raise InvalidInputError(
                f"sphere constraint violated: max | |u|-1 | = {dev:.3e} > {UNIT_TOL:.0e}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Curve:
    """A curve in R^3 sampled over the grid nodes (the spatial primitive of a field)."""

    grid: Grid1D
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.shape != (self.grid.n, 3):
            raise ConfigurationError(
                f"curve of shape {p.shape} does not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "points", p)


@dataclass(frozen=True)
class NoiseIntensity:
    """Scalar spatial modulation h(x) with its derivative.

    ``dx_h`` is analytic for the built-in families (constant, cosine) and a
    central difference (one-sided at the boundary) for tabulated data.  The
    family tag is authoritative: mixing conventions would corrupt the moment
    targets derived from it.
    """

    grid: Grid1D
    h: np.ndarray
    dx_h: np.ndarray
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("h", "dx_h"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (self.grid.n,):
                raise ConfigurationError(
                    f"{name} of shape {v.shape} does not match grid n={self.grid.n}"
                )
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def constant(cls, grid: Grid1D, value: float) -> "NoiseIntensity":
        n = grid.n
        return cls(grid, np.full(n, float(value)), np.zeros(n), "constant", {"value": float(value)})

    @classmethod
    def cosine(cls, grid: Grid1D, alpha: float, k: int) -> "NoiseIntensity":
        """h(x) = alpha*cos(x) on [0, 2*pi*k]; requires the grid to span exactly that."""
        if int(k) != k or k < 1:
            raise ConfigurationError(f"cosine family needs a positive integer k, got {k}")
        k = int(k)
        target = 2.0 * math.pi * k
        if abs(grid.length - target) > 1e-9 * max(1.0, target):
            raise ConfigurationError(
                f"cosine(alpha, k={k}) requires domain length 2*pi*k = {target!r}, "
                f"grid has length {grid.length!r}"
            )
        x = grid.nodes
        return cls(grid, alpha * np.cos(x), -alpha * np.sin(x), "cosine", {"alpha": float(alpha), "k": k})

    @classmethod
    def tabulated(cls, grid: Grid1D, x: np.ndarray, h: np.ndarray) -> "NoiseIntensity":
        """Tabulated h at the grid nodes; derivative by central differences."""
        x = np.asarray(x, dtype=float)
        h = np.asarray(h, dtype=float)
        if x.shape != (grid.n,) or h.shape != (grid.n,):
            raise ConfigurationError(
                f"tabulated data of length {len(x)} does not match grid n={grid.n}"
            )
        if np.abs(x - grid.nodes).max() > 1e-9 * max(1.0, grid.length):
            raise ConfigurationError("tabulated x column does not match the grid nodes")
        dx = grid.dx
        dh = np.empty_like(h)
        dh[1:-1] = (h[2:] - h[:-2]) / (2.0 * dx)
        dh[0] = (-3.0 * h[0] + 4.0 * h[1] - h[2]) / (2.0 * dx)
        dh[-1] = (3.0 * h[-1] - 4.0 * h[-2] + h[-3]) / (2.0 * dx)
        return cls(grid, h, dh, "tabulated", {})

    @classmethod
    def from_csv(cls, path, grid: Grid1D) -> "NoiseIntensity":
        """Read a two-column CSV (x, h); the x column must match the grid nodes."""
        xs, hs = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    xs.append(float(row[0]))
                    hs.append(float(row[1]))
                except (ValueError, IndexError) as exc:
                    raise ConfigurationError(f"malformed CSV row {row!r} in {path}") from exc
        return cls.tabulated(grid, np.array(xs), np.array(hs))


@dataclass(frozen=True)
class HMoments:
    """Spatial moments of a noise intensity used by checks and the probability bound."""

    mean: float        # <h>
    mean_sq: float     # <h^2>
    mean_abs: float    # <|h|>
    sup: float         # sup |h|
    grad_l2_sq: float  # squared L2 norm of dh/dx (not averaged)


def make_initial(kind: str, grid: Grid1D, **params) -> SphereField:
    """Built-in initial data, compatible with the zero-flux boundary condition.

    ``constant``: q must be a unit 3-vector (tolerance 1e-9).
    ``great_circle_profile``: u(x) = (cos t(x), sin t(x), 0) with
    t(x) = amplitude * cos(pi x / length), so t'(0) = t'(L) = 0.
    ``tabulated``: explicit (n, 3) unit vectors; a warning is emitted when the
    discrete boundary derivative is large, since such data breaks the boundary
    convention the difference operators assume.
    """
    if kind == "constant":
        q = np.asarray(params["q"], dtype=float)
        if q.shape != (3,):
            raise InvalidInputError(f"constant initial datum must be a 3-vector, got shape {q.shape}")
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise InvalidInputError(
                f"constant initial datum must be unit length, | |q|-1 | = "
                f"{abs(np.linalg.norm(q) - 1.0):.3e} > 1e-9"
            )
        q = q / np.linalg.norm(q)
        return SphereField(grid, np.tile(q, (grid.n, 1)))
    if kind == "great_circle_profile":
        amplitude = float(params["amplitude"])
        theta = amplitude * np.cos(np.pi * grid.nodes / grid.length)
        values = np.stack([np.cos(theta), np.sin(theta), np.zeros(grid.n)], axis=1)
        return SphereField(grid, values)
    if kind == "tabulated":
        values = np.asarray(params["values"], dtype=float)
        u = SphereField(grid, values)
        bnd = max(
            float(np.linalg.norm(values[1] - values[0])),
            float(np.linalg.norm(values[-1] - values[-2])),
        ) / grid.dx
        threshold = float(params.get("boundary_tol", 0.1))
        if bnd > threshold:
            warnings.warn(
                f"tabulated initial datum has boundary derivative {bnd:.3g} > {threshold}; "
                "it does not satisfy the zero-flux boundary convention",
                stacklevel=2,
            )
        return u
    raise InvalidInputError(f"unknown initial-data kind {kind!r}")


def project_sphere(raw: np.ndarray, grid: Grid1D) -> SphereField:
    """Normalize each node of a raw vector field onto the unit sphere."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (grid.n, 3):
        raise ConfigurationError(f"raw field of shape {raw.shape} does not match grid n={grid.n}")
    norms = np.linalg.norm(raw, axis=1)
    bad = norms < 1e-12
    if bad.any():
        raise DegenerateProjectionError(
            f"cannot project node(s) {np.flatnonzero(bad)[:5].tolist()} with norm < 1e-12"
        )
    return SphereField(grid, raw / norms[:, None])


def tangency_residual(u: SphereField) -> float:
    """max over interior nodes of |u . du/dx|; zero for fields tangent to the sphere."""
    du = d1_neumann(u.values, u.grid)
    dots = np.einsum("ij,ij->i", u.values[1:-1], du[1:-1])
    return float(np.abs(dots).max())


def fundamental_identity_residual(u: SphereField) -> float:
    """Defect of  |u''|^2_{L2} = |u x u''|^2_{L2} + |u'|^4_{L4}  for unit fields."""
    g = u.grid
    lap = d2_neumann(u.values, g)
    du = d1_neumann(u.values, g)
    return norm_l2_sq(lap, g) - norm_l2_sq(np.cross(u.values, lap), g) - norm_l4_4(du, g)


def damping_identity_residual(u: SphereField) -> float:
    """L2 defect (interior nodes) of  -u x (u x u'') = u'' + u |u'|^2.

    The identity needs |u| = 1; on a non-unit field the residual stays O(1),
    which the tests use as a negative control.
    """
    g = u.grid
    lap = d2_neumann(u.values, g)
    du = d1_neumann(u.values, g)
    lhs = -np.cross(u.values, np.cross(u.values, lap))
    rhs = lap + u.values * np.einsum("ij,ij->i", du, du)[:, None]
    diff = lhs - rhs
    w = g.weights
    sq = np.einsum("ij,ij->i", diff, diff)
    return float(np.sqrt(np.dot(w[1:-1], sq[1:-1])))


def h_moments(h: NoiseIntensity) -> HMoments:
    """Trapezoid moments of the intensity; the gradient term uses the stored dx_h."""
    g = h.grid
    w = g.weights
    mean = float(np.dot(w, h.h) / g.length)
    mean_sq = float(np.dot(w, h.h**2) / g.length)
    mean_abs = float(np.dot(w, np.abs(h.h)) / g.length)
    sup = float(np.abs(h.h).max())
    grad = float(np.dot(w, h.dx_h**2))
    return HMoments(mean, mean_sq, mean_abs, sup, grad)


def cosine_analytic_moments(alpha: float, k: int) -> HMoments:
    """Closed-form moments of h(x) = alpha*cos(x) on [0, 2*pi*k]."""
    a = abs(float(alpha))
    return HMoments(
        mean=0.0,
        mean_sq=alpha * alpha / 2.0,
        mean_abs=2.0 * a / math.pi,
        sup=a,
        grad_l2_sq=alpha * alpha * k * math.pi,
    )
