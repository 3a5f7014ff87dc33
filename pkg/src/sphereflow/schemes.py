"""Sphere-preserving time integration.

Two schemes:

``strang_rotation``
    Half step of norm-preserving implicit midpoint for the drift, one exact
    node-wise rotation for the Stratonovich noise, half step of midpoint.
    The noise sub-flow du = g(x) u x odW is a rigid rotation at every node,
    so stepping it by the Rodrigues formula preserves the sphere to machine
    precision; no projection is ever applied.

``euler_ito_projected``
    Euler-Maruyama applied to the Ito form (model drift plus the -g^2 u
    correction), followed by node-wise projection back onto the sphere.
    Kept as an independent cross-validation route: both schemes must agree
    in law, which the statistical tests exercise.

Every step consumes exactly one 3-vector of Gaussian increments from the
trajectory's own substream, so a trajectory is a pure function of
(master seed, trajectory index, dt, scheme) regardless of how steps are
batched or which worker runs them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .dynamics import ModelSpec, cross_argument, drift_model, ito_correction, noise_coefficient
from .errors import (
    ConfigurationError,
    DegenerateProjectionError,
    SphereflowError,
    StepSizeError,
)
from .fields import SphereField, project_sphere
from .grid import Grid1D

__all__ = [
    "SCHEME_KINDS",
    "SchemeConfig",
    "TrajectoryState",
    "suggested_dt",
    "rotation_step",
    "noise_substep",
    "drift_substep_midpoint",
    "step",
    "integrate",
    "save_checkpoint",
    "load_checkpoint",
]

SCHEME_KINDS = ("strang_rotation", "euler_ito_projected")


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    kind: str = "strang_rotation"
    fp_tol: float = 1e-12
    fp_max_iter: int = 50

    def __post_init__(self):
        if not (self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.kind not in SCHEME_KINDS:
            raise ConfigurationError(f"unknown scheme kind {self.kind!r}; expected one of {SCHEME_KINDS}")
        if not (0 < self.fp_tol < 1e-6):
            raise ConfigurationError(f"fp_tol must lie in (0, 1e-6), got {self.fp_tol}")
        if self.fp_max_iter < 1:
            raise ConfigurationError(f"fp_max_iter must be >= 1, got {self.fp_max_iter}")


def suggested_dt(grid: Grid1D) -> float:
    """Step-size heuristic 0.2*dx^2 for the stiff exchange drift; overridable."""
    return 0.2 * grid.dx**2


@dataclass
class TrajectoryState:
    """One stochastic trajectory: time, field, its RNG substream, model, scheme."""

    t: float
    u: SphereField
    rng: np.random.Generator
    spec: ModelSpec
    scheme: SchemeConfig


def _drift_mode(spec: ModelSpec) -> int:
    if spec.kind == "spherical_bm":
        return kernels.DRIFT_NONE
    if spec.kind in ("llg_fluc_diss", "llg_modified"):
        return kernels.DRIFT_DAMPED
    return kernels.DRIFT_PLAIN


def rotation_step(u: SphereField, omega: np.ndarray) -> SphereField:
    """Rotate each node by the axis-angle vector omega_i (Rodrigues formula).

    Rotations are isometries, so node norms are preserved to machine
    precision; angles below 1e-14 fall back to the identity.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (u.grid.n, 3):
        raise ConfigurationError(f"omega of shape {omega.shape} does not match grid n={u.grid.n}")
    th = np.linalg.norm(omega, axis=1)
    active = th >= 1e-14
    out = u.values.copy()
    if active.any():
        a = u.values[active]
        k = omega[active] / th[active, None]
        c = np.cos(th[active])[:, None]
        s = np.sin(th[active])[:, None]
        kdot = np.einsum("ij,ij->i", k, a)[:, None]
        out[active] = a * c + np.cross(k, a) * s + k * kdot * (1.0 - c)
    return SphereField(u.grid, out)


def noise_substep(state: TrajectoryState, dW: np.ndarray) -> TrajectoryState:
    """Apply the noise sub-flow for one increment dW ~ N(0, dt*I_3).

    omega_i = g(x_i) * dW with g the model's noise coefficient; for a
    space-constant g this is one global rotation, which commutes with
    differencing and averaging, so the gradient norm and |<u>| are exact
    invariants of this substep.
    """
    dW = np.asarray(dW, dtype=float).reshape(3)
    g = noise_coefficient(state.spec, state.u.grid)
    omega = g[:, None] * dW[None, :]
    return replace(state, u=rotation_step(state.u, omega))


def drift_substep_midpoint(state: TrajectoryState, dt_eff: float) -> TrajectoryState:
    """Implicit midpoint for the cross-product drift u' = u + dt*(m x G(m)).

    m = (u + u')/2, solved by fixed-point iteration from an explicit Euler
    predictor.  Because the increment is a cross product with m itself,
    (u'-u).(u'+u) = 0 and node norms are conserved in exact arithmetic; one
    extra sweep after the stop criterion keeps the floating-point defect per
    step at the level dt*|drift|*fp_tol.
    """
    grid, spec, scheme = state.u.grid, state.spec, state.scheme
    u = state.u.values
    if spec.kind == "spherical_bm":
        return state
    G = cross_argument(u, spec, grid)
    v = u + dt_eff * np.cross(u, G)
    converged = False
    ok = False
    for _ in range(scheme.fp_max_iter):
        m = 0.5 * (u + v)
        G = cross_argument(m, spec, grid)
        w = u + dt_eff * np.cross(m, G)
        diff = float(np.abs(w - v).sum(axis=1).max())
        v = w
        if converged:
            ok = True
            break
        if diff <= scheme.fp_tol:
            converged = True
    if not ok:
        raise StepSizeError(
            f"midpoint fixed point did not converge in {scheme.fp_max_iter} iterations "
            f"at t={state.t:.6g} (dt_eff={dt_eff:.3g}); reduce dt"
        )
    return replace(state, u=SphereField(grid, v))


def step(state: TrajectoryState) -> TrajectoryState:
    """Advance one full step of the configured scheme, drawing one noise increment."""
    dt = state.scheme.dt
    return _step_dt(state, dt)


def _step_dt(state: TrajectoryState, dt: float) -> TrajectoryState:
    dW = state.rng.standard_normal(3) * math.sqrt(dt)
    if state.scheme.kind == "strang_rotation":
        s = drift_substep_midpoint(state, 0.5 * dt)
        s = noise_substep(s, dW)
        s = drift_substep_midpoint(s, 0.5 * dt)
    else:
        u = state.u
        g = noise_coefficient(state.spec, u.grid)
        raw = (
            u.values
            + dt * (drift_model(u, state.spec) + ito_correction(u, state.spec))
            + g[:, None] * np.cross(u.values, dW[None, :])
        )
        s = replace(state, u=project_sphere(raw, u.grid))
    return replace(s, t=state.t + dt)


def _run_kernel_segment(values, nsteps, dt, spec, scheme, g, dws, dx, work) -> None:
    v, m, G = work
    mode = _drift_mode(spec)
    if scheme.kind == "strang_rotation":
        status = kernels.strang_steps(
            values, nsteps, dt, spec.nu, mode, g, dws, dx, scheme.fp_tol, scheme.fp_max_iter, v, m, G
        )
    else:
        status = kernels.euler_ito_steps(values, nsteps, dt, spec.nu, mode, g, dws, dx, G)
    if status == -1:
        raise StepSizeError(
            f"midpoint fixed point did not converge in {scheme.fp_max_iter} iterations; reduce dt"
        )
    if status == -2:
        raise DegenerateProjectionError("projection degenerate during Euler step")


def integrate(
    state: TrajectoryState,
    t_end: float,
    observer=None,
    sample_stride: int = 1,
) -> TrajectoryState:
    """Repeat ``step`` until t_end (a final partial step is allowed).

    The observer, when given, is called with a state snapshot after every
    ``sample_stride``-th completed step and after the final one.  The input
    state object is not mutated, but its RNG substream is advanced (it is
    the trajectory's stream).  Runs are deterministic given (substream, dt,
    scheme): batching of the compiled inner loop never changes the order in
    which Gaussian increments are drawn.
    """
    if sample_stride < 1:
        raise ConfigurationError(f"sample_stride must be >= 1, got {sample_stride}")
    span = t_end - state.t
    if span < -1e-12:
        raise ConfigurationError(f"t_end={t_end} lies before state.t={state.t}")
    dt = state.scheme.dt
    n_full = int(math.floor(span / dt + 1e-9))
    rem = span - n_full * dt
    if rem < dt * 1e-9:
        rem = 0.0
    if n_full == 0 and rem == 0.0:
        return state

    grid = state.u.grid
    values = state.u.values.copy()
    g = noise_coefficient(state.spec, grid)
    work = (np.empty_like(values), np.empty_like(values), np.empty_like(values))
    t0 = state.t
    sqrt_dt = math.sqrt(dt)

    def emit(k_done: int, t_now: float):
        if observer is None:
            return
        snap = replace(state, t=t_now, u=SphereField(grid, values.copy()))
        try:
            observer(snap)
        except Exception as exc:
            raise SphereflowError(f"observer failed at t={t_now:.6g} (step {k_done})") from exc

    k = 0
    try:
        while k < n_full:
            seg = min(sample_stride - (k % sample_stride), n_full - k)
            dws = state.rng.standard_normal((seg, 3)) * sqrt_dt
            _run_kernel_segment(values, seg, dt, state.spec, state.scheme, g, dws, grid.dx, work)
            k += seg
            if k % sample_stride == 0:
                emit(k, t0 + k * dt)
    except (StepSizeError, DegenerateProjectionError) as exc:
        raise type(exc)(f"{exc} [at t~{t0 + k * dt:.6g}]") from None
    t_now = t0 + n_full * dt
    if rem > 0.0:
        dws = state.rng.standard_normal((1, 3)) * math.sqrt(rem)
        _run_kernel_segment(values, 1, rem, state.spec, state.scheme, g, dws, grid.dx, work)
        k += 1
        t_now = t_end
        emit(k, t_now)
    elif n_full % sample_stride != 0:
        emit(k, t_now)
    return replace(state, t=t_now, u=SphereField(grid, values))


def save_checkpoint(state: TrajectoryState, path, config_digest: str = "") -> None:
    """Write a resumable snapshot: time, field, RNG substream position, digest.

    Resuming from the snapshot reproduces the uninterrupted run bit for bit
    on the same platform.
    """
    from . import __version__

    meta = {
        "t": state.t,
        "rng_state": state.rng.bit_generator.state,
        "scheme": {
            "dt": state.scheme.dt,
            "kind": state.scheme.kind,
            "fp_tol": state.scheme.fp_tol,
            "fp_max_iter": state.scheme.fp_max_iter,
        },
        "model_kind": state.spec.kind,
        "nu": state.spec.nu,
        "config_digest": config_digest,
        "code_version": __version__,
        "format": 1,
    }
    np.savez(path, values=state.u.values, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))


def load_checkpoint(path, grid: Grid1D, spec: ModelSpec, scheme: SchemeConfig,
                    expected_digest: str | None = None) -> TrajectoryState:
    """Rebuild a TrajectoryState from :func:`save_checkpoint` output."""
    with np.load(path) as data:
        values = data["values"]
        meta = json.loads(bytes(data["meta"].tobytes()).decode())
    if meta.get("format") != 1:
        raise ConfigurationError(f"unsupported checkpoint format {meta.get('format')!r}")
    if expected_digest is not None and meta["config_digest"] != expected_digest:
        raise ConfigurationError(
            f"checkpoint digest {meta['config_digest']!r} does not match expected {expected_digest!r}"
        )
    if meta["model_kind"] != spec.kind or meta["nu"] != spec.nu:
        raise ConfigurationError("checkpoint was produced by a different model spec")
    st = meta["rng_state"]
    bitgen = getattr(np.random, st["bit_generator"])()
    bitgen.state = st
    return TrajectoryState(
        t=float(meta["t"]),
        u=SphereField(grid, values),
        rng=np.random.Generator(bitgen),
        spec=spec,
        scheme=scheme,
    )
