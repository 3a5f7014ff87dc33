"""Run configuration: a single YAML key tree, fully validated before any compute.

Experiments are the deliverable here, so misconfiguration must fail fast and
completely: validation collects every violated constraint and reports them
all at once instead of dying on the first.

Schema (defaults in parentheses)::

    model:
      kind: sme | llg_fluc_diss | llg_modified | ssme | spherical_bm
      nu: float in [0, 1]                   (0.0)
      h: {family: constant, value: float}
         | {family: cosine, alpha: float, k: int}
         | {family: tabulated, path: csv with columns x,h}
    grid:
      length: float        (2*pi*k for the cosine family)
      n: int >= 3
    initial:
      kind: constant {q: [x,y,z]} | great_circle_profile {amplitude: float}
                                            (constant e3)
    scheme:
      dt: float > 0
      kind: strang_rotation | euler_ito_projected   (strang_rotation)
      fp_tol: float in (0, 1e-6)            (1e-12)
      fp_max_iter: int >= 1                 (50)
    time:
      t_burn_in: float >= 0
      t_total: float > t_burn_in
      sample_stride: int >= 1               (1)
    ensemble:
      n_trajectories: int >= 1
      master_seed: u64
    sweep:                                  (optional)
      nu_values: strictly decreasing list of floats in [0, 1]
    outputs:
      dir: path                             ("out")
      snapshots: bool                       (false)
      snapshot_stride: int >= 1             (10)
    checks:                                 (default: the four below)
      - {name: moment_identity, disc_coeff: 10.0}
      - {name: balance_identity, disc_coeff: 10.0}
      - {name: inequalities, disc_coeff: 10.0}
      - {name: positive_gradient, floor: 1e-8, max_trajectories: 64}
      - {name: energy_identity, s: 0.0, t: 1.0, disc_coeff: 10.0}
    strict: bool                            (false)
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import yaml

from .dynamics import MODEL_KINDS, ModelSpec
from .errors import ConfigurationError
from .fields import NoiseIntensity, SphereField, make_initial
from .grid import Grid1D
from .schemes import SCHEME_KINDS, SchemeConfig

__all__ = ["RunConfig", "load_config", "config_digest"]

KNOWN_CHECKS = (
    "moment_identity",
    "balance_identity",
    "energy_identity",
    "inequalities",
    "positive_gradient",
)

_DEFAULT_CHECKS = [
    {"name": "moment_identity", "disc_coeff": 10.0},
    {"name": "balance_identity", "disc_coeff": 10.0},
    {"name": "inequalities", "disc_coeff": 10.0},
    {"name": "positive_gradient", "floor": 1e-8, "max_trajectories": 64},
]


@dataclass(frozen=True)
class RunConfig:
    model_kind: str
    nu: float
    h: dict
    grid_length: float
    grid_n: int
    initial: dict
    dt: float
    scheme_kind: str
    fp_tol: float
    fp_max_iter: int
    t_burn_in: float
    t_total: float
    sample_stride: int
    n_trajectories: int
    master_seed: int
    nu_values: tuple | None
    out_dir: str
    snapshots: bool
    snapshot_stride: int
    checks: tuple
    strict: bool

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        errors: list[str] = []

        def get(section: dict, key: str, default=None, required=False):
            if key not in section:
                if required:
                    errors.append(f"missing required key {key!r}")
                return default
            return section[key]

        model = raw.get("model", {})
        kind = get(model, "kind", required=True)
        if kind is not None and kind not in MODEL_KINDS:
            errors.append(f"model.kind {kind!r} not one of {MODEL_KINDS}")
        nu = float(get(model, "nu", 0.0))
        if not (0.0 <= nu <= 1.0):
            errors.append(f"model.nu must lie in [0, 1], got {nu}")
        h = dict(get(model, "h", {"family": "constant", "value": 0.0}))
        family = h.get("family")
        if family not in ("constant", "cosine", "tabulated"):
            errors.append(f"model.h.family {family!r} not one of constant/cosine/tabulated")
        if family == "cosine":
            if "alpha" not in h:
                errors.append("model.h.alpha required for the cosine family")
            k = h.get("k", 1)
            if int(k) != k or k < 1:
                errors.append(f"model.h.k must be a positive integer, got {k}")
        if family == "tabulated" and "path" not in h:
            errors.append("model.h.path required for the tabulated family")

        grid = raw.get("grid", {})
        default_len = 2.0 * math.pi * h.get("k", 1) if family == "cosine" else None
        length = get(grid, "length", default_len)
        if length is None:
            errors.append("grid.length is required (only the cosine family implies one)")
            length = 1.0
        elif not (float(length) > 0):
            errors.append(f"grid.length must be positive, got {length}")
            length = 1.0
        n = int(get(grid, "n", 0) or 0)
        if n < 3:
            errors.append(f"grid.n must be >= 3, got {n}")
            n = 3

        initial = dict(raw.get("initial", {"kind": "constant", "q": [0.0, 0.0, 1.0]}))
        if initial.get("kind") not in ("constant", "great_circle_profile", "tabulated"):
            errors.append(f"initial.kind {initial.get('kind')!r} unknown")

        scheme = raw.get("scheme", {})
        dt = float(get(scheme, "dt", 0.0, required=True) or 0.0)
        if not (dt > 0):
            errors.append(f"scheme.dt must be positive, got {dt}")
            dt = 1.0
        scheme_kind = get(scheme, "kind", "strang_rotation")
        if scheme_kind not in SCHEME_KINDS:
            errors.append(f"scheme.kind {scheme_kind!r} not one of {SCHEME_KINDS}")
        fp_tol = float(get(scheme, "fp_tol", 1e-12))
        if not (0 < fp_tol < 1e-6):
            errors.append(f"scheme.fp_tol must lie in (0, 1e-6), got {fp_tol}")
            fp_tol = 1e-12
        fp_max_iter = int(get(scheme, "fp_max_iter", 50))

        time_sec = raw.get("time", {})
        t_burn_in = float(get(time_sec, "t_burn_in", 0.0))
        t_total = float(get(time_sec, "t_total", 0.0, required=True) or 0.0)
        if t_burn_in < 0:
            errors.append(f"time.t_burn_in must be >= 0, got {t_burn_in}")
        if not (t_total > t_burn_in):
            errors.append(f"time.t_total ({t_total}) must exceed t_burn_in ({t_burn_in})")
        sample_stride = int(get(time_sec, "sample_stride", 1))
        if sample_stride < 1:
            errors.append(f"time.sample_stride must be >= 1, got {sample_stride}")

        ens = raw.get("ensemble", {})
        n_traj = int(get(ens, "n_trajectories", 1))
        if n_traj < 1:
            errors.append(f"ensemble.n_trajectories must be >= 1, got {n_traj}")
        master_seed = int(get(ens, "master_seed", 0))
        if not (0 <= master_seed < 2**64):
            errors.append(f"ensemble.master_seed must fit in a u64, got {master_seed}")

        sweep = raw.get("sweep")
        nu_values = None
        if sweep is not None:
            vals = sweep.get("nu_values")
            if not vals:
                errors.append("sweep.nu_values must be a non-empty list")
            else:
                nu_values = tuple(float(v) for v in vals)
                if any(not (0.0 <= v <= 1.0) for v in nu_values):
                    errors.append(f"sweep.nu_values must lie in [0, 1], got {list(nu_values)}")
                if any(a <= b for a, b in zip(nu_values, nu_values[1:])):
                    errors.append(f"sweep.nu_values must be strictly decreasing, got {list(nu_values)}")

        outputs = raw.get("outputs", {})
        out_dir = str(get(outputs, "dir", "out"))
        snapshots = bool(get(outputs, "snapshots", False))
        snapshot_stride = int(get(outputs, "snapshot_stride", 10))
        if snapshot_stride < 1:
            errors.append(f"outputs.snapshot_stride must be >= 1, got {snapshot_stride}")

        checks_raw = raw.get("checks", _DEFAULT_CHECKS)
        checks = []
        for c in checks_raw:
            c = dict(c)
            if c.get("name") not in KNOWN_CHECKS:
                errors.append(f"unknown check {c.get('name')!r}; known: {KNOWN_CHECKS}")
            checks.append(c)

        strict = bool(raw.get("strict", False))

        known_top = {"model", "grid", "initial", "scheme", "time", "ensemble",
                     "sweep", "outputs", "checks", "strict"}
        for key in raw:
            if key not in known_top:
                errors.append(f"unknown top-level section {key!r}")

        if errors:
            raise ConfigurationError(
                "invalid configuration:\n  - " + "\n  - ".join(errors)
            )
        return cls(
            model_kind=kind,
            nu=nu,
            h=h,
            grid_length=float(length),
            grid_n=n,
            initial=initial,
            dt=dt,
            scheme_kind=scheme_kind,
            fp_tol=fp_tol,
            fp_max_iter=fp_max_iter,
            t_burn_in=t_burn_in,
            t_total=t_total,
            sample_stride=sample_stride,
            n_trajectories=n_traj,
            master_seed=master_seed,
            nu_values=nu_values,
            out_dir=out_dir,
            snapshots=snapshots,
            snapshot_stride=snapshot_stride,
            checks=tuple(tuple(sorted(c.items())) for c in checks),
            strict=strict,
        )

    # -- builders ---------------------------------------------------------

    def build_grid(self) -> Grid1D:
        return Grid1D(length=self.grid_length, n=self.grid_n)

    def build_h(self, grid: Grid1D) -> NoiseIntensity:
        family = self.h["family"]
        if family == "constant":
            return NoiseIntensity.constant(grid, float(self.h.get("value", 0.0)))
        if family == "cosine":
            return NoiseIntensity.cosine(grid, float(self.h["alpha"]), int(self.h.get("k", 1)))
        return NoiseIntensity.from_csv(self.h["path"], grid)

    def build_model(self, grid: Grid1D, nu: float | None = None) -> ModelSpec:
        return ModelSpec(kind=self.model_kind, nu=self.nu if nu is None else nu,
                         h=self.build_h(grid))

    def build_scheme(self) -> SchemeConfig:
        return SchemeConfig(dt=self.dt, kind=self.scheme_kind, fp_tol=self.fp_tol,
                            fp_max_iter=self.fp_max_iter)

    def build_initial(self, grid: Grid1D) -> SphereField:
        params = {k: v for k, v in self.initial.items() if k != "kind"}
        return make_initial(self.initial["kind"], grid, **params)

    def check_params(self, name: str) -> dict | None:
        for c in self.checks:
            d = dict(c)
            if d.get("name") == name:
                return d
        return None

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config file {path} did not parse to a mapping")
    return RunConfig.from_dict(raw)


def config_digest(cfg: RunConfig) -> str:
    """Canonical digest of the configuration, embedded in every output file."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()
