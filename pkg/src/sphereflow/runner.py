"""Experiment orchestration: ensemble runs, viscosity sweeps, artifact writing.

Trajectories are the unit of parallelism.  Each worker derives its own RNG
substream from (master seed, trajectory index), simulates independently and
returns its sampled observable rows; the orchestrator reduces the results in
trajectory-index order, so every emitted number is independent of the worker
count and of scheduling (``executor.map`` yields in input order).  Output
files embed the config digest and code version, and floats are written with
shortest round-trip ``repr``, which together make reruns byte-identical on
one platform.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import RunConfig, config_digest
from .errors import ConfigurationError
from .fields import SphereField, h_moments
from .rng import derive_substream
from .schemes import TrajectoryState, integrate
from .statistics import (
    OBSERVABLE_COLUMNS,
    CheckResult,
    EnsembleStats,
    TrajectoryRecords,
    check_balance_identity,
    check_energy_identity,
    check_inequalities,
    check_moment_identity,
    check_positive_gradient,
    energy_identity_term,
    stationary_estimate,
    suggest_burn_in,
)
from .transforms import bcf_transform

__all__ = ["RunResult", "SweepResult", "run", "sweep", "exit_status_from_verdicts"]


# -- worker side -----------------------------------------------------------

_WORKER: dict = {}


def _init_worker(cfg: RunConfig, nu: float):
    grid = cfg.build_grid()
    _WORKER["cfg"] = cfg
    _WORKER["nu"] = nu
    _WORKER["grid"] = grid
    _WORKER["h"] = cfg.build_h(grid)
    _WORKER["spec"] = cfg.build_model(grid, nu=nu)
    _WORKER["scheme"] = cfg.build_scheme()
    _WORKER["u0"] = cfg.build_initial(grid)


def _simulate_trajectory(index: int) -> dict:
    try:
        return _simulate_trajectory_inner(index)
    except Exception as exc:
        raise RuntimeError(f"trajectory {index} failed: {exc}") from exc


def _simulate_trajectory_inner(index: int) -> dict:
    cfg: RunConfig = _WORKER["cfg"]
    grid = _WORKER["grid"]
    h = _WORKER["h"]
    state = TrajectoryState(
        t=0.0,
        u=_WORKER["u0"],
        rng=derive_substream(cfg.master_seed, index),
        spec=_WORKER["spec"],
        scheme=_WORKER["scheme"],
    )
    times = [0.0]
    rows = [np.empty(kernels.N_OBSERVABLES)]
    kernels.observe(state.u.values, h.h, grid.dx, grid.length, rows[0])
    snaps: list[tuple[float, np.ndarray]] = []
    want_snaps = cfg.snapshots and index == 0
    if want_snaps:
        snaps.append((0.0, state.u.values.copy()))
    sample_counter = [0]

    def observer(s):
        out = np.empty(kernels.N_OBSERVABLES)
        kernels.observe(s.u.values, h.h, grid.dx, grid.length, out)
        times.append(s.t)
        rows.append(out)
        sample_counter[0] += 1
        if want_snaps and sample_counter[0] % cfg.snapshot_stride == 0:
            snaps.append((s.t, s.u.values.copy()))

    integrate(state, cfg.t_total, observer=observer, sample_stride=cfg.sample_stride)
    result = {
        "index": index,
        "times": np.array(times),
        "values": np.stack(rows),
    }
    if want_snaps:
        result["snapshots"] = snaps
    return result


# -- orchestrator ----------------------------------------------------------


@dataclass
class RunResult:
    nu: float
    run_id: str
    digest: str
    checks: list[CheckResult]
    exit_status: int
    stats_path: str
    verdicts_path: str
    stationary: EnsembleStats | None
    min_grads: np.ndarray
    times: np.ndarray
    time_mean: np.ndarray
    time_stderr: np.ndarray
    n_trajectories: int


@dataclass
class SweepResult:
    runs: list[RunResult]
    summary_path: str
    flags: list[str]
    exit_status: int


def exit_status_from_verdicts(checks: list[CheckResult], strict: bool) -> int:
    """0 iff no check failed; strict mode also promotes inconclusive to failure."""
    bad = {"fail"} if not strict else {"fail", "inconclusive"}
    return 1 if any(c.verdict in bad for c in checks) else 0


def _fmt(x) -> str:
    return repr(float(x))


def _write_stats_csv(path: Path, run_id: str, nu: float, digest: str,
                     times: np.ndarray, mean: np.ndarray, stderr: np.ndarray,
                     count: int) -> None:
    cols = []
    for name in OBSERVABLE_COLUMNS:
        cols += [f"{name}_mean", f"{name}_stderr", f"{name}_count"]
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_digest={digest}\n")
        fh.write(f"# code_version={__version__}\n")
        fh.write("run_id,nu,t," + ",".join(cols) + "\n")
        for k, t in enumerate(times):
            cells = [run_id, _fmt(nu), _fmt(t)]
            for j in range(len(OBSERVABLE_COLUMNS)):
                cells += [_fmt(mean[k, j]), _fmt(stderr[k, j]), str(count)]
            fh.write(",".join(cells) + "\n")


def _write_verdicts_json(path: Path, run_id: str, nu: float, digest: str,
                         checks: list[CheckResult], exit_status: int,
                         extra: dict | None = None) -> None:
    doc = {
        "run_id": run_id,
        "nu": nu,
        "config_digest": digest,
        "code_version": __version__,
        "checks": [c.to_json() for c in checks],
        "exit_status": exit_status,
    }
    if extra:
        doc.update(extra)
    with open(path, "w", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_snapshots(out: Path, run_id: str, digest: str, grid, snaps) -> None:
    with open(out / "field_snapshots.csv", "w", newline="") as fh:
        fh.write(f"# config_digest={digest}\n# code_version={__version__}\n")
        fh.write("t,x,u1,u2,u3\n")
        for t, vals in snaps:
            for x, row in zip(grid.nodes, vals):
                fh.write(f"{_fmt(t)},{_fmt(x)},{_fmt(row[0])},{_fmt(row[1])},{_fmt(row[2])}\n")
    with open(out / "curve_snapshots.csv", "w", newline="") as fh:
        fh.write(f"# config_digest={digest}\n# code_version={__version__}\n")
        fh.write("t,x,g1,g2,g3\n")
        for t, vals in snaps:
            curve = bcf_transform(SphereField(grid, vals))
            for x, row in zip(grid.nodes, curve.points):
                fh.write(f"{_fmt(t)},{_fmt(x)},{_fmt(row[0])},{_fmt(row[1])},{_fmt(row[2])}\n")


def _map_trajectories(cfg: RunConfig, nu: float, threads: int):
    """Yield per-trajectory results in index order, serially or via a pool."""
    m = cfg.n_trajectories
    if threads <= 1 or m == 1:
        _init_worker(cfg, nu)
        for i in range(m):
            yield _simulate_trajectory(i)
        return
    chunk = max(1, m // (threads * 4))
    with ProcessPoolExecutor(
        max_workers=threads, initializer=_init_worker, initargs=(cfg, nu)
    ) as pool:
        yield from pool.map(_simulate_trajectory, range(m), chunksize=chunk)


def run(cfg: RunConfig, threads: int | None = None, out_dir: str | None = None,
        nu: float | None = None) -> RunResult:
    """Integrate the ensemble, write stats CSV and verdict JSON, run checks."""
    nu = cfg.nu if nu is None else nu
    threads = (os.cpu_count() or 1) if threads is None else threads
    digest = config_digest(cfg)
    run_id = f"{digest[:12]}-nu{nu:g}"
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    grid = cfg.build_grid()
    h = cfg.build_h(grid)

    want_stationary = any(
        cfg.check_params(name) is not None
        for name in ("moment_identity", "balance_identity", "inequalities")
    )
    energy_params = cfg.check_params("energy_identity")

    m = cfg.n_trajectories
    sum_rows = sumsq_rows = None
    times = None
    stationary: EnsembleStats | None = EnsembleStats() if want_stationary else None
    min_grads = np.empty(m)
    energy_terms = np.empty(m) if energy_params else None
    snaps = None

    for res in _map_trajectories(cfg, nu, threads):
        idx = res["index"]
        values = res["values"]
        if times is None:
            times = res["times"]
            sum_rows = np.zeros_like(values)
            sumsq_rows = np.zeros_like(values)
        sum_rows += values
        sumsq_rows += values * values
        rec = TrajectoryRecords(res["times"], values)
        stat_window = rec.window(t_min=cfg.t_burn_in)
        min_grads[idx] = stat_window.column("grad_l2_sq").min()
        if stationary is not None:
            stationary = stationary.merge(
                stationary_estimate([rec], burn_in=cfg.t_burn_in)
            )
        if energy_terms is not None:
            energy_terms[idx] = energy_identity_term(
                rec, h, nu, float(energy_params.get("s", 0.0)), float(energy_params.get("t", 1.0))
            )
        if "snapshots" in res:
            snaps = res["snapshots"]

    time_mean = sum_rows / m
    if m > 1:
        var = np.maximum(sumsq_rows / m - time_mean**2, 0.0) * (m / (m - 1))
        time_stderr = np.sqrt(var / m)
    else:
        time_stderr = np.zeros_like(time_mean)

    checks: list[CheckResult] = []
    if (p := cfg.check_params("moment_identity")) is not None:
        checks.append(check_moment_identity(stationary, h, nu, disc_coeff=float(p.get("disc_coeff", 10.0))))
    if (p := cfg.check_params("balance_identity")) is not None:
        checks.append(check_balance_identity(stationary, h, disc_coeff=float(p.get("disc_coeff", 10.0))))
    if energy_params is not None:
        checks.append(
            check_energy_identity(
                [], h, nu,
                s=float(energy_params.get("s", 0.0)), t=float(energy_params.get("t", 1.0)),
                disc_coeff=float(energy_params.get("disc_coeff", 10.0)),
                terms=energy_terms,
            )
        )
    if (p := cfg.check_params("inequalities")) is not None:
        checks.extend(check_inequalities(stationary, h, disc_coeff=float(p.get("disc_coeff", 10.0))))
    if (p := cfg.check_params("positive_gradient")) is not None:
        if h_moments(h).grad_l2_sq > 0.0:
            k = int(p.get("max_trajectories", 64))
            checks.append(
                check_positive_gradient(min_grads[: min(k, m)], h, floor=float(p.get("floor", 1e-8)))
            )

    exit_status = exit_status_from_verdicts(checks, cfg.strict)
    stats_path = out / "stats.csv"
    verdicts_path = out / "verdicts.json"
    proposed = suggest_burn_in(times, time_mean[:, 0])
    extra = {"suggested_burn_in": proposed, "configured_burn_in": cfg.t_burn_in}
    if cfg.t_burn_in < proposed:
        extra["burn_in_warning"] = (
            f"configured burn-in {cfg.t_burn_in:g} is below the empirical proposal "
            f"{proposed:g} (5x the gradient-mean settling time)"
        )
    _write_stats_csv(stats_path, run_id, nu, digest, times, time_mean, time_stderr, m)
    _write_verdicts_json(verdicts_path, run_id, nu, digest, checks, exit_status, extra=extra)
    if snaps is not None:
        _write_snapshots(out, run_id, digest, grid, snaps)

    return RunResult(
        nu=nu,
        run_id=run_id,
        digest=digest,
        checks=checks,
        exit_status=exit_status,
        stats_path=str(stats_path),
        verdicts_path=str(verdicts_path),
        stationary=stationary,
        min_grads=min_grads,
        times=times,
        time_mean=time_mean,
        time_stderr=time_stderr,
        n_trajectories=m,
    )


def sweep(cfg: RunConfig, threads: int | None = None, out_dir: str | None = None) -> SweepResult:
    """Run every viscosity in the sweep list; summarize and flag bad trends.

    The same master seed (hence the same Brownian paths) is reused across
    viscosities, which turns the sweep into a paired comparison.
    """
    if not cfg.nu_values:
        raise ConfigurationError("sweep requires a non-empty, strictly decreasing sweep.nu_values")
    base = Path(out_dir if out_dir is not None else cfg.out_dir)
    base.mkdir(parents=True, exist_ok=True)
    runs: list[RunResult] = []
    for nu in cfg.nu_values:
        sub = base / f"nu_{nu:g}"
        runs.append(run(cfg, threads=threads, out_dir=str(sub), nu=nu))

    digest = config_digest(cfg)
    flags: list[str] = []
    grid = cfg.build_grid()
    target = h_moments(cfg.build_h(grid)).grad_l2_sq
    means = [r.stationary.mean("cross_lap_l2_sq") if r.stationary else math.nan for r in runs]
    serrs = [r.stationary.stderr("cross_lap_l2_sq") if r.stationary else math.nan for r in runs]
    if runs[0].stationary is not None:
        allowance = 10.0 * grid.dx**2
        for r, mu, se in zip(runs, means, serrs):
            if mu > target + 3.0 * se + allowance:
                flags.append(
                    f"nu={r.nu:g}: cross_lap mean {mu:.6g} exceeds the uniform bound "
                    f"{target:.6g} + slack"
                )
        joint = math.sqrt(serrs[0] ** 2 + serrs[-1] ** 2)
        if means[-1] - means[0] > 3.0 * joint:
            flags.append(
                "cross_lap mean grows as nu decreases "
                f"({means[0]:.6g} -> {means[-1]:.6g}), violating nu-uniformity"
            )

    summary_csv = base / "summary.csv"
    with open(summary_csv, "w", newline="") as fh:
        fh.write(f"# config_digest={digest}\n# code_version={__version__}\n")
        fh.write(
            "nu,cross_lap_l2_sq_mean,cross_lap_l2_sq_stderr,"
            "grad_l2_sq_mean,grad_l2_sq_stderr,lap_l2_sq_mean,lap_l2_sq_stderr,verdicts\n"
        )
        for r in runs:
            st = r.stationary
            verdicts = ";".join(f"{c.check_name}={c.verdict}" for c in r.checks)
            if st is None:
                fh.write(f"{_fmt(r.nu)},,,,,,,{verdicts}\n")
                continue
            cells = [
                _fmt(r.nu),
                _fmt(st.mean("cross_lap_l2_sq")), _fmt(st.stderr("cross_lap_l2_sq")),
                _fmt(st.mean("grad_l2_sq")), _fmt(st.stderr("grad_l2_sq")),
                _fmt(st.mean("lap_l2_sq")), _fmt(st.stderr("lap_l2_sq")),
                verdicts,
            ]
            fh.write(",".join(cells) + "\n")

    exit_status = max(r.exit_status for r in runs)
    with open(base / "summary.json", "w", newline="") as fh:
        json.dump(
            {
                "config_digest": digest,
                "code_version": __version__,
                "nu_values": list(cfg.nu_values),
                "target_cross_lap": target,
                "means_cross_lap": means,
                "stderr_cross_lap": serrs,
                "flags": flags,
                "exit_status": exit_status,
            },
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    return SweepResult(runs=runs, summary_path=str(summary_csv), flags=flags, exit_status=exit_status)
