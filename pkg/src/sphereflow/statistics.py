"""Observables, ergodic averaging and statistical identity checkers.

The estimation strategy is burn-in plus batch means: post-burn-in samples
from every trajectory are split into equal contiguous batches, and the
standard error of the pooled mean is the spread of the batch means divided
by sqrt(#batches).  Batches from different trajectories are independent;
within a trajectory the batch length absorbs the autocorrelation.

Checkers return verdicts rather than booleans:

* ``pass`` / ``fail``: the identity holds / is violated beyond
  ``3*stderr + disc_allowance`` (Monte-Carlo slack plus a discretization
  allowance ``C*dx^2``, C configurable with default 10);
* ``inconclusive``: the standard error is too large for the comparison to
  mean anything (over half the target);
* ``report``: quantities the theory only bounds up to an unspecified
  constant are reported as ratios, never asserted.

Enlarging the standard error can move a verdict from fail to pass or
inconclusive, never from pass to fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EstimationError, InvalidInputError
from .fields import NoiseIntensity, SphereField, h_moments
from .grid import d1_neumann, d2_neumann, norm_l2_sq, norm_l4_4, space_average

__all__ = [
    "OBSERVABLE_COLUMNS",
    "ObservableRecord",
    "TrajectoryRecords",
    "EnsembleStats",
    "CheckResult",
    "observe",
    "stationary_estimate",
    "suggest_burn_in",
    "check_moment_identity",
    "check_balance_identity",
    "energy_identity_term",
    "check_energy_identity",
    "check_inequalities",
    "check_positive_gradient",
]

OBSERVABLE_COLUMNS = (
    "grad_l2_sq",
    "grad_l4_4",
    "lap_l2_sq",
    "cross_lap_l2_sq",
    "avg_x",
    "avg_y",
    "avg_z",
    "avg_hu_sq",
    "avg_h2u_dot_avg",
    "avg_ugrad2_dot_avg",
    "fund_residual",
)

_COL = {name: i for i, name in enumerate(OBSERVABLE_COLUMNS)}


@dataclass(frozen=True)
class ObservableRecord:
    """All scalar observables of one field at one time."""

    t: float
    grad_l2_sq: float
    grad_l4_4: float
    lap_l2_sq: float
    cross_lap_l2_sq: float
    avg: np.ndarray
    avg_hu_sq: float
    avg_h2u_dot_avg: float
    avg_ugrad2_dot_avg: float
    fund_residual: float

    def to_row(self) -> np.ndarray:
        """Flatten to the fixed column order of ``OBSERVABLE_COLUMNS``."""
        return np.array(
            [
                self.grad_l2_sq,
                self.grad_l4_4,
                self.lap_l2_sq,
                self.cross_lap_l2_sq,
                self.avg[0],
                self.avg[1],
                self.avg[2],
                self.avg_hu_sq,
                self.avg_h2u_dot_avg,
                self.avg_ugrad2_dot_avg,
                self.fund_residual,
            ]
        )

    @classmethod
    def from_row(cls, t: float, row: np.ndarray) -> "ObservableRecord":
        return cls(
            t=float(t),
            grad_l2_sq=float(row[0]),
            grad_l4_4=float(row[1]),
            lap_l2_sq=float(row[2]),
            cross_lap_l2_sq=float(row[3]),
            avg=np.array(row[4:7], dtype=float),
            avg_hu_sq=float(row[7]),
            avg_h2u_dot_avg=float(row[8]),
            avg_ugrad2_dot_avg=float(row[9]),
            fund_residual=float(row[10]),
        )


@dataclass(frozen=True)
class TrajectoryRecords:
    """Sampled observable rows of one trajectory (times ascending)."""

    times: np.ndarray
    values: np.ndarray  # shape (S, len(OBSERVABLE_COLUMNS))

    def column(self, name: str) -> np.ndarray:
        return self.values[:, _COL[name]]

    def window(self, t_min: float = -math.inf, t_max: float = math.inf) -> "TrajectoryRecords":
        mask = (self.times >= t_min - 1e-12) & (self.times <= t_max + 1e-12)
        return TrajectoryRecords(self.times[mask], self.values[mask])


def observe(u: SphereField, h: NoiseIntensity, t: float) -> ObservableRecord:
    """Single-pass evaluation of every observable with the grid operators."""
    g = u.grid
    du = d1_neumann(u.values, g)
    lap = d2_neumann(u.values, g)
    cross = np.cross(u.values, lap)
    grad_l2 = norm_l2_sq(du, g)
    grad_l4 = norm_l4_4(du, g)
    lap_l2 = norm_l2_sq(lap, g)
    cross_l2 = norm_l2_sq(cross, g)
    avg = space_average(u.values, g)
    hu = space_average(h.h[:, None] * u.values, g)
    h2u = space_average((h.h**2)[:, None] * u.values, g)
    ugrad2 = space_average(u.values * np.einsum("ij,ij->i", du, du)[:, None], g)
    return ObservableRecord(
        t=float(t),
        grad_l2_sq=grad_l2,
        grad_l4_4=grad_l4,
        lap_l2_sq=lap_l2,
        cross_lap_l2_sq=cross_l2,
        avg=avg,
        avg_hu_sq=float(np.dot(hu, hu)),
        avg_h2u_dot_avg=float(np.dot(h2u, avg)),
        avg_ugrad2_dot_avg=float(np.dot(ugrad2, avg)),
        fund_residual=lap_l2 - cross_l2 - grad_l4,
    )


class EnsembleStats:
    """Streaming per-observable estimates: pooled mean plus batch-means stderr.

    Merging is associative and commutative up to floating-point
    reassociation; counts and pooled sums merge exactly.
    """

    def __init__(self, names: Sequence[str] = OBSERVABLE_COLUMNS):
        self.names = tuple(names)
        k = len(self.names)
        self.count = 0
        self.total = np.zeros(k)
        self.batch_count = 0
        self.batch_sum = np.zeros(k)
        self.batch_sqsum = np.zeros(k)

    def _idx(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown observable {name!r}") from None

    def add_batches(self, batch_means: np.ndarray, sample_count: int, totals: np.ndarray) -> None:
        batch_means = np.atleast_2d(batch_means)
        self.count += int(sample_count)
        self.total += totals
        self.batch_count += batch_means.shape[0]
        self.batch_sum += batch_means.sum(axis=0)
        self.batch_sqsum += (batch_means**2).sum(axis=0)

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        if self.names != other.names:
            raise EstimationError("cannot merge statistics over different observables")
        out = EnsembleStats(self.names)
        out.count = self.count + other.count
        out.total = self.total + other.total
        out.batch_count = self.batch_count + other.batch_count
        out.batch_sum = self.batch_sum + other.batch_sum
        out.batch_sqsum = self.batch_sqsum + other.batch_sqsum
        return out

    def mean(self, name: str) -> float:
        if self.count == 0:
            raise EstimationError("no samples accumulated")
        return float(self.total[self._idx(name)] / self.count)

    def stderr(self, name: str) -> float:
        m = self.batch_count
        if m < 8:
            raise EstimationError(f"standard error needs >= 8 batches, have {m}")
        i = self._idx(name)
        bmean = self.batch_sum[i] / m
        var = (self.batch_sqsum[i] - m * bmean * bmean) / (m - 1)
        return math.sqrt(max(var, 0.0) / m)


def stationary_estimate(
    trajectories: Sequence[TrajectoryRecords],
    burn_in: float,
    stride: int = 1,
    batches_per_trajectory: int = 8,
) -> EnsembleStats:
    """Pool post-burn-in samples of all trajectories into batch-means statistics.

    Each trajectory must contribute at least 64 post-burn-in samples (after
    thinning by ``stride``); they are split into ``batches_per_trajectory``
    equal contiguous batches, dropping the remainder.
    """
    if stride < 1:
        raise EstimationError(f"stride must be >= 1, got {stride}")
    stats = EnsembleStats()
    for j, rec in enumerate(trajectories):
        kept = rec.window(t_min=burn_in).values[::stride]
        w = kept.shape[0]
        if w < 64:
            raise EstimationError(
                f"trajectory {j} has {w} post-burn-in samples after thinning; "
                f"need >= 64 (burn_in={burn_in}, stride={stride})"
            )
        b = w // batches_per_trajectory
        used = kept[: b * batches_per_trajectory]
        batches = used.reshape(batches_per_trajectory, b, -1).mean(axis=1)
        stats.add_batches(batches, used.shape[0], used.sum(axis=0))
    return stats


def suggest_burn_in(times: np.ndarray, grad_mean: np.ndarray) -> float:
    """Empirical burn-in proposal: 5x the time the ensemble-mean gradient
    norm takes to first reach (and stay within) one terminal spread of its
    long-run level.

    A diagnostic policy, not an estimator: the caller still chooses the
    burn-in; the runner only warns when the configured value undercuts this
    proposal.  Returns 0 when the series is flat from the start.
    """
    times = np.asarray(times, dtype=float)
    grad_mean = np.asarray(grad_mean, dtype=float)
    if times.size < 4:
        return 0.0
    tail = grad_mean[3 * times.size // 4 :]
    level = float(tail.mean())
    # tail spread stands in for the stderr; the 1% floor keeps the rule
    # meaningful on nearly noiseless series
    spread = float(tail.std()) + 0.01 * abs(level) + 1e-300
    inside = np.abs(grad_mean - level) <= spread
    idx = times.size - 1
    for i in range(times.size):
        if inside[i:].all():
            idx = i
            break
    return 5.0 * float(times[idx])


@dataclass
class CheckResult:
    """One verdict with the numbers behind it."""

    check_name: str
    target: float | None
    estimate: float | None
    stderr: float | None
    allowance: float | None
    verdict: str
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "check_name": self.check_name,
            "target": self.target,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "allowance": self.allowance,
            "verdict": self.verdict,
        }
        if self.detail:
            out["detail"] = self.detail
        return out


def _verdict(estimate: float, target: float, se: float, allowance: float) -> str:
    if target != 0.0 and se > 0.5 * abs(target):
        return "inconclusive"
    return "pass" if abs(estimate - target) <= 3.0 * se + allowance else "fail"


def check_moment_identity(stats: EnsembleStats, h: NoiseIntensity, nu: float,
                          disc_coeff: float = 10.0) -> CheckResult:
    """Stationary balance: mean squared cross-Laplacian equals |dh/dx|^2_{L2}."""
    target = h_moments(h).grad_l2_sq
    est = stats.mean("cross_lap_l2_sq")
    se = stats.stderr("cross_lap_l2_sq")
    allowance = disc_coeff * h.grid.dx**2
    return CheckResult(
        "moment_identity", target, est, se, allowance,
        _verdict(est, target, se, allowance),
        {"nu": nu, "abs_error": abs(est - target)},
    )


def check_balance_identity(stats: EnsembleStats, h: NoiseIntensity,
                           disc_coeff: float = 10.0) -> CheckResult:
    """Three-term average balance: <u|u'|^2>.<u> - <h^2 u>.<u> + |<h u>|^2 = 0 in mean."""
    est = (
        stats.mean("avg_ugrad2_dot_avg")
        - stats.mean("avg_h2u_dot_avg")
        + stats.mean("avg_hu_sq")
    )
    se = math.sqrt(
        stats.stderr("avg_ugrad2_dot_avg") ** 2
        + stats.stderr("avg_h2u_dot_avg") ** 2
        + stats.stderr("avg_hu_sq") ** 2
    )
    allowance = disc_coeff * h.grid.dx**2
    verdict = "pass" if abs(est) <= 3.0 * se + allowance else "fail"
    return CheckResult("balance_identity", 0.0, est, se, allowance, verdict)


def energy_identity_term(rec: TrajectoryRecords, h: NoiseIntensity, nu: float,
                         s: float, t: float) -> float:
    """One trajectory's energy-balance residual between times s < t:

    grad(t) - grad(s) + 2*nu*int_s^t cross_lap dr - 2*nu*(t-s)*|dh/dx|^2,

    with the time integral taken by trapezoid over the sampled records.  The
    martingale part of the balance has zero mean, so these terms average to
    zero over an ensemble; the identity holds along any solution, transient
    or stationary.
    """
    win = rec.window(t_min=s, t_max=t)
    if win.times.size < 2:
        raise EstimationError(f"fewer than 2 samples in [{s}, {t}]")
    if abs(win.times[0] - s) > 1e-9 + 1e-9 * abs(s) or abs(win.times[-1] - t) > 1e-9 + 1e-9 * abs(t):
        raise EstimationError(
            f"records are not sampled at the endpoints: "
            f"[{win.times[0]}, {win.times[-1]}] vs [{s}, {t}]"
        )
    gradh = h_moments(h).grad_l2_sq
    integral = float(np.trapezoid(win.column("cross_lap_l2_sq"), win.times))
    g = win.column("grad_l2_sq")
    return float(g[-1] - g[0] + 2.0 * nu * integral - 2.0 * nu * (t - s) * gradh)


def check_energy_identity(
    trajectories: Sequence[TrajectoryRecords],
    h: NoiseIntensity,
    nu: float,
    s: float,
    t: float,
    disc_coeff: float = 10.0,
    terms: np.ndarray | None = None,
) -> CheckResult:
    """Pathwise energy balance between s < t, averaged over the ensemble.

    ``terms`` may carry precomputed :func:`energy_identity_term` values (the
    streaming path); otherwise they are derived from the record streams.
    """
    if not (s < t):
        raise InvalidInputError(f"need s < t, got s={s}, t={t}")
    if terms is None:
        terms = np.array([energy_identity_term(rec, h, nu, s, t) for rec in trajectories])
    else:
        terms = np.asarray(terms, dtype=float)
    if terms.size == 0:
        raise EstimationError("no trajectories supplied")
    est = float(terms.mean())
    se = float(terms.std(ddof=1) / math.sqrt(terms.size)) if terms.size > 1 else 0.0
    allowance = disc_coeff * h.grid.dx**2
    verdict = "pass" if abs(est) <= 3.0 * se + allowance else "fail"
    return CheckResult(
        "energy_identity", 0.0, est, se, allowance, verdict,
        {"nu": nu, "s": s, "t": t, "n_trajectories": int(terms.size)},
    )


def check_inequalities(stats: EnsembleStats, h: NoiseIntensity,
                       disc_coeff: float = 10.0) -> list[CheckResult]:
    """Bound checks: the sharp one is asserted, the constant-free ones reported.

    The mean squared cross-Laplacian must stay below |dh/dx|^2_{L2} (with
    Monte-Carlo and discretization slack).  The remaining bounds hold only
    up to unspecified constants, so they are emitted as ratios against
    (|dh/dx|^2_{L2} + 1) with verdict ``report``.
    """
    gradh = h_moments(h).grad_l2_sq
    allowance = disc_coeff * h.grid.dx**2
    est = stats.mean("cross_lap_l2_sq")
    se = stats.stderr("cross_lap_l2_sq")
    results = [
        CheckResult(
            "cross_lap_bound", gradh, est, se, allowance,
            "pass" if est <= gradh + 3.0 * se + allowance else "fail",
        )
    ]
    denom = gradh + 1.0
    for name in ("lap_l2_sq", "grad_l4_4", "grad_l2_sq"):
        results.append(
            CheckResult(
                f"{name}_ratio", None, stats.mean(name) / denom, stats.stderr(name) / denom,
                None, "report", {"denominator": denom},
            )
        )
    return results


def check_positive_gradient(
    trajectories: Sequence[TrajectoryRecords] | np.ndarray,
    h: NoiseIntensity,
    floor: float = 1e-8,
) -> CheckResult:
    """Every inspected trajectory must keep its gradient norm above a floor.

    Only applicable when dh/dx is not identically zero (otherwise the
    stationary field is constant in space and the statement is empty);
    calling it in that case is an input error, the caller should skip.
    Accepts either record streams or a precomputed array of per-trajectory
    minima of grad_l2_sq.
    """
    if h_moments(h).grad_l2_sq == 0.0:
        raise InvalidInputError("positive-gradient check requires a non-constant intensity h")
    if isinstance(trajectories, np.ndarray):
        mins = trajectories.astype(float)
    else:
        mins = np.array([rec.column("grad_l2_sq").min() for rec in trajectories])
    if mins.size == 0:
        raise EstimationError("no trajectories supplied")
    n_below = int((mins <= floor).sum())
    return CheckResult(
        "positive_gradient", floor, float(mins.min()), None, None,
        "pass" if n_below == 0 else "fail",
        {"n_trajectories": int(mins.size), "n_below_floor": n_below},
    )
