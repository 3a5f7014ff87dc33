"""Lower bound on the probability of spatially non-trivial trajectories.

For an intensity h with non-vanishing derivative, the fraction lambda of
trajectories of the limiting statistical solution that are non-constant in
space satisfies

    A*sqrt(lambda) + B*lambda > R,

with

    A = (2 + sup|h|^2 * C_p) * sqrt(2) * C_p * |dh/dx|^2_{L2} / |D|,
    B = <|h|>^2 + 2*(<h^2> - <h>^2),
    R = 2*(<h^2> - <h>^2),

so the bound lambda* is the unique nonnegative root of A*s + B*s^2 = R in
s = sqrt(lambda).  The root is solved in closed form (quadratic formula);
a bisection cross-check is available and runs in the verification suite.

For the normalized example h(x) = alpha*cos(x) on [0, 2*pi*k] the
inequality reduces to

    (1 + 4/pi^2)*lambda + (sqrt(2)*(2 + alpha^2)/2)*sqrt(lambda) - 1 > 0,

independent of k.  At alpha = 0.1 this calculator returns
lambda* = 0.22833 while the previously reported value for the same example
is 0.2298; the ~0.0015 gap is surfaced in the output and deliberately not
reconciled.

C_p is the Poincare-type constant entering A.  The default C_p = 1
reproduces the normalized example under its own stated constants; the
classical zero-mean Poincare constant on [0, L] would be (L/pi)^2, which
differs, so C_p is exposed as configuration and never hard-coded away.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .fields import HMoments, cosine_analytic_moments

__all__ = [
    "REFERENCE_COSINE_BOUND",
    "BoundInput",
    "lower_bound_general",
    "lower_bound_cosine",
    "threshold_root",
    "cosine_coefficients",
    "cross_validate_bound",
]

# Previously reported bound for the alpha = 0.1, k = 1 cosine example, kept
# for juxtaposition in reports; this calculator computes ~0.22833.
REFERENCE_COSINE_BOUND = 0.2298


@dataclass(frozen=True)
class BoundInput:
    """Moments of h, the Poincare-type constant, and the domain length."""

    h_stats: HMoments
    c_p: float = 1.0
    domain_len: float = 2.0 * math.pi

    def __post_init__(self):
        if not (self.c_p > 0):
            raise InvalidInputError(f"c_p must be positive, got {self.c_p}")
        if not (self.domain_len > 0):
            raise InvalidInputError(f"domain_len must be positive, got {self.domain_len}")
        if self.h_stats.grad_l2_sq < 0:
            raise InvalidInputError("negative |dh/dx|^2_{L2}")


def threshold_root(a_lin: float, b_quad: float, r: float, method: str = "closed_form") -> float:
    """Unique nonnegative root s* of a_lin*s + b_quad*s^2 = r (all inputs >= 0).

    ``closed_form`` uses the quadratic formula; ``bisect`` brackets the
    increasing map on [0, s_hi] and is the independent cross-check.
    """
    if min(a_lin, b_quad, r) < 0:
        raise InvalidInputError("threshold_root expects nonnegative coefficients")
    if r == 0.0:
        return 0.0
    if b_quad == 0.0:
        if a_lin == 0.0:
            raise InvalidInputError("degenerate equation 0 = r with r > 0")
        return r / a_lin
    if method == "closed_form":
        return (-a_lin + math.sqrt(a_lin * a_lin + 4.0 * b_quad * r)) / (2.0 * b_quad)
    if method == "bisect":
        f = lambda s: a_lin * s + b_quad * s * s - r
        lo, hi = 0.0, 1.0
        while f(hi) < 0:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) < 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    raise InvalidInputError(f"unknown method {method!r}")


def _coefficients(inp: BoundInput) -> tuple[float, float, float]:
    st = inp.h_stats
    variance = st.mean_sq - st.mean**2
    if variance < 0:
        warnings.warn(
            f"quadrature produced negative variance {variance:.3e}; clamping to 0",
            stacklevel=3,
        )
        variance = 0.0
    a = (2.0 + st.sup**2 * inp.c_p) * math.sqrt(2.0) * inp.c_p * st.grad_l2_sq / inp.domain_len
    b = st.mean_abs**2 + 2.0 * variance
    r = 2.0 * variance
    return a, b, r


def lower_bound_general(inp: BoundInput, method: str = "closed_form") -> float:
    """lambda* for arbitrary h moments; 0 when h is constant (nothing to bound)."""
    a, b, r = _coefficients(inp)
    if r == 0.0:
        return 0.0
    s = threshold_root(a, b, r, method=method)
    lam = s * s
    if lam > 1.0:
        warnings.warn(f"bound {lam:.6f} exceeds 1; clamping (it bounds a probability)", stacklevel=2)
        lam = 1.0
    return lam


def cosine_coefficients(alpha: float) -> tuple[float, float, float]:
    """(linear-in-sqrt(lambda), linear-in-lambda, constant) of the normalized cosine form."""
    return (math.sqrt(2.0) * (2.0 + alpha * alpha) / 2.0, 1.0 + 4.0 / math.pi**2, 1.0)


def lower_bound_cosine(alpha: float, k: int, method: str = "closed_form") -> float:
    """lambda* for h(x) = alpha*cos(x) on [0, 2*pi*k]; independent of k."""
    if alpha == 0:
        raise InvalidInputError("alpha must be nonzero (constant h has nothing to bound)")
    if int(k) != k or k < 1:
        raise InvalidInputError(f"k must be a positive integer, got {k}")
    a_lin, b_quad, r = cosine_coefficients(float(alpha))
    s = threshold_root(a_lin, b_quad, r, method=method)
    return s * s


def bound_report(alpha: float, k: int, c_p: float = 1.0) -> dict:
    """Everything the CLI prints: moments, coefficients, roots, reference gap."""
    lam_closed = lower_bound_cosine(alpha, k)
    lam_bisect = lower_bound_cosine(alpha, k, method="bisect")
    moments = cosine_analytic_moments(alpha, k)
    inp = BoundInput(moments, c_p=c_p, domain_len=2.0 * math.pi * k)
    lam_general = lower_bound_general(inp)
    a_lin, b_quad, r = cosine_coefficients(alpha)
    report = {
        "alpha": alpha,
        "k": k,
        "c_p": c_p,
        "moments": {
            "mean": moments.mean,
            "mean_sq": moments.mean_sq,
            "mean_abs": moments.mean_abs,
            "sup": moments.sup,
            "grad_l2_sq": moments.grad_l2_sq,
        },
        "normalized_coefficients": {"sqrt_lambda": a_lin, "lambda": b_quad, "constant": r},
        "lambda_star": lam_closed,
        "lambda_star_bisect": lam_bisect,
        "lambda_star_general_form": lam_general,
        "closed_form_vs_bisect": abs(lam_closed - lam_bisect),
    }
    if alpha == 0.1 and k == 1 and c_p == 1.0:
        report["reference_value"] = REFERENCE_COSINE_BOUND
        report["computed_minus_reference"] = lam_closed - REFERENCE_COSINE_BOUND
        report["note"] = (
            "computed bound differs from the previously reported 0.2298 by "
            f"{lam_closed - REFERENCE_COSINE_BOUND:+.4f}; surfaced, not reconciled"
        )
    return report


def cross_validate_bound(min_grads: np.ndarray, lambda_star: float, floor: float = 1e-8) -> dict:
    """Compare lambda* with the observed fraction of non-trivial trajectories.

    Diagnostic only: the bound concerns the vanishing-viscosity limit, while
    any finite-viscosity ensemble with non-constant h should show fraction 1,
    which dominates every lambda* <= 1.  An observed fraction below lambda*
    is flagged as inconsistent.
    """
    mins = np.asarray(min_grads, dtype=float)
    if mins.size == 0:
        raise InvalidInputError("no trajectories supplied")
    fraction = float((mins > floor).mean())
    return {
        "lambda_star": float(lambda_star),
        "empirical_fraction": fraction,
        "floor": floor,
        "n_trajectories": int(mins.size),
        "consistent": bool(fraction >= lambda_star),
    }
