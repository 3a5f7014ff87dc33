"""Compiled inner loops for time stepping and observation.

These kernels are the throughput path used by ``schemes.integrate``; the
NumPy implementations in :mod:`sphereflow.schemes` define the reference
semantics and the test suite pins the two against each other.  Everything
here works on plain float64 arrays of shape (n, 3) and returns an integer
status (0 ok, -1 fixed point did not converge, -2 degenerate projection).

Drift modes: 0 = plain precession u x u'', 1 = damped (adds
-nu u x (u x u'')), 2 = no drift.  Noise increments are passed in
pre-scaled, one 3-vector per step, so the stream consumption order is
identical however the steps are batched.
"""

from __future__ import annotations

import numpy as np
from numba import njit

DRIFT_PLAIN = 0
DRIFT_DAMPED = 1
DRIFT_NONE = 2

N_OBSERVABLES = 11


@njit(cache=True)
def _cross_arg(m, nu, drift_mode, dx, G):
    n = m.shape[0]
    inv = 1.0 / (dx * dx)
    for i in range(n):
        if i == 0:
            l0 = 2.0 * (m[1, 0] - m[0, 0]) * inv
            l1 = 2.0 * (m[1, 1] - m[0, 1]) * inv
            l2 = 2.0 * (m[1, 2] - m[0, 2]) * inv
        elif i == n - 1:
            l0 = 2.0 * (m[n - 2, 0] - m[i, 0]) * inv
            l1 = 2.0 * (m[n - 2, 1] - m[i, 1]) * inv
            l2 = 2.0 * (m[n - 2, 2] - m[i, 2]) * inv
        else:
            l0 = (m[i + 1, 0] - 2.0 * m[i, 0] + m[i - 1, 0]) * inv
            l1 = (m[i + 1, 1] - 2.0 * m[i, 1] + m[i - 1, 1]) * inv
            l2 = (m[i + 1, 2] - 2.0 * m[i, 2] + m[i - 1, 2]) * inv
        if drift_mode == DRIFT_DAMPED:
            c0 = m[i, 1] * l2 - m[i, 2] * l1
            c1 = m[i, 2] * l0 - m[i, 0] * l2
            c2 = m[i, 0] * l1 - m[i, 1] * l0
            G[i, 0] = l0 - nu * c0
            G[i, 1] = l1 - nu * c1
            G[i, 2] = l2 - nu * c2
        else:
            G[i, 0] = l0
            G[i, 1] = l1
            G[i, 2] = l2


@njit(cache=True)
def midpoint_half(u, dt_eff, nu, drift_mode, dx, tol, maxit, v, m, G):
    """One implicit-midpoint substep u -> u + dt*(m x G(m)), m the midpoint.

    Fixed-point iteration from an explicit-Euler predictor; after the stop
    criterion |v_{k+1}-v_k| <= tol is met one extra sweep is applied, which
    shrinks the per-step norm defect to dt*|drift|*tol*q (q the contraction
    factor) and keeps million-step runs inside the sphere tolerance.
    """
    n = u.shape[0]
    if drift_mode == DRIFT_NONE:
        return 0
    _cross_arg(u, nu, drift_mode, dx, G)
    for i in range(n):
        v[i, 0] = u[i, 0] + dt_eff * (u[i, 1] * G[i, 2] - u[i, 2] * G[i, 1])
        v[i, 1] = u[i, 1] + dt_eff * (u[i, 2] * G[i, 0] - u[i, 0] * G[i, 2])
        v[i, 2] = u[i, 2] + dt_eff * (u[i, 0] * G[i, 1] - u[i, 1] * G[i, 0])
    converged = False
    ok = False
    for _ in range(maxit):
        for i in range(n):
            m[i, 0] = 0.5 * (u[i, 0] + v[i, 0])
            m[i, 1] = 0.5 * (u[i, 1] + v[i, 1])
            m[i, 2] = 0.5 * (u[i, 2] + v[i, 2])
        _cross_arg(m, nu, drift_mode, dx, G)
        diff = 0.0
        for i in range(n):
            w0 = u[i, 0] + dt_eff * (m[i, 1] * G[i, 2] - m[i, 2] * G[i, 1])
            w1 = u[i, 1] + dt_eff * (m[i, 2] * G[i, 0] - m[i, 0] * G[i, 2])
            w2 = u[i, 2] + dt_eff * (m[i, 0] * G[i, 1] - m[i, 1] * G[i, 0])
            d = abs(w0 - v[i, 0]) + abs(w1 - v[i, 1]) + abs(w2 - v[i, 2])
            if d != d:  # NaN from a diverging iteration
                return -1
            if d > diff:
                diff = d
            v[i, 0] = w0
            v[i, 1] = w1
            v[i, 2] = w2
        if converged:
            ok = True
            break
        if diff <= tol:
            converged = True
    if not ok:
        return -1
    for i in range(n):
        u[i, 0] = v[i, 0]
        u[i, 1] = v[i, 1]
        u[i, 2] = v[i, 2]
    return 0


@njit(cache=True)
def rotate(u, g, w0, w1, w2):
    """Node-wise rotation by the axis-angle vector g[i]*(w0, w1, w2)."""
    n = u.shape[0]
    for i in range(n):
        o0 = g[i] * w0
        o1 = g[i] * w1
        o2 = g[i] * w2
        th = np.sqrt(o0 * o0 + o1 * o1 + o2 * o2)
        if th < 1e-14:
            continue
        k0 = o0 / th
        k1 = o1 / th
        k2 = o2 / th
        c = np.cos(th)
        s = np.sin(th)
        a0 = u[i, 0]
        a1 = u[i, 1]
        a2 = u[i, 2]
        kx0 = k1 * a2 - k2 * a1
        kx1 = k2 * a0 - k0 * a2
        kx2 = k0 * a1 - k1 * a0
        f = (1.0 - c) * (k0 * a0 + k1 * a1 + k2 * a2)
        u[i, 0] = a0 * c + kx0 * s + k0 * f
        u[i, 1] = a1 * c + kx1 * s + k1 * f
        u[i, 2] = a2 * c + kx2 * s + k2 * f


@njit(cache=True)
def strang_steps(u, nsteps, dt, nu, drift_mode, g, dws, dx, tol, maxit, v, m, G):
    """Strang composition: half drift midpoint, full noise rotation, half drift."""
    for k in range(nsteps):
        if midpoint_half(u, 0.5 * dt, nu, drift_mode, dx, tol, maxit, v, m, G) != 0:
            return -1
        rotate(u, g, dws[k, 0], dws[k, 1], dws[k, 2])
        if midpoint_half(u, 0.5 * dt, nu, drift_mode, dx, tol, maxit, v, m, G) != 0:
            return -1
    return 0


@njit(cache=True)
def euler_ito_steps(u, nsteps, dt, nu, drift_mode, g, dws, dx, G):
    """Projected Euler-Maruyama in Ito form: drift + (-g^2 u) correction + g u x dW."""
    n = u.shape[0]
    for k in range(nsteps):
        _cross_arg(u, nu, drift_mode, dx, G)
        w0 = dws[k, 0]
        w1 = dws[k, 1]
        w2 = dws[k, 2]
        for i in range(n):
            a0 = u[i, 0]
            a1 = u[i, 1]
            a2 = u[i, 2]
            if drift_mode == DRIFT_NONE:
                d0 = 0.0
                d1 = 0.0
                d2 = 0.0
            else:
                d0 = a1 * G[i, 2] - a2 * G[i, 1]
                d1 = a2 * G[i, 0] - a0 * G[i, 2]
                d2 = a0 * G[i, 1] - a1 * G[i, 0]
            gi = g[i]
            gg = gi * gi
            n0 = a1 * w2 - a2 * w1
            n1 = a2 * w0 - a0 * w2
            n2 = a0 * w1 - a1 * w0
            b0 = a0 + dt * (d0 - gg * a0) + gi * n0
            b1 = a1 + dt * (d1 - gg * a1) + gi * n1
            b2 = a2 + dt * (d2 - gg * a2) + gi * n2
            nrm = np.sqrt(b0 * b0 + b1 * b1 + b2 * b2)
            if nrm < 1e-12:
                return -2
            u[i, 0] = b0 / nrm
            u[i, 1] = b1 / nrm
            u[i, 2] = b2 / nrm
    return 0


@njit(cache=True)
def observe(u, h, dx, length, out):
    """Fill ``out[0:11]`` with the standard observables of one field.

    Order: grad_l2_sq, grad_l4_4, lap_l2_sq, cross_lap_l2_sq, avg_x, avg_y,
    avg_z, avg_hu_sq, avg_h2u_dot_avg, avg_ugrad2_dot_avg, fund_residual.
    Trapezoid quadrature throughout; the derivative conventions match the
    grid operators exactly.
    """
    n = u.shape[0]
    inv2 = 1.0 / (2.0 * dx)
    invq = 1.0 / (dx * dx)
    grad2 = 0.0
    grad4 = 0.0
    lap2 = 0.0
    cross2 = 0.0
    avg0 = 0.0
    avg1 = 0.0
    avg2 = 0.0
    hu0 = 0.0
    hu1 = 0.0
    hu2 = 0.0
    h2u0 = 0.0
    h2u1 = 0.0
    h2u2 = 0.0
    ug0 = 0.0
    ug1 = 0.0
    ug2 = 0.0
    for i in range(n):
        w = dx if 0 < i < n - 1 else 0.5 * dx
        if i == 0:
            l0 = 2.0 * (u[1, 0] - u[0, 0]) * invq
            l1 = 2.0 * (u[1, 1] - u[0, 1]) * invq
            l2 = 2.0 * (u[1, 2] - u[0, 2]) * invq
            g0 = 0.0
            g1 = 0.0
            g2 = 0.0
        elif i == n - 1:
            l0 = 2.0 * (u[n - 2, 0] - u[i, 0]) * invq
            l1 = 2.0 * (u[n - 2, 1] - u[i, 1]) * invq
            l2 = 2.0 * (u[n - 2, 2] - u[i, 2]) * invq
            g0 = 0.0
            g1 = 0.0
            g2 = 0.0
        else:
            l0 = (u[i + 1, 0] - 2.0 * u[i, 0] + u[i - 1, 0]) * invq
            l1 = (u[i + 1, 1] - 2.0 * u[i, 1] + u[i - 1, 1]) * invq
            l2 = (u[i + 1, 2] - 2.0 * u[i, 2] + u[i - 1, 2]) * invq
            g0 = (u[i + 1, 0] - u[i - 1, 0]) * inv2
            g1 = (u[i + 1, 1] - u[i - 1, 1]) * inv2
            g2 = (u[i + 1, 2] - u[i - 1, 2]) * inv2
        gsq = g0 * g0 + g1 * g1 + g2 * g2
        grad2 += w * gsq
        grad4 += w * gsq * gsq
        lap2 += w * (l0 * l0 + l1 * l1 + l2 * l2)
        c0 = u[i, 1] * l2 - u[i, 2] * l1
        c1 = u[i, 2] * l0 - u[i, 0] * l2
        c2 = u[i, 0] * l1 - u[i, 1] * l0
        cross2 += w * (c0 * c0 + c1 * c1 + c2 * c2)
        avg0 += w * u[i, 0]
        avg1 += w * u[i, 1]
        avg2 += w * u[i, 2]
        hi = h[i]
        hu0 += w * hi * u[i, 0]
        hu1 += w * hi * u[i, 1]
        hu2 += w * hi * u[i, 2]
        h2u0 += w * hi * hi * u[i, 0]
        h2u1 += w * hi * hi * u[i, 1]
        h2u2 += w * hi * hi * u[i, 2]
        ug0 += w * u[i, 0] * gsq
        ug1 += w * u[i, 1] * gsq
        ug2 += w * u[i, 2] * gsq
    invL = 1.0 / length
    avg0 *= invL
    avg1 *= invL
    avg2 *= invL
    hu0 *= invL
    hu1 *= invL
    hu2 *= invL
    h2u0 *= invL
    h2u1 *= invL
    h2u2 *= invL
    ug0 *= invL
    ug1 *= invL
    ug2 *= invL
    out[0] = grad2
    out[1] = grad4
    out[2] = lap2
    out[3] = cross2
    out[4] = avg0
    out[5] = avg1
    out[6] = avg2
    out[7] = hu0 * hu0 + hu1 * hu1 + hu2 * hu2
    out[8] = h2u0 * avg0 + h2u1 * avg1 + h2u2 * avg2
    out[9] = ug0 * avg0 + ug1 * avg1 + ug2 * avg2
    out[10] = lap2 - cross2 - grad4


@njit(cache=True)
def max_norm_deviation(u):
    """max_i | |u_i| - 1 |, used to validate sphere preservation cheaply."""
    n = u.shape[0]
    worst = 0.0
    for i in range(n):
        d = abs(np.sqrt(u[i, 0] ** 2 + u[i, 1] ** 2 + u[i, 2] ** 2) - 1.0)
        if d > worst:
            worst = d
    return worst
