"""
Solution diagnostics: conserved integrals, travelling-wave error indicators,
norm errors against exact solutions and observed convergence rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exact_solutions import FunctionHandle
from .spline_core import eval_spline

NEWTON_TOL = 1e-10


class DiagnosticsError(ValueError):
    pass


def _coef(u):
    return getattr(u, "coef", u)


# ---------------------------------------------------------------------------
# Invariants


@dataclass
class InvariantRecord:
    t: float
    H: tuple
    E: tuple = None  # log10 relative drifts, None at t = 0

    def with_drift(self, ref):
        E = tuple(log_drift(h, h0) for h, h0 in zip(self.H, ref.H))
        return InvariantRecord(self.t, self.H, E)


def log_drift(h, h0):
    """log10 |(H(t) - H(0)) / H(t)|; -inf when the values agree exactly."""
    d = abs((h - h0) / h) if h != 0 else abs(h - h0)
    return math.log10(d) if d > 0 else float("-inf")


def invariants_single(space, u, k=0.0):
    """(H0, H1, H2) = integrals of u, u^2 + u_x^2 and u(u^2 + u_x^2 + 2k u)."""
    g = space.grid
    c = _coef(u)
    u0, u1 = g.values(c, 0), g.values(c, 1)
    e = u0 * u0 + u1 * u1
    return (g.integrate(u0), g.integrate(e), g.integrate(u0 * (e + 2 * k * u0)))


def invariants_system(space, m, u, k=0.0):
    """(H0, H1, H2) = integrals of m, m u and u^2 m - u u_x^2 + 2k u^2."""
    if getattr(m, "space", space) is not getattr(u, "space", space):
        raise DiagnosticsError("m and u live on different spaces")
    g = space.grid
    mc, uc = _coef(m), _coef(u)
    m0, u0, u1 = g.values(mc, 0), g.values(uc, 0), g.values(uc, 1)
    return (g.integrate(m0), g.integrate(m0 * u0),
            g.integrate(u0 * u0 * m0 - u0 * u1 * u1 + 2 * k * u0 * u0))


def invariants(state, k=0.0):
    if state.scheme == "standard":
        return invariants_single(state.space, state.u, k)
    return invariants_system(state.space, state.m, state.u, k)


# ---------------------------------------------------------------------------
# Peak location


def discrete_peak(space, u):
    """Quadrature node where u_h is largest."""
    g = space.grid
    vals = g.values(_coef(u), 0)
    i = int(np.argmax(vals))
    return float(g.x.flat[i])


def _bisect_peak(space, c, lo, hi, tol=NEWTON_TOL):
    du = lambda x: eval_spline(space, c, space.wrap(x), 1)
    flo, fhi = du(lo), du(hi)
    if not (flo >= 0 >= fhi):
        raise DiagnosticsError("no sign change of u_x in the peak bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if du(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def locate_peak(space, u, hint=None, mode="smooth"):
    """Maximum point of u_h.

    ``smooth``: Newton on u_x = 0 from the hint (tolerance 1e-10), falling
    back to bisection; ``peakon``: bisection of u_x over [hint - 2h, hint + 2h];
    ``nodal``: the Greville point (mesh node for r = 2) of the largest
    coefficient.  ``hint`` defaults to the discrete maximum over the
    quadrature nodes.  The result is wrapped into the domain.
    """
    c = _coef(u)
    if mode == "nodal":
        return float(space.greville()[int(np.argmax(c))])
    if hint is None:
        hint = discrete_peak(space, c)
    h = float(np.max(space.elem_h))
    lo, hi = hint - 2 * h, hint + 2 * h
    if mode == "smooth":
        if space.r < 3:
            raise DiagnosticsError("Newton peak search needs r >= 3")
        x = hint
        for _ in range(50):
            xw = space.wrap(x)
            d1 = eval_spline(space, c, xw, 1)
            d2 = eval_spline(space, c, xw, 2)
            if not d2 < 0:
                break
            step = d1 / d2
            x -= step
            if not lo <= x <= hi:
                break
            if abs(step) < NEWTON_TOL:
                return float(space.wrap(x))
    elif mode != "peakon":
        raise DiagnosticsError(f"unknown peak mode {mode!r}")
    return float(space.wrap(_bisect_peak(space, c, lo, hi)))


def peak_mode(space, exact):
    if space.r == 2:
        return "nodal"
    return "peakon" if getattr(exact, "peakon", False) else "smooth"


# ---------------------------------------------------------------------------
# Travelling-wave error indicators


@dataclass
class IndicatorRecord:
    t: float
    x_star: float
    E_amp: float
    E_phase: float
    E_speed: float = float("nan")
    E_shape: float = float("nan")
    tau: float = 1.0


def nearest_image(d, period):
    if period is None:
        return d
    return d - period * np.round(d / period)


def _l2_sq(space, f, kinks=()):
    g = space.quad_grid(kinks)
    return g, float(np.sum(f(g) * g.w))


def shape_error(space, u, exact, t, width=None):
    """min over s of ||u_h - u(., s)|| / ||u(., 0)|| and the minimizer.

    The minimizer is the root of d/ds zeta^2 near s = t, bracketed by
    expanding an interval around t and refined with Brent's method.
    """
    c = _coef(u)
    V = exact.V
    ref = exact.at(0.0)
    _, n0 = _l2_sq(space, lambda g: ref(g.x) ** 2, ref.kinks)

    def dzeta2(s):
        # d/ds ||U - u(s)||^2 = 2 V (U - u(s), u_x(s))
        g = space.quad_grid(exact.kinks(s))
        diff = g.values(c, 0) - exact.value(g.x, s)
        return 2 * V * float(np.sum(diff * exact.dx(g.x, s) * g.w)) / n0

    def zeta(s):
        g = space.quad_grid(exact.kinks(s))
        diff = g.values(c, 0) - exact.value(g.x, s)
        return math.sqrt(float(np.sum(diff * diff * g.w)) / n0)

    h = float(np.max(space.elem_h))
    w = width if width is not None else max(h, 1e-3) / max(V, 1e-12)
    lo, hi = t - w, t + w
    flo, fhi = dzeta2(lo), dzeta2(hi)
    grow = 0
    while flo * fhi > 0 and grow < 40:
        w *= 1.6
        lo, hi = t - w, t + w
        flo, fhi = dzeta2(lo), dzeta2(hi)
        grow += 1
    if flo * fhi > 0:
        raise DiagnosticsError("shape-error minimization did not bracket a stationary point")
    s = brentq(dzeta2, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    return min(zeta(s), zeta(t)), s


def indicators(space, u, exact, t, tau=1.0, prev_x=None, mode=None, hint=None,
               shape=True):
    """Amplitude, phase, speed and shape errors of u_h against a travelling wave.

    ``prev_x`` is the peak position at time t - tau; without it the speed
    error is NaN.
    """
    mode = mode or peak_mode(space, exact)
    x = locate_peak(space, u, hint, mode)
    U = float(eval_spline(space, _coef(u), x))
    U0 = exact.amplitude
    period = exact.period
    e_amp = abs(U - U0) / abs(U0)
    e_phase = abs(float(nearest_image(x - exact.center(t), period)))
    e_speed = float("nan")
    if prev_x is not None:
        dx = x - prev_x
        dx = dx - (0 if period is None else period * np.round((dx - exact.V * tau) / period))
        e_speed = abs(exact.V - dx / tau)
    e_shape = shape_error(space, u, exact, t)[0] if shape else float("nan")
    return IndicatorRecord(t, x, e_amp, e_phase, e_speed, e_shape, tau)


# ---------------------------------------------------------------------------
# Norm errors and rates


def norm_error(space, u, exact, norm="L2", normalized=False):
    """||u_h - u|| for an exact FunctionHandle at a fixed time.

    Integrals use the space's quadrature with cells split at the kinks of
    the exact function; Linf takes the maximum over quadrature nodes,
    breakpoints and kinks.
    """
    if not isinstance(exact, FunctionHandle):
        exact = FunctionHandle(exact)
    c = _coef(u)
    g = space.quad_grid(exact.kinks)
    if norm == "Linf":
        xs = np.concatenate([g.x.ravel(), space.breakpoints,
                             space.wrap(np.asarray(exact.kinks, dtype=float))])
        if space.periodic:
            xs = space.wrap(xs)
        ex = exact(xs)
        err = float(np.max(np.abs(eval_spline(space, c, xs) - ex)))
        ref = float(np.max(np.abs(ex)))
    elif norm in ("L2", "H1"):
        ex = exact(g.x)
        e0 = g.values(c, 0) - ex
        err2 = float(np.sum(e0 * e0 * g.w))
        ref2 = float(np.sum(ex * ex * g.w))
        if norm == "H1":
            dx = exact.derivative(g.x, 1)
            e1 = g.values(c, 1) - dx
            err2 += float(np.sum(e1 * e1 * g.w))
            ref2 += float(np.sum(dx * dx * g.w))
        err, ref = math.sqrt(err2), math.sqrt(ref2)
    else:
        raise DiagnosticsError(f"unknown norm {norm!r}")
    return err / ref if normalized else err


def convergence_rates(errors, meshes):
    """rate_l = log(e_{l-1} / e_l) / log(h_{l-1} / h_l) for l >= 1."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(meshes, dtype=float)
    if e.size < 2 or e.size != h.size:
        raise DiagnosticsError("need at least two levels with matching mesh sizes")
    if np.any(~(e > 0)):
        raise DiagnosticsError("errors must be positive")
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
