"""
Reference solutions of the reduced Camassa-Holm equation and the initial
profiles used in the experiments.

Smooth travelling waves are given parametrically: with ``a = kappa * p``,

    xi(theta) = theta / a + log[((1 + a) + (1 - a) e^theta) /
                                ((1 - a) + (1 + a) e^theta)]
    u = kappa^2 + c^2 p^2 S / (2 + c p^2 S),   S = sech^2(theta / 2)

where ``xi = x - V t + x0``, ``c = 2 kappa^2 / (1 - a^2)`` and
``V = c + kappa^2``.  For a given xi the parameter theta is recovered with
Newton's method (the map is strictly increasing, dxi/dtheta >= 1/a - a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

NEWTON_TOL = 1e-10


class ExactSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class FunctionHandle:
    """A function of x with optional first and second derivatives.

    ``kinks`` lists points where the first derivative jumps (the function
    itself is Lipschitz there); derivatives are never requested exactly at
    a kink because quadrature cells are split there.
    """

    f: callable
    df: callable = None
    d2f: callable = None
    kinks: tuple = ()
    smoothness: str = "smooth"

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))

    def derivative(self, x, order=1):
        fn = {0: self.f, 1: self.df, 2: self.d2f}[order]
        if fn is None:
            raise ExactSolutionError(f"derivative of order {order} unavailable")
        return fn(np.asarray(x, dtype=float))

    def __add__(self, other):
        def combine(g, h):
            if g is None or h is None:
                return None
            return lambda x: g(x) + h(x)

        smooth = "smooth" if self.smoothness == other.smoothness == "smooth" else "lipschitz"
        return FunctionHandle(combine(self.f, other.f), combine(self.df, other.df),
                              combine(self.d2f, other.d2f),
                              tuple(self.kinks) + tuple(other.kinks), smooth)


def wrap_centered(xi, period):
    """Wrap xi into [-period/2, period/2); identity when period is None."""
    if period is None:
        return xi
    return xi - period * np.floor(xi / period + 0.5)


# ---------------------------------------------------------------------------
# Smooth travelling waves


@dataclass(frozen=True)
class WaveParams:
    kappa: float
    p: float
    x0: float = 0.0
    c: float = field(init=False)
    V: float = field(init=False)

    def __post_init__(self):
        if self.kappa <= 0 or self.p <= 0:
            raise ExactSolutionError("kappa and p must be positive")
        a = self.kappa * self.p
        if not 0 < a < 1:
            raise ExactSolutionError(f"need 0 < kappa p < 1, got {a}")
        c = 2 * self.kappa**2 / (1 - a * a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "V", c + self.kappa**2)

    @property
    def amplitude(self):
        """Peak value u(xi = 0)."""
        k2, c, p2 = self.kappa**2, self.c, self.p**2
        return k2 + c * c * p2 / (2 + c * p2)


def wave_from_speed(kappa, V, x0=0.0):
    """Travelling-wave parameters with the given background and speed.

    Inverts ``c = 2 kappa^2/(1 - kappa^2 p^2)``, ``V = c + kappa^2``;
    a real p with kappa p < 1 exists only for V > 3 kappa^2.
    """
    k2 = kappa * kappa
    c = V - k2
    if not V > 3 * k2:
        raise ExactSolutionError(f"no smooth wave with kappa={kappa}, V={V} (need V > 3 kappa^2)")
    p = math.sqrt((c - 2 * k2) / (c * k2))
    return WaveParams(kappa, p, x0)


def xi_of_theta(theta, a):
    theta = np.asarray(theta, dtype=float)
    la, lb = math.log1p(a), math.log1p(-a)
    num = np.logaddexp(la, lb + theta)
    den = np.logaddexp(lb, la + theta)
    return theta / a + num - den


def dxi_dtheta(theta, a):
    beta = math.log((1 + a) / (1 - a))
    return 1.0 / a + expit(theta - beta) - expit(theta + beta)


def theta_of_xi(xi, a, tol=NEWTON_TOL, maxiter=60):
    """Solve ``xi_of_theta(theta) = xi`` by Newton with a bisection fallback."""
    xi = np.asarray(xi, dtype=float)
    theta = a * xi
    for _ in range(maxiter):
        step = (xi_of_theta(theta, a) - xi) / dxi_dtheta(theta, a)
        theta = theta - step
        if np.all(np.abs(step) < tol):
            return theta
    # bisection on an expanding bracket; xi_of_theta is increasing
    lo = np.full_like(xi, -1.0)
    hi = np.full_like(xi, 1.0)
    for _ in range(200):
        grow_lo = xi_of_theta(lo, a) > xi
        grow_hi = xi_of_theta(hi, a) < xi
        if not (grow_lo.any() or grow_hi.any()):
            break
        lo = np.where(grow_lo, 2 * lo, lo)
        hi = np.where(grow_hi, 2 * hi, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        left = xi_of_theta(mid, a) < xi
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
        if np.all(hi - lo < tol):
            return 0.5 * (lo + hi)
    raise ExactSolutionError("travelling-wave inversion did not converge")


def _tw_u_theta(params, theta):
    k2, c, p2 = params.kappa**2, params.c, params.p**2
    S = 1.0 / np.cosh(0.5 * theta) ** 2
    D = 2 + c * p2 * S
    u = k2 + c * c * p2 * S / D
    du = -2 * c * c * p2 * S * np.tanh(0.5 * theta) / D**2
    return u, du


def smooth_tw_eval(params, x, t, period=None, derivative=0):
    """Value (or x-derivative, ``derivative=1``) of the smooth travelling wave."""
    xi = wrap_centered(np.asarray(x, dtype=float) - params.V * t + params.x0, period)
    a = params.kappa * params.p
    theta = theta_of_xi(xi, a)
    u, du = _tw_u_theta(params, theta)
    if derivative == 0:
        return u
    if derivative == 1:
        return du / dxi_dtheta(theta, a)
    raise ExactSolutionError("only derivative orders 0 and 1 are available")


# ---------------------------------------------------------------------------
# Peakons


@dataclass(frozen=True)
class PeakonParams:
    c: float
    x0: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ExactSolutionError("peakon speed must be positive")

    @property
    def V(self):
        return self.c

    @property
    def amplitude(self):
        return self.c


def peakon_eval(params, x, t, period=None, derivative=0):
    xi = wrap_centered(np.asarray(x, dtype=float) - params.c * t + params.x0, period)
    e = params.c * np.exp(-np.abs(xi))
    if derivative == 0:
        return e
    if derivative == 1:
        return -np.sign(xi) * e
    raise ExactSolutionError("only derivative orders 0 and 1 are available")


# ---------------------------------------------------------------------------
# Travelling-wave solutions with a common interface


class TravellingWave:
    """Exact travelling wave (smooth or peakon), optionally periodized.

    ``center(t)`` is the crest position ``V t - x0`` (before wrapping).
    """

    def __init__(self, params, period=None, domain=None):
        self.params = params
        self.domain = domain
        if domain is not None and period is None:
            period = domain[1] - domain[0]
        self.period = period
        self.peakon = isinstance(params, PeakonParams)

    @property
    def V(self):
        return self.params.V

    @property
    def amplitude(self):
        return self.params.amplitude

    def center(self, t):
        return self.params.V * t - self.params.x0

    def wrap(self, x):
        if self.domain is None:
            return x
        a = self.domain[0]
        return a + np.mod(x - a, self.period)

    def __call__(self, x, t):
        return self.value(x, t)

    def value(self, x, t):
        fn = peakon_eval if self.peakon else smooth_tw_eval
        return fn(self.params, x, t, self.period, 0)

    def dx(self, x, t):
        fn = peakon_eval if self.peakon else smooth_tw_eval
        return fn(self.params, x, t, self.period, 1)

    def kinks(self, t):
        if not self.peakon:
            return ()
        return (float(self.wrap(self.center(t))),)

    def at(self, t):
        """FunctionHandle of the profile at time t."""
        return FunctionHandle(lambda x: self.value(x, t), lambda x: self.dx(x, t),
                              kinks=self.kinks(t),
                              smoothness="lipschitz" if self.peakon else "smooth")


# ---------------------------------------------------------------------------
# Named initial profiles


def _gaussian_bump():
    return FunctionHandle(lambda x: 1 + np.exp(-x * x),
                          lambda x: -2 * x * np.exp(-x * x),
                          lambda x: (4 * x * x - 2) * np.exp(-x * x))


def _rational():
    return FunctionHandle(lambda x: 10.0 / (3 + np.abs(x)) ** 2,
                          lambda x: -20.0 * np.sign(x) / (3 + np.abs(x)) ** 3,
                          lambda x: 60.0 / (3 + np.abs(x)) ** 4,
                          kinks=(0.0,), smoothness="lipschitz")


def _plateau(c=0.6, half_width=5.0):
    w = half_width

    def f(x):
        return c * np.exp(-np.maximum(np.abs(x) - w, 0.0))

    def df(x):
        return np.where(np.abs(x) > w, -np.sign(x) * f(x), 0.0)

    def d2f(x):
        return np.where(np.abs(x) > w, f(x), 0.0)

    return FunctionHandle(f, df, d2f, kinks=(-w, w), smoothness="lipschitz")


def _peakon_profile(c=1.0, center=0.0, period=None):
    prm = PeakonParams(c, -center)
    return FunctionHandle(lambda x: peakon_eval(prm, x, 0.0, period),
                          lambda x: peakon_eval(prm, x, 0.0, period, 1),
                          kinks=(center,), smoothness="lipschitz")


def _smooth_tw_profile(kappa=1.0, V=4.0, center=0.0, period=None):
    prm = wave_from_speed(kappa, V, -center)
    return FunctionHandle(lambda x: smooth_tw_eval(prm, x, 0.0, period),
                          lambda x: smooth_tw_eval(prm, x, 0.0, period, 1))


PROFILES = ("gaussian-bump", "rational", "plateau", "peakon", "smooth-tw")


def profile(name, **params):
    """Initial profile by name.

    ``peakon`` accepts ``c``, ``center`` and ``period``; lists for ``c`` and
    ``center`` give a superposition of peakons.  ``smooth-tw`` accepts
    ``kappa``, ``V``, ``center``, ``period``; ``plateau`` accepts ``c``.
    """
    if name == "gaussian-bump":
        return _gaussian_bump()
    if name == "rational":
        return _rational()
    if name == "plateau":
        return _plateau(params.get("c", 0.6))
    if name == "peakon":
        cs = np.atleast_1d(params.get("c", 1.0))
        centers = np.atleast_1d(params.get("center", 0.0))
        if cs.size != centers.size:
            raise ExactSolutionError("peakon amplitudes and centers differ in length")
        handles = [_peakon_profile(float(c), float(x), params.get("period"))
                   for c, x in zip(cs, centers)]
        out = handles[0]
        for h in handles[1:]:
            out = out + h
        return out
    if name == "smooth-tw":
        return _smooth_tw_profile(params.get("kappa", 1.0), params.get("V", 4.0),
                                  params.get("center", 0.0), params.get("period"))
    raise ExactSolutionError(f"unknown profile {name!r}; choose from {PROFILES}")
