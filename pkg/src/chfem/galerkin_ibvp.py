"""
Galerkin scheme for the m-u system on a bounded interval with u = 0 at both ends.

With S_h the Dirichlet spline space, find m_h, u_h in S_h such that

    (m_h, phi) = A(u_h, phi) (+ (g_u, phi))
    (m_ht, chi) = -(u_h m_hx, chi) - 2(u_hx m_h, chi) + (g_m, chi)

for all phi, chi in S_h.  Initial values are m_h(0) = P_h(u0 - u0'') and
u_h(0) = R_h u0 (L2 and H1 projections).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exact_solutions import FunctionHandle
from .galerkin_periodic import SchemeError, SimState, StaleVelocityError, modified_loads
from .projections import h1_project, l2_project
from .spline_core import h1_solve

BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class ForcingPair:
    """Optional sources g_m(x, t) and g_u(x, t); ``None`` means zero."""

    g_m: callable = None
    g_u: callable = None

    @property
    def is_zero(self):
        return self.g_m is None and self.g_u is None


NO_FORCING = ForcingPair()


def forcing_load(space, g, t):
    """``[(g(., t), chi_i)]_i``; zero vector when g is None."""
    if g is None:
        return np.zeros(space.dim)
    grid = space.grid
    vals = np.asarray(g(grid.x, t), dtype=float) * grid.w
    return _kernels.assemble_load(np.ascontiguousarray(vals), grid.conn, grid.tab[0],
                                  grid.tmap, space.dim)


def recover_velocity(space, m, forcing=NO_FORCING, t=0.0):
    rhs = space.system("mass").matvec(m)
    if forcing.g_u is not None:
        rhs = rhs + forcing_load(space, forcing.g_u, t)
    return h1_solve(space, rhs)


def ibvp_initial(space, u0):
    """Initial SimState: m from the L2 projection of u0 - u0'', u from the H1 projection of u0."""
    if not isinstance(u0, FunctionHandle):
        raise SchemeError("initial profile must be a FunctionHandle with two derivatives")
    if u0.d2f is None or u0.df is None:
        raise SchemeError("initial profile needs first and second derivatives")
    ends = np.abs(u0(np.array([space.a, space.b])))
    if ends.max() > BOUNDARY_TOL:
        raise SchemeError(f"initial profile violates u = 0 at the boundary: {ends}")
    m0 = FunctionHandle(lambda x: u0(x) - u0.derivative(x, 2), kinks=u0.kinks)
    m = l2_project(space, m0).coef
    u = h1_project(space, u0).coef
    return SimState("ibvp", 0.0, space, u, m)


def ibvp_rhs(state, forcing=NO_FORCING, t=None, check=True):
    """Coefficients of dm_h/dt at the state's cached velocity."""
    space = state.space
    t = state.t if t is None else t
    if check:
        u = recover_velocity(space, state.m, forcing, t)
        scale = max(np.abs(u).max(), 1e-300)
        if np.abs(u - state.u).max() > 1e-8 * scale:
            raise StaleVelocityError("cached velocity does not match m")
    loads = modified_loads(space, state.m, state.u)
    if forcing.g_m is not None:
        loads = loads + forcing_load(space, forcing.g_m, t)
    return space.system("mass").solve(loads)


class IBVPGalerkin:
    name = "ibvp"

    def __init__(self, space, forcing=NO_FORCING):
        if space.periodic:
            raise SchemeError("the ibvp scheme needs a Dirichlet space")
        self.space = space
        self.forcing = forcing
        self.mass = space.system("mass")
        self.h1 = space.system("h1")
        self.mass.factorize()
        self.h1.factorize()

    def velocity(self, m, t=0.0):
        return recover_velocity(self.space, m, self.forcing, t)

    def derivative(self, t, m):
        u = self.velocity(m, t)
        loads = modified_loads(self.space, m, u)
        if self.forcing.g_m is not None:
            loads += forcing_load(self.space, self.forcing.g_m, t)
        return self.mass.solve(loads)

    def make_state(self, t, y):
        return SimState(self.name, t, self.space, self.velocity(y, t), y)

    def initial_state(self, u0, projection="h1"):
        return ibvp_initial(self.space, u0)

    def h1_norm_sq(self, state):
        return float(state.u @ self.h1.matvec(state.u))


# ---------------------------------------------------------------------------
# Manufactured solution on [0, 1]


class ManufacturedSolution:
    """u = e^t P(x) with P = x sin(pi x) - (pi/6)(x - 1/2) + (2 pi/3)(x - c)^3.

    For ``cubic_center`` c = 1/2 the profile satisfies u = u_xx = 0 at x = 0
    and x = 1.  The m-equation source is g_m = m_t + u m_x + 2 u_x m with
    m = u - u_xx.
    """

    def __init__(self, cubic_center=0.5):
        self.c = float(cubic_center)

    def P(self, x, d=0):
        x = np.asarray(x, dtype=float)
        pi, c = math.pi, self.c
        s, co = np.sin(pi * x), np.cos(pi * x)
        y = x - c
        if d == 0:
            return x * s - pi / 6 * (x - 0.5) + 2 * pi / 3 * y**3
        if d == 1:
            return s + pi * x * co - pi / 6 + 2 * pi * y**2
        if d == 2:
            return 2 * pi * co - pi**2 * x * s + 4 * pi * y
        if d == 3:
            return -3 * pi**2 * s - pi**3 * x * co + 4 * pi
        raise ValueError("derivative order must be 0..3")

    def u(self, x, t, d=0):
        return math.exp(t) * self.P(x, d)

    def m(self, x, t, d=0):
        return self.u(x, t, d) - self.u(x, t, d + 2)

    def g_m(self, x, t):
        u, ux = self.u(x, t), self.u(x, t, 1)
        m, mx = self.m(x, t), self.m(x, t, 1)
        return m + u * mx + 2 * ux * m

    def forcing(self):
        return ForcingPair(g_m=self.g_m)

    def u_handle(self, t):
        return FunctionHandle(lambda x: self.u(x, t), lambda x: self.u(x, t, 1),
                              lambda x: self.u(x, t, 2))

    def m_handle(self, t):
        return FunctionHandle(lambda x: self.m(x, t), lambda x: self.m(x, t, 1))
