"""
Periodic Galerkin semidiscretizations of the reduced Camassa-Holm equation.

standard
    Find u_h in S_h with, for all phi in S_h,
    A(u_ht, phi) = -3(u u_x, phi) - 2k(u_x, phi) - 1/2 (u_x^2, phi') - (u u_xx, phi')
    where A(v, w) = (v, w) + (v', w').  Needs r >= 3.

modified
    Unknown m_h; the velocity u_h is recovered from A(u_h, phi) = (m_h, phi)
    and (m_ht, phi) = -((m u)_x, phi) - (m u_x, phi) - 2k(u_x, phi).
    Works for r >= 2.  (m u)_x is formed at the quadrature nodes by the
    product rule.

Loads are assembled from point values at the quadrature nodes; the Gram
systems are factorized once per space and reused for every stage.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .projections import h1_project, project
from .spline_core import Spline, SplineError

RECOVERY_TOL = 1e-10


class SchemeError(ValueError):
    pass


class StaleVelocityError(SchemeError):
    pass


@dataclass
class SimState:
    """Evolving unknowns of a simulation.

    ``u`` is always present (for the system schemes it is the cached
    velocity recovered from ``m``).
    """

    scheme: str
    t: float
    space: object
    u: np.ndarray
    m: np.ndarray = None

    @property
    def primary(self):
        return self.u if self.scheme == "standard" else self.m

    def spline(self, which="u"):
        return Spline(self.space, getattr(self, which))

    def copy(self):
        return replace(self, u=self.u.copy(), m=None if self.m is None else self.m.copy())


def _coef(x):
    return x.coef if isinstance(x, Spline) else np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# standard scheme


def standard_loads(space, u, k=0.0):
    g = space.grid
    u = np.ascontiguousarray(u, dtype=float)
    if g.shifted:
        return _kernels.standard_load_shift(u, g.tab, g.wt[0], float(k))
    return _kernels.standard_load(u, g.conn, g.tab, g.tmap, g.wt, float(k), space.dim)


def standard_rhs(state, k=0.0):
    """Coefficients of du_h/dt for the standard scheme."""
    space = state.space
    if space.r < 3:
        raise SchemeError("standard Galerkin needs r >= 3 (u_xx); use the modified scheme for r = 2")
    return space.system("h1").solve(standard_loads(space, state.u, k))


# ---------------------------------------------------------------------------
# modified (system) scheme


def recover_velocity(m, space=None):
    """u_h with A(u_h, phi) = (m_h, phi) for all phi.

    Accepts a :class:`Spline` (returns a Spline) or a coefficient array
    together with its space (returns an array).
    """
    if isinstance(m, Spline):
        return Spline(m.space, recover_velocity(m.coef, m.space))
    return space.system("h1").solve(space.system("mass").matvec(m))


def velocity_residual(space, m, u):
    Mm = space.system("mass").matvec(m)
    res = space.system("h1").matvec(u) - Mm
    return np.linalg.norm(res) / max(np.linalg.norm(Mm), 1e-300)


def modified_loads(space, m, u, k=0.0):
    g = space.grid
    m = np.ascontiguousarray(m, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    if g.shifted:
        return _kernels.modified_load_shift(m, u, g.tab, g.wt[0], float(k))
    return _kernels.modified_load(m, u, g.conn, g.tab, g.tmap, g.wt, float(k), space.dim)


def modified_rhs(state, k=0.0, check=True):
    """Coefficients of dm_h/dt; the cached velocity must be current."""
    space = state.space
    if check and velocity_residual(space, state.m, state.u) > 1e-8:
        raise StaleVelocityError("cached velocity does not match m; call recover_velocity")
    return space.system("mass").solve(modified_loads(space, state.m, state.u, k))


# ---------------------------------------------------------------------------
# scheme objects used by the time integrator


class StandardGalerkin:
    name = "standard"

    def __init__(self, space, k=0.0):
        if space.r < 3:
            raise SchemeError("standard Galerkin needs r >= 3 (u_xx); use the modified scheme for r = 2")
        self.space = space
        self.k = float(k)
        self.h1 = space.system("h1")
        self.h1.factorize()

    def derivative(self, t, u):
        return self.h1.solve(standard_loads(self.space, u, self.k))

    def make_state(self, t, y):
        return SimState(self.name, t, self.space, y)

    def initial_state(self, u0, projection="h1"):
        return SimState(self.name, 0.0, self.space, project(self.space, u0, projection).coef)

    def h1_norm_sq(self, state):
        return float(state.u @ self.h1.matvec(state.u))


class ModifiedGalerkin:
    name = "modified"

    def __init__(self, space, k=0.0):
        self.space = space
        self.k = float(k)
        self.mass = space.system("mass")
        self.h1 = space.system("h1")
        self.mass.factorize()
        self.h1.factorize()

    def velocity(self, m):
        return self.h1.solve(self.mass.matvec(m))

    def derivative(self, t, m):
        u = self.velocity(m)
        return self.mass.solve(modified_loads(self.space, m, u, self.k))

    def make_state(self, t, y):
        return SimState(self.name, t, self.space, self.velocity(y), y)

    def initial_state(self, u0, projection="h1"):
        """m_h(0) from (m_h, phi) = A(v_h, phi) with v_h the chosen projection of u0.

        For the H1 projection this equals the L2 projection of u0 - u0''
        (and is well defined for peakons, whose m is a measure).
        """
        if projection == "h1":
            v = h1_project(self.space, u0).coef
        else:
            v = project(self.space, u0, projection).coef
        m = self.mass.solve(self.h1.matvec(v))
        return SimState(self.name, 0.0, self.space, self.velocity(m), m)

    def h1_norm_sq(self, state):
        return float(state.u @ self.h1.matvec(state.u))


def make_scheme(name, space, k=0.0):
    if name == "standard":
        return StandardGalerkin(space, k)
    if name == "modified":
        return ModifiedGalerkin(space, k)
    raise SchemeError(f"unknown periodic scheme {name!r}")
