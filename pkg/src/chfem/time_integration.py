"""
Classical RK4 time stepping for the Galerkin schemes, run configurations,
checkpointed evolution and an empirical Courant-number stability probe.

A scheme object provides ``derivative(t, y)`` on its primary coefficient
array (u for the standard scheme, m otherwise; the velocity is recovered
inside every stage) and ``make_state(t, y)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .exact_solutions import PeakonParams, TravellingWave, profile, wave_from_speed
from .galerkin_ibvp import IBVPGalerkin, ManufacturedSolution, NO_FORCING
from .galerkin_periodic import SchemeError, make_scheme
from .spline_core import (alternating_mesh, build_dirichlet_space,
                          build_periodic_space, default_quadrature, gauss_legendre,
                          uniform_mesh)

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 10.0


class InstabilityError(RuntimeError):
    """Raised when the discrete solution blows up.

    ``step`` is the step index at which it was detected and ``trajectory``
    holds everything recorded up to the last finite checkpoint.
    """

    def __init__(self, msg, step=None, t=None, trajectory=None):
        super().__init__(msg)
        self.step = step
        self.t = t
        self.trajectory = trajectory


# ---------------------------------------------------------------------------
# RK4


def rk4_step(state, dt, scheme):
    """One classical RK4 step; returns a new state (velocity recovered)."""
    t = state.t
    y = state.primary
    y1 = _rk4(scheme.derivative, t, y, dt)
    if not np.all(np.isfinite(y1)):
        raise InstabilityError("non-finite state after RK4 step", step=None, t=t + dt)
    return scheme.make_state(t + dt, y1)


def _rk4(f, t, y, dt):
    h2 = 0.5 * dt
    k1 = f(t, y)
    k2 = f(t + h2, y + h2 * k1)
    acc = k1 + 2.0 * k2
    k3 = f(t + h2, y + h2 * k2)
    acc += 2.0 * k3
    k4 = f(t + dt, y + dt * k3)
    acc += k4
    return y + (dt / 6.0) * acc


def rk4_solve(f, y0, T, nsteps):
    """Integrate y' = f(t, y) with nsteps RK4 steps; returns y(T)."""
    y = np.asarray(y0, dtype=float)
    dt = T / nsteps
    for n in range(nsteps):
        y = _rk4(f, n * dt, y, dt)
    return y


# ---------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    """Everything needed to reproduce one simulation.

    The step is ``dt`` if given, otherwise ``courant * h / speed`` with
    ``speed`` defaulting to the profile's wave speed.  The step is then
    shrunk slightly so that T is reached after a whole number of steps.
    """

    scheme: str = "standard"
    r: int = 4
    N: int = 2000
    domain: tuple = (-100.0, 100.0)
    mesh: str = "uniform"
    profile: str = "smooth-tw"
    profile_params: dict = field(default_factory=dict)
    T: float = 1.0
    dt: float = None
    courant: float = None
    speed: float = None
    checkpoints: tuple = ()
    k: float = 0.0
    projection: str = "h1"
    quad_n: int = None
    forcing: str = "none"
    check_every: int = 10

    def __post_init__(self):
        self.domain = tuple(float(v) for v in self.domain)
        self.checkpoints = tuple(float(t) for t in self.checkpoints)
        self.validate()

    def validate(self):
        if self.T < 0:
            raise SchemeError("T must be non-negative")
        if self.dt is None and self.courant is None:
            raise SchemeError("give either dt or courant")
        if self.dt is not None and not self.dt > 0:
            raise SchemeError("dt must be positive")
        if self.courant is not None and not self.courant > 0:
            raise SchemeError("courant must be positive")
        if any(t < 0 or t > self.T + 1e-12 for t in self.checkpoints):
            raise SchemeError("checkpoint times must lie in [0, T]")
        if list(self.checkpoints) != sorted(self.checkpoints):
            raise SchemeError("checkpoint times must be increasing")
        if self.scheme not in ("standard", "modified", "ibvp"):
            raise SchemeError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "standard" and self.r < 3:
            raise SchemeError("standard scheme needs r >= 3")
        if self.mesh not in ("uniform", "alternating"):
            raise SchemeError(f"unknown mesh {self.mesh!r}")

    def to_dict(self):
        return asdict(self)

    @property
    def h(self):
        return (self.domain[1] - self.domain[0]) / self.N

    def wave_speed(self):
        if self.speed is not None:
            return float(self.speed)
        p = self.profile_params
        if self.profile == "peakon":
            return float(np.max(np.atleast_1d(p.get("c", 1.0))))
        if self.profile == "smooth-tw":
            return float(p.get("V", 4.0))
        return 1.0

    def step(self):
        """(dt, nsteps) with nsteps * dt == T."""
        dt = self.dt if self.dt is not None else self.courant * self.h / self.wave_speed()
        if self.T == 0:
            return dt, 0
        n = max(1, math.ceil(self.T / dt * (1 - 1e-12)))
        return self.T / n, n

    def quadrature(self):
        if self.quad_n is None:
            return default_quadrature(self.r)
        return gauss_legendre(self.quad_n)

    def build_space(self):
        q = self.quadrature()
        if self.scheme == "ibvp":
            mk = alternating_mesh if self.mesh == "alternating" else uniform_mesh
            return build_dirichlet_space(mk(self.N, self.domain), self.r, q)
        if self.mesh != "uniform":
            raise SchemeError("periodic schemes need a uniform mesh")
        return build_periodic_space(self.N, self.r, self.domain, q)

    def exact(self):
        """Exact solution object, or None when the profile has none."""
        p = dict(self.profile_params)
        if self.scheme == "ibvp":
            if self.forcing == "manufactured":
                return ManufacturedSolution(p.get("cubic_center", 0.5))
            return None
        if self.profile == "peakon" and np.size(p.get("c", 1.0)) == 1:
            prm = PeakonParams(float(np.ravel(p.get("c", 1.0))[0]),
                               -float(np.ravel(p.get("center", 0.0))[0]))
            return TravellingWave(prm, domain=self.domain)
        if self.profile == "smooth-tw":
            prm = wave_from_speed(p.get("kappa", 1.0), p.get("V", 4.0), -p.get("center", 0.0))
            return TravellingWave(prm, domain=self.domain)
        return None

    def initial_profile(self):
        if self.scheme == "ibvp" and self.forcing == "manufactured":
            return self.exact().u_handle(0.0)
        p = dict(self.profile_params)
        if self.profile in ("peakon", "smooth-tw"):
            p.setdefault("period", self.domain[1] - self.domain[0])
        p.pop("cubic_center", None)
        return profile(self.profile, **p)

    def build(self):
        """(space, scheme object, initial state)."""
        space = self.build_space()
        if self.scheme == "ibvp":
            forcing = self.exact().forcing() if self.forcing == "manufactured" else NO_FORCING
            sch = IBVPGalerkin(space, forcing)
        else:
            sch = make_scheme(self.scheme, space, self.k)
        state = sch.initial_state(self.initial_profile(), self.projection)
        return space, sch, state


# ---------------------------------------------------------------------------
# Evolution


@dataclass
class Trajectory:
    config: RunConfig
    states: list = field(default_factory=list)
    records: dict = field(default_factory=dict)
    status: str = "ok"
    failed_step: int = None
    dt: float = None
    nsteps: int = None

    @property
    def times(self):
        return [s.t for s in self.states]

    @property
    def final(self):
        return self.states[-1]


def l1_norm(space, coef):
    g = space.grid
    return float(np.sum(np.abs(g.values(coef, 0)) * g.w))


def evolve(config, hooks=None, keep_states=True, built=None):
    """Run ``config`` to T, calling ``hooks[name](state)`` at each checkpoint.

    Checkpoint times are snapped to the nearest time step; T itself is
    always a checkpoint.  Raises :class:`InstabilityError` (carrying the
    partial trajectory) when the state becomes non-finite or its L1 norm
    exceeds ``BLOWUP_FACTOR`` times the initial one.
    """
    hooks = dict(hooks or {})
    space, sch, state = built if built is not None else config.build()
    dt, nsteps = config.step()
    traj = Trajectory(config, records={k: [] for k in hooks}, dt=dt, nsteps=nsteps)
    marks = sorted({min(nsteps, int(round(t / dt))) if nsteps else 0
                    for t in config.checkpoints} | {0, nsteps})

    def record(st):
        for name, fn in hooks.items():
            traj.records[name].append(fn(st))
        if keep_states or st.t == marks[-1] * dt:
            traj.states.append(st)

    record(state)
    l1_0 = l1_norm(space, state.u)
    limit = BLOWUP_FACTOR * max(l1_0, 1e-300)
    y = state.primary.copy()
    f = sch.derivative
    every = max(1, int(config.check_every))
    next_mark = 1
    for n in range(1, nsteps + 1):
        y = _rk4(f, (n - 1) * dt, y, dt)
        at_mark = n == marks[next_mark]
        if n % every == 0 or at_mark:
            bad = not np.all(np.isfinite(y))
            if not bad:
                u = y if sch.name == "standard" else sch.velocity(y)
                bad = l1_norm(space, u) > limit
            if bad:
                traj.status = "unstable"
                traj.failed_step = n
                raise InstabilityError(f"instability detected at step {n} (t={n * dt:.6g})",
                                       step=n, t=n * dt, trajectory=traj)
        if at_mark:
            record(sch.make_state(n * dt, y.copy()))
            next_mark += 1
    if nsteps == 0 and not traj.states:
        traj.states.append(state)
    return traj


def run_is_stable(config):
    try:
        evolve(config, keep_states=False)
    except InstabilityError:
        return False
    return True


# ---------------------------------------------------------------------------
# Stability probe


@dataclass
class ProbeResult:
    courant: float
    status: str  # "bracketed", "all-stable" or "none-stable"
    trials: list


def stability_probe(template, grid, resolution=0.01, is_stable=run_is_stable):
    """Largest stable Courant number on ``grid``, refined by bisection.

    The grid is scanned upwards until the first unstable value; the gap
    between the last stable and first unstable value is then bisected to
    ``resolution``.
    """
    grid = [float(c) for c in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("courant grid must be strictly increasing")
    trials = []

    def test(c):
        ok = is_stable(replace(template, courant=c, dt=None))
        trials.append((c, ok))
        log.info("courant %.4f: %s", c, "stable" if ok else "unstable")
        return ok

    lo = hi = None
    for c in grid:
        if test(c):
            lo = c
        else:
            hi = c
            break
    if lo is None:
        return ProbeResult(grid[0], "none-stable", trials)
    if hi is None:
        return ProbeResult(lo, "all-stable", trials)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if test(mid):
            lo = mid
        else:
            hi = mid
    return ProbeResult(lo, "bracketed", trials)
