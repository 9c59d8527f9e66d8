import math

import numpy as np
import pytest

from chfem import _kernels
from chfem.exact_solutions import FunctionHandle, profile, wave_from_speed, smooth_tw_eval
from chfem.galerkin_ibvp import (ForcingPair, IBVPGalerkin, ManufacturedSolution, NO_FORCING,
                                 ibvp_initial, ibvp_rhs, recover_velocity as ibvp_velocity)
from chfem.galerkin_periodic import (ModifiedGalerkin, SchemeError, SimState, StaleVelocityError,
                                     StandardGalerkin, make_scheme, modified_rhs,
                                     recover_velocity, standard_rhs, velocity_residual)
from chfem.projections import h1_project, l2_project
from chfem.spline_core import (Spline, alternating_mesh, build_dirichlet_space,
                               build_periodic_space, eval_spline, h1_apply, uniform_mesh)


def smooth_wave(V=4.0, period=None):
    w = wave_from_speed(1.0, V)
    return w, FunctionHandle(lambda x: smooth_tw_eval(w, x, 0.0, period),
                             lambda x: smooth_tw_eval(w, x, 0.0, period, 1))


# ---------------------------------------------------------------------------
# fixed points


@pytest.mark.parametrize("r", [3, 4])
@pytest.mark.parametrize("k", [0.0, 0.5])
def test_standard_constant_state_is_fixed(r, k):
    s = build_periodic_space(40, r, (-10, 10))
    st = SimState("standard", 0.0, s, np.full(s.dim, 1.7))
    assert np.max(np.abs(standard_rhs(st, k))) < 1e-12


@pytest.mark.parametrize("r", [2, 3, 4])
@pytest.mark.parametrize("k", [0.0, 0.5])
def test_modified_constant_state_is_fixed(r, k):
    s = build_periodic_space(40, r, (-10, 10))
    c = np.full(s.dim, 0.8)
    u = recover_velocity(c, s)
    assert np.allclose(u, 0.8, atol=1e-13)
    st = SimState("modified", 0.0, s, u, c)
    assert np.max(np.abs(modified_rhs(st, k))) < 1e-12


@pytest.mark.parametrize("r", [2, 3, 4])
def test_ibvp_zero_state_is_fixed(r):
    s = build_dirichlet_space(alternating_mesh(16), r)
    st = ibvp_initial(s, FunctionHandle(np.zeros_like, np.zeros_like, np.zeros_like))
    assert np.all(st.m == 0) and np.all(st.u == 0)
    assert np.all(ibvp_rhs(st, NO_FORCING) == 0)


def test_standard_rejects_linear_splines():
    s = build_periodic_space(20, 2)
    with pytest.raises(SchemeError):
        StandardGalerkin(s)
    with pytest.raises(SchemeError):
        standard_rhs(SimState("standard", 0, s, np.zeros(20)))
    with pytest.raises(SchemeError):
        make_scheme("bogus", s)


# ---------------------------------------------------------------------------
# velocity recovery


def test_recover_velocity_helmholtz():
    errs = []
    sine = lambda x: np.sin(2 * np.pi * x)
    for N in (32, 64):
        s = build_periodic_space(N, 4, (0, 1))
        m = l2_project(s, lambda x: (1 + 4 * np.pi**2) * sine(x))
        u = recover_velocity(m)
        assert isinstance(u, Spline)
        g = s.grid
        e = g.values(u.coef) - sine(g.x)
        errs.append(math.sqrt(np.sum(e * e * g.w)))
    assert errs[1] < 1e-6
    assert math.log2(errs[0] / errs[1]) > 3.8


@pytest.mark.parametrize("r", [2, 3, 4])
def test_recover_velocity_round_trip(r):
    s = build_periodic_space(50, r, (0, 5))
    u = np.random.default_rng(r).normal(size=s.dim)
    m = s.system("mass").solve(s.system("h1").matvec(u))
    assert np.allclose(recover_velocity(m, s), u, atol=1e-10)
    assert velocity_residual(s, m, recover_velocity(m, s)) < 1e-10


def test_stale_velocity_detected():
    s = build_periodic_space(30, 3, (0, 3))
    m = np.random.default_rng(0).normal(size=s.dim)
    st = SimState("modified", 0.0, s, recover_velocity(m, s), m)
    modified_rhs(st)
    st.m = st.m + 0.1
    with pytest.raises(StaleVelocityError):
        modified_rhs(st)


def test_ibvp_stale_velocity_detected():
    s = build_dirichlet_space(uniform_mesh(20), 3)
    ms = ManufacturedSolution()
    st = ibvp_initial(s, ms.u_handle(0.0))
    st.u = st.u * 1.01
    with pytest.raises(StaleVelocityError):
        ibvp_rhs(st, ms.forcing(), 0.0)


# ---------------------------------------------------------------------------
# kernels


@pytest.mark.parametrize("r", [2, 3, 4])
def test_shift_kernels_match_generic(r):
    s = build_periodic_space(64, r, (-5, 5))
    g = s.grid
    assert g.shifted
    rng = np.random.default_rng(r)
    m, u = rng.normal(size=s.dim), rng.normal(size=s.dim)
    a = _kernels.modified_load_shift(m, u, g.tab, g.wt[0], 0.3)
    b = _kernels.modified_load(m, u, g.conn, g.tab, g.tmap, g.wt, 0.3, s.dim)
    assert np.allclose(a, b, atol=1e-13)
    if r >= 3:
        a = _kernels.standard_load_shift(u, g.tab, g.wt[0], 0.3)
        b = _kernels.standard_load(u, g.conn, g.tab, g.tmap, g.wt, 0.3, s.dim)
        assert np.allclose(a, b, atol=1e-13)


def test_modified_load_is_weak_form():
    """(m u_x + (m u)_x + 2k u_x, phi) assembled with numpy against the kernel."""
    s = build_periodic_space(30, 3, (0, 3))
    g = s.grid
    rng = np.random.default_rng(1)
    m, u = rng.normal(size=s.dim), rng.normal(size=s.dim)
    k = 0.25
    m0, m1 = g.values(m, 0), g.values(m, 1)
    u0, u1 = g.values(u, 0), g.values(u, 1)
    f = -(m1 * u0 + 2 * m0 * u1 + 2 * k * u1)
    ref = g.load(f, 0, s.dim)
    got = _kernels.modified_load(m, u, g.conn, g.tab, g.tmap, g.wt, k, s.dim)
    assert np.allclose(got, ref, atol=1e-13)


def test_standard_load_is_weak_form():
    s = build_periodic_space(30, 4, (0, 3))
    g = s.grid
    u = np.random.default_rng(2).normal(size=s.dim)
    k = 0.25
    u0, u1, u2 = (g.values(u, d) for d in range(3))
    ref = g.load(-3 * u0 * u1 - 2 * k * u1, 0, s.dim) + g.load(-0.5 * u1 * u1 - u0 * u2, 1, s.dim)
    got = _kernels.standard_load(u, g.conn, g.tab, g.tmap, g.wt, k, s.dim)
    assert np.allclose(got, ref, atol=1e-13)


# ---------------------------------------------------------------------------
# consistency with the travelling-wave ansatz u_t = -V u_x


def _consistency(scheme, r, N):
    V = 4.0
    w, u0 = smooth_wave(V, 200.0)
    s = build_periodic_space(N, r, (-100, 100))
    sch = make_scheme(scheme, s)
    st = sch.initial_state(u0)
    y = st.primary
    dy = sch.derivative(0.0, y)
    du = dy if scheme == "standard" else sch.velocity(dy)
    ut = FunctionHandle(lambda x: -V * smooth_tw_eval(w, x, 0.0, 200.0, 1))
    g = s.grid
    e = g.values(du) - ut(g.x)
    return math.sqrt(np.sum(e * e * g.w))


@pytest.mark.parametrize("scheme,r", [("standard", 4), ("modified", 4), ("modified", 3)])
def test_travelling_wave_consistency(scheme, r):
    e1, e2 = _consistency(scheme, r, 1000), _consistency(scheme, r, 2000)
    assert math.log2(e1 / e2) > r - 1.5
    assert e2 < 1e-3


# ---------------------------------------------------------------------------
# initial states


def test_modified_initial_m_matches_l2_projection_of_u_minus_uxx():
    s = build_periodic_space(400, 4, (-50, 50))
    u0 = profile("gaussian-bump")
    st = ModifiedGalerkin(s).initial_state(u0)
    m_ref = l2_project(s, lambda x: u0(x) - u0.derivative(x, 2)).coef
    assert np.allclose(st.m, m_ref, atol=1e-8)
    assert np.allclose(st.u, h1_project(s, u0).coef, atol=1e-12)


def test_ibvp_initial_and_boundary():
    s = build_dirichlet_space(alternating_mesh(32), 4)
    ms = ManufacturedSolution()
    st = ibvp_initial(s, ms.u_handle(0.0))
    assert np.max(np.abs(eval_spline(s, st.u, np.array([0.0, 1.0])))) < 1e-12
    # printed cubic centre 1/3 violates u(0) = 0
    with pytest.raises(SchemeError):
        ibvp_initial(s, ManufacturedSolution(1 / 3).u_handle(0.0))
    with pytest.raises(SchemeError):
        ibvp_initial(s, FunctionHandle(lambda x: x * (1 - x)))


@pytest.mark.parametrize("r", [2, 3, 4])
def test_ibvp_initial_projection_rate(r):
    errs = []
    u0 = FunctionHandle(lambda x: np.sin(np.pi * x), lambda x: np.pi * np.cos(np.pi * x),
                        lambda x: -np.pi**2 * np.sin(np.pi * x))
    m0 = lambda x: (1 + np.pi**2) * np.sin(np.pi * x)
    for N in (16, 32, 64):
        s = build_dirichlet_space(uniform_mesh(N), r)
        st = ibvp_initial(s, u0)
        g = s.grid
        e = g.values(st.m) - m0(g.x)
        errs.append(math.sqrt(np.sum(e * e * g.w)))
    assert abs(math.log2(errs[1] / errs[2]) - r) < 0.15


def test_ibvp_velocity_with_u_forcing():
    s = build_dirichlet_space(uniform_mesh(24), 3)
    m = np.random.default_rng(0).normal(size=s.dim)
    gu = lambda x, t: np.sin(np.pi * x) * (1 + t)
    u = ibvp_velocity(s, m, ForcingPair(g_u=gu), 0.5)
    g = s.grid
    rhs = s.system("mass").matvec(m) + g.load(gu(g.x, 0.5), 0, s.dim)
    assert np.allclose(h1_apply(s, u), rhs, atol=1e-12)
    assert ForcingPair().is_zero and not ForcingPair(g_u=gu).is_zero


def test_ibvp_needs_dirichlet_space():
    with pytest.raises(SchemeError):
        IBVPGalerkin(build_periodic_space(20, 3))


# ---------------------------------------------------------------------------
# manufactured solution


def test_manufactured_profile_boundary_values():
    ms = ManufacturedSolution()
    for t in (0.0, 0.7):
        assert abs(ms.u(0.0, t)) < 1e-14 and abs(ms.u(1.0, t)) < 1e-14
        assert abs(ms.u(0.0, t, 2)) < 1e-13 and abs(ms.u(1.0, t, 2)) < 1e-13
    assert abs(ManufacturedSolution(1 / 3).u(0.0, 0.0) - 19 * math.pi / 324) < 1e-14


def test_manufactured_derivatives_match_fd():
    ms = ManufacturedSolution()
    x = np.linspace(0.05, 0.95, 13)
    e = 1e-5
    for d in range(3):
        fd = (ms.P(x + e, d) - ms.P(x - e, d)) / (2 * e)
        assert np.allclose(ms.P(x, d + 1), fd, atol=1e-8)


def test_manufactured_forcing_closes_the_equation():
    """g_m = m_t + u m_x + 2 u_x m with m = u - u_xx, all by finite differences."""
    ms = ManufacturedSolution()
    x = np.linspace(0.1, 0.9, 9)
    t, e = 0.4, 1e-4
    u = lambda x, t: ms.u(x, t)
    m_fd = lambda x, t: u(x, t) - (u(x + e, t) - 2 * u(x, t) + u(x - e, t)) / e**2
    mt = (ms.m(x, t + e) - ms.m(x, t - e)) / (2 * e)
    mx = (ms.m(x + e, t) - ms.m(x - e, t)) / (2 * e)
    ux = (u(x + e, t) - u(x - e, t)) / (2 * e)
    g_fd = mt + u(x, t) * mx + 2 * ux * ms.m(x, t)
    assert np.allclose(ms.g_m(x, t), g_fd, atol=1e-6)
    assert np.allclose(ms.m(x, t), m_fd(x, t), atol=1e-4)
