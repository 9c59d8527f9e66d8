"""L2 and H1 (elliptic) projections and Greville interpolation onto a space."""

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import splu

from .exact_solutions import FunctionHandle
from .spline_core import Spline, SplineError, h1_solve


def _as_handle(f):
    return f if isinstance(f, FunctionHandle) else FunctionHandle(f)


def l2_load(space, f):
    """``[(f, phi_i)]_i`` with cells containing a kink of f split there."""
    f = _as_handle(f)
    g = space.quad_grid(f.kinks)
    return g.load(f(g.x), 0, space.dim)


def h1_load(space, f):
    """``[A(f, phi_i)]_i = [(f, phi_i) + (f', phi_i')]_i``."""
    f = _as_handle(f)
    g = space.quad_grid(f.kinks)
    return g.load(f(g.x), 0, space.dim) + g.load(f.derivative(g.x, 1), 1, space.dim)


def l2_project(space, f):
    return Spline(space, space.system("mass").solve(l2_load(space, f)))


def h1_project(space, f):
    f = _as_handle(f)
    if f.df is None:
        raise SplineError("H1 projection needs the derivative of the function")
    return Spline(space, h1_solve(space, h1_load(space, f)))


def collocation_matrix(space, x):
    vals, conn = space.basis_at(x)
    rows = np.repeat(np.arange(len(x)), space.r)
    cols = conn.ravel()
    keep = cols >= 0
    return csr_matrix((vals[0].ravel()[keep], (rows[keep], cols[keep])),
                      shape=(len(x), space.dim))


def interpolate(space, f):
    """Spline agreeing with f at the Greville abscissae of the basis."""
    f = _as_handle(f)
    x = space.greville()
    A = collocation_matrix(space, x).tocsc()
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SplineError("singular collocation matrix") from exc
    return Spline(space, lu.solve(np.asarray(f(x), dtype=float)))


PROJECTIONS = {"h1": h1_project, "l2": l2_project, "interp": interpolate}


def project(space, f, kind="h1"):
    try:
        return PROJECTIONS[kind](space, f)
    except KeyError:
        raise SplineError(f"unknown projection {kind!r}") from None
