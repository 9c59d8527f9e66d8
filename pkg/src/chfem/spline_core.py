"""
Spline spaces, B-spline evaluation, Gauss-Legendre quadrature, Gram
matrices and (cyclic) banded solves.

Two kinds of spaces are supported:

- ``periodic``: uniform mesh on [a, b], dimension N, basis functions are
  the translates of the uniform order-r B-spline wrapped around the period.
- ``dirichlet``: arbitrary strictly increasing breakpoints, maximal
  smoothness C^{r-2}, the two clamped end functions removed so that every
  basis function vanishes at a and b.  Dimension N + r - 3.

Both are built from an extended knot vector in which element ``e`` is the
knot span ``e + r - 1`` and the r functions that are nonzero on it have
extended indices ``e, ..., e + r - 1``.  The connectivity array maps these
to global basis indices (mod N for periodic spaces, -1 for the removed
Dirichlet end functions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from . import _kernels

MAX_DERIV = 2


class SplineError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on the reference element [-1, 1]."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray


def gauss_legendre(n: int) -> QuadratureRule:
    if not 1 <= n <= 10:
        raise SplineError(f"Gauss-Legendre node count must be in 1..10, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(n, x, w)


def default_quadrature(r: int) -> QuadratureRule:
    # 3 nodes for piecewise linears, 5 otherwise
    return gauss_legendre(3 if r == 2 else 5)


# ---------------------------------------------------------------------------
# B-spline basis (de Boor / Cox recurrence)


def _safe_div(num, den):
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def bspline_basis(knots, span, x, r, nder=0):
    """Values and derivatives of the r B-splines of order r nonzero on a span.

    Parameters
    ----------
    knots : (M,) array
        Nondecreasing knot vector.
    span : int array
        Knot span index s of each point, ``knots[s] <= x <= knots[s+1]``.
    x : float array
        Evaluation points (same shape as `span`).
    r : int
        Spline order (degree r - 1).
    nder : int
        Highest derivative requested.

    Returns
    -------
    (nder + 1, npts, r) array; entry ``[d, p, a]`` is the d-th derivative
    at ``x[p]`` of the function with extended index ``span[p] - r + 1 + a``.
    """
    t = np.asarray(knots, dtype=float)
    s = np.atleast_1d(np.asarray(span, dtype=np.int64))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    npts = x.size

    # levels[k] holds the order-(k+1) functions nonzero on the span
    levels = [np.ones((npts, 1))]
    for k in range(2, r + 1):
        prev = levels[-1]
        pad = np.zeros((npts, k + 1))
        pad[:, 1:k] = prev
        j = s[:, None] - k + 1 + np.arange(k)[None, :]
        tj = t[j]
        left = _safe_div(x[:, None] - tj, t[j + k - 1] - tj)
        right = _safe_div(t[j + k] - x[:, None], t[j + k] - t[j + 1])
        levels.append(left * pad[:, :k] + right * pad[:, 1:])

    out = np.zeros((nder + 1, npts, r))
    out[0] = levels[r - 1]
    for d in range(1, nder + 1):
        # d-th derivative of order r from (d-1)-th derivative of lower orders
        ders = [lv.copy() for lv in levels]  # derivative order 0
        for dd in range(1, d + 1):
            new = [np.zeros_like(lv) for lv in levels]
            for k in range(2, r + 1):
                pad = np.zeros((npts, k + 1))
                pad[:, 1:k] = ders[k - 2]
                j = s[:, None] - k + 1 + np.arange(k)[None, :]
                a1 = _safe_div(np.ones(1), t[j + k - 1] - t[j])
                a2 = _safe_div(np.ones(1), t[j + k] - t[j + 1])
                new[k - 1] = (k - 1) * (a1 * pad[:, :k] - a2 * pad[:, 1:])
            ders = new
        out[d] = ders[r - 1]
    return out


# ---------------------------------------------------------------------------
# Spaces


class SplineSpace:
    """Spline trial/test space on a 1D mesh.

    Use :func:`build_periodic_space` or :func:`build_dirichlet_space`
    rather than calling the constructor directly.
    """

    def __init__(self, kind, r, breakpoints, quad=None):
        breakpoints = np.asarray(breakpoints, dtype=float)
        if r < 2:
            raise SplineError(f"spline order must be >= 2, got {r}")
        if breakpoints.ndim != 1 or breakpoints.size < 2:
            raise SplineError("need at least two breakpoints")
        if np.any(np.diff(breakpoints) <= 0):
            raise SplineError("breakpoints must be strictly increasing")
        self.kind = kind
        self.r = int(r)
        self.breakpoints = breakpoints
        self.breakpoints.flags.writeable = False
        self.a = float(breakpoints[0])
        self.b = float(breakpoints[-1])
        self.length = self.b - self.a
        self.nel = breakpoints.size - 1
        self.quad = quad if quad is not None else default_quadrature(r)

        N, p = self.nel, self.r - 1
        h = np.diff(breakpoints)
        scale = 1e-12 * max(abs(self.a), abs(self.b), self.length)
        is_uniform = bool(np.all(np.abs(h - self.length / N) <= scale))
        if kind == "periodic":
            if not is_uniform:
                raise SplineError("periodic spaces need a uniform mesh")
            self.uniform = True
            self.h = float(self.length / N)
            ext = self.a + self.h * np.arange(-p, N + p + 1)
            self.knots = ext
            self.dim = N
            conn = (np.arange(N)[:, None] + np.arange(r)[None, :]) % N
        elif kind == "dirichlet":
            self.uniform = is_uniform
            self.h = float(h.max())
            self.knots = np.concatenate([[self.a] * p, breakpoints, [self.b] * p])
            self.dim = N + r - 3
            conn = np.arange(N)[:, None] + np.arange(r)[None, :] - 1
            conn[(conn < 0) | (conn >= self.dim)] = -1
        else:
            raise SplineError(f"unknown space kind {kind!r}")
        if self.dim < 1:
            raise SplineError("space has no degrees of freedom")
        self.knots.flags.writeable = False
        self.conn = np.ascontiguousarray(conn, dtype=np.int64)
        self.elem_h = h
        self._grid = None
        self._systems = {}

    @property
    def periodic(self):
        return self.kind == "periodic"

    def __repr__(self):
        return (f"SplineSpace(kind={self.kind!r}, r={self.r}, nel={self.nel}, "
                f"dim={self.dim}, domain=[{self.a:g}, {self.b:g}])")

    # -- point location -----------------------------------------------------

    def wrap(self, x):
        x = np.asarray(x, dtype=float)
        if self.periodic:
            return self.a + np.mod(x - self.a, self.length)
        return x

    def locate(self, x):
        """Element index containing each point (after periodic wrapping)."""
        x = self.wrap(x)
        if not self.periodic:
            tol = 1e-12 * max(1.0, abs(self.a), abs(self.b))
            if np.any((x < self.a - tol) | (x > self.b + tol)):
                raise SplineError("point outside the domain of a Dirichlet space")
        e = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.clip(e, 0, self.nel - 1), x

    def basis_at(self, x, nder=0, elements=None):
        """Local basis values at points.

        Returns ``(vals, conn)`` with ``vals`` of shape (nder+1, npts, r) and
        ``conn`` the (npts, r) global indices (-1 for removed functions).
        When `elements` is given the points are evaluated on those elements
        (used at quadrature nodes and at breakpoints from a chosen side).
        """
        if elements is None:
            elements, x = self.locate(x)
        else:
            x = np.asarray(x, dtype=float)
            elements = np.asarray(elements, dtype=np.int64)
        x = np.atleast_1d(x)
        elements = np.broadcast_to(np.atleast_1d(elements), x.shape)
        vals = bspline_basis(self.knots, elements.ravel() + self.r - 1,
                             x.ravel(), self.r, nder)
        return vals, self.conn[elements.ravel()]

    def greville(self):
        """Greville abscissae of the global basis functions."""
        r = self.r
        if self.periodic:
            j = np.arange(self.dim)
        else:
            j = np.arange(1, self.dim + 1)
        g = np.array([self.knots[i + 1:i + r].mean() for i in j])
        return self.wrap(g) if self.periodic else g

    # -- quadrature grid ----------------------------------------------------

    @property
    def grid(self):
        if self._grid is None:
            self._grid = QuadGrid.build(self)
        return self._grid

    def quad_grid(self, kinks=()):
        """Quadrature grid with elements containing a kink split at the kink."""
        if len(kinks) == 0:
            return self.grid
        return QuadGrid.build(self, kinks=kinks)

    def system(self, form):
        """Cached, lazily factorized Gram system for ``form``."""
        if form not in self._systems:
            self._systems[form] = assemble_gram(self, form)
        return self._systems[form]


def build_periodic_space(N, r, domain=(0.0, 1.0), quad=None):
    if r < 2:
        raise SplineError(f"spline order must be >= 2, got {r}")
    if N < 2 * r:
        raise SplineError(f"N={N} too small for order r={r} (need N >= 2r)")
    a, b = map(float, domain)
    if not b > a:
        raise SplineError("empty domain")
    bp = a + (b - a) * np.arange(N + 1) / N
    bp[-1] = b
    return SplineSpace("periodic", r, bp, quad)


def build_dirichlet_space(breakpoints, r, quad=None):
    return SplineSpace("dirichlet", r, breakpoints, quad)


def uniform_mesh(N, domain=(0.0, 1.0)):
    a, b = map(float, domain)
    bp = a + (b - a) * np.arange(N + 1) / N
    bp[-1] = b
    return bp


def alternating_mesh(N, domain=(0.0, 1.0)):
    """Quasiuniform mesh with element sizes h/2, 3h/2, h/2, ... (N even)."""
    if N % 2:
        raise SplineError("alternating mesh needs an even element count")
    a, b = map(float, domain)
    h = (b - a) / N
    sizes = np.tile([0.5 * h, 1.5 * h], N // 2)
    bp = a + np.concatenate([[0.0], np.cumsum(sizes)])
    bp[-1] = b
    return bp


class QuadGrid:
    """Quadrature points of a space with the basis tabulated at them.

    Attributes
    ----------
    elem : (ne,) element index of each quadrature cell
    x, w : (ne, nq) physical nodes and weights
    tab : (3, nt, nq, r) basis values/derivatives; cell c uses row tmap[c]
    tmap : (ne,) table row of each cell
    conn : (ne, r) global basis indices
    """

    def __init__(self, elem, x, w, tab, tmap, conn):
        self.elem, self.x, self.w = elem, x, w
        self.tab, self.tmap, self.conn = tab, tmap, conn
        # conn[e, a] == (e + a) mod n with a single shared table row
        self.shifted = False
        # weights per table row, for the fused kernels
        if tab.shape[1] == 1:
            self.wt = np.ascontiguousarray(w[:1])
        else:
            self.wt = np.ascontiguousarray(w)

    @classmethod
    def build(cls, space, kinks=()):
        q = space.quad
        nq = q.n
        cells = []  # (element, left, right)
        kinks = np.unique(space.wrap(np.asarray(kinks, dtype=float)))
        split = {}
        for xk in kinks:
            e = int(space.locate(xk)[0])
            lo, hi = space.breakpoints[e], space.breakpoints[e + 1]
            tol = 1e-12 * (hi - lo)
            if lo + tol < xk < hi - tol:
                split.setdefault(e, []).append(xk)
        bp = space.breakpoints
        if space.uniform and space.periodic and not split:
            # all elements are translates: one table row
            e = np.arange(space.nel)
            x = 0.5 * (bp[:-1, None] + bp[1:, None]) + 0.5 * space.h * q.nodes[None, :]
            w = np.broadcast_to(0.5 * space.h * q.weights, (space.nel, nq)).copy()
            vals, _ = space.basis_at(x[0], nder=MAX_DERIV, elements=np.zeros(nq, int))
            tab = vals.reshape(MAX_DERIV + 1, 1, nq, space.r)
            tmap = np.zeros(space.nel, dtype=np.int64)
            g = cls(e, x, w, np.ascontiguousarray(tab), tmap, space.conn)
            g.shifted = True
            return g

        for e in range(space.nel):
            pts = [bp[e]] + sorted(split.get(e, [])) + [bp[e + 1]]
            for lo, hi in zip(pts[:-1], pts[1:]):
                cells.append((e, lo, hi))
        elem = np.array([c[0] for c in cells], dtype=np.int64)
        lo = np.array([c[1] for c in cells])
        hi = np.array([c[2] for c in cells])
        x = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * q.nodes[None, :]
        w = 0.5 * (hi - lo)[:, None] * q.weights[None, :]
        vals, _ = space.basis_at(x.ravel(), nder=MAX_DERIV,
                                 elements=np.repeat(elem, nq))
        tab = vals.reshape(MAX_DERIV + 1, len(cells), nq, space.r)
        tmap = np.arange(len(cells), dtype=np.int64)
        return cls(elem, x, w, np.ascontiguousarray(tab), tmap,
                   np.ascontiguousarray(space.conn[elem]))

    @property
    def weights(self):
        return self.w

    def values(self, coef, d=0):
        """d-th derivative of the spline with coefficients `coef` at the nodes."""
        return _kernels.eval_nodes(np.ascontiguousarray(coef, dtype=float),
                                   self.conn, self.tab[d], self.tmap)

    def load(self, f, d, dim):
        """Vector ``[sum_q w f B_i^{(d)}]_i`` for integrand values f at the nodes."""
        return _kernels.assemble_load(np.ascontiguousarray(f * self.w),
                                      self.conn, self.tab[d], self.tmap, dim)

    def integrate(self, f):
        return float(np.sum(f * self.w))


# ---------------------------------------------------------------------------
# Evaluation of splines


class Spline:
    """Coefficient array of a spline in a given space."""

    def __init__(self, space, coef):
        coef = np.asarray(coef, dtype=float)
        if coef.shape != (space.dim,):
            raise SplineError(f"expected {space.dim} coefficients, got {coef.shape}")
        self.space = space
        self.coef = coef

    def __call__(self, x, d=0):
        return eval_spline(self.space, self.coef, x, d)

    def __repr__(self):
        return f"Spline({self.space!r})"


def eval_spline(space, coef, x, d=0, side="right"):
    """Value of the d-th derivative of ``sum_j coef_j B_j`` at points x.

    At a breakpoint the element to the right is used (``side="left"`` picks
    the element to the left); this only matters for d >= r - 1.
    """
    if not 0 <= d <= MAX_DERIV:
        raise SplineError(f"derivative order must be 0..{MAX_DERIV}, got {d}")
    coef = np.asarray(coef, dtype=float)
    scalar = np.ndim(x) == 0
    e, xw = space.locate(np.atleast_1d(x))
    if side == "left":
        at_left_end = np.isclose(xw, space.breakpoints[e], rtol=0, atol=1e-13 * max(1, abs(space.b)))
        e = np.where(at_left_end & (e > 0), e - 1, e)
        if space.periodic:
            e = np.where(at_left_end & (e == 0) & (xw == space.a), space.nel - 1, e)
            xw = np.where(at_left_end & (e == space.nel - 1) & (xw == space.a), space.b, xw)
    vals, conn = space.basis_at(xw, nder=d, elements=e)
    c = np.where(conn >= 0, coef[np.maximum(conn, 0)], 0.0)
    out = np.einsum("pa,pa->p", vals[d], c)
    return float(out[0]) if scalar else out.reshape(np.shape(x))


# ---------------------------------------------------------------------------
# Gram matrices and banded systems


class BandedSystem:
    """Symmetric (cyclically) banded matrix with a reusable factorization.

    ``diags[d, i]`` holds ``G[i, i + d]`` for d = 0..p, with column index
    taken mod n in the cyclic case.  Entries that wrap around are handled
    by a Woodbury correction on top of a banded Cholesky factorization of
    the non-wrapping band.
    """

    def __init__(self, diags, cyclic):
        self.diags = np.ascontiguousarray(diags, dtype=float)
        self.p = self.diags.shape[0] - 1
        self.n = self.diags.shape[1]
        self.cyclic = bool(cyclic)
        if self.cyclic and self.n <= 2 * self.p:
            raise SplineError("cyclic band too wide for the matrix size")
        self._chol = None
        self._corr = None

    @property
    def dim(self):
        return self.n

    @property
    def bandwidth(self):
        return self.p

    @property
    def factorized(self):
        return self._chol is not None

    def toarray(self):
        n, p = self.n, self.p
        G = np.zeros((n, n))
        i = np.arange(n)
        G[i, i] = self.diags[0]
        for d in range(1, p + 1):
            j = i + d
            ok = j < n if not self.cyclic else np.ones(n, bool)
            jj = j[ok] % n
            G[i[ok], jj] += self.diags[d, ok]
            G[jj, i[ok]] += self.diags[d, ok]
        return G

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise SplineError(f"dimension mismatch: {x.shape[0]} != {self.n}")
        return _kernels.band_matvec(self.diags, np.ascontiguousarray(x), self.cyclic)

    __matmul__ = matvec

    def factorize(self):
        if self._chol is not None:
            return
        n, p = self.n, self.p
        ab = np.zeros((p + 1, n))
        for d in range(p + 1):
            # upper form: ab[p - d, j] = G[j - d, j]
            ab[p - d, d:] = self.diags[d, : n - d]
        try:
            self._chol = cholesky_banded(ab, lower=False, check_finite=False)
        except LinAlgError as exc:
            raise SplineError("Gram matrix is not positive definite") from exc
        self._rows = _kernels.split_band_factor(np.asarray(self._chol))
        if self.cyclic and p > 0:
            # wrap entries G[i, i + d - n] for i >= n - d live in the corner
            # block rows n-p..n-1, cols 0..p-1 (and its transpose)
            idx = np.concatenate([np.arange(p), np.arange(n - p, n)])
            W = np.zeros((2 * p, 2 * p))
            for d in range(1, p + 1):
                for i in range(n - d, n):
                    j = i + d - n
                    ii = p + (i - (n - p))
                    W[ii, j] = W[j, ii] = self.diags[d, i]
            U = np.zeros((n, 2 * p))
            U[idx, np.arange(2 * p)] = 1.0
            Z = cho_solve_banded((self._chol, False), U, check_finite=False)
            K = np.linalg.solve(np.eye(2 * p) + W @ Z[idx], W)
            # columns of Z decay geometrically away from the two ends
            rows = np.flatnonzero(np.abs(Z).max(axis=1) > 1e-20 * np.abs(Z).max())
            self._corr = (idx.astype(np.int64), rows.astype(np.int64),
                          np.ascontiguousarray(Z[rows]), np.ascontiguousarray(K))

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise SplineError(f"dimension mismatch: {rhs.shape[0]} != {self.n}")
        self.factorize()
        y = _kernels.chol_band_solve(*self._rows, np.ascontiguousarray(rhs))
        if self._corr is not None:
            _kernels.woodbury_update(y, *self._corr)
        return y


def assemble_gram(space, form):
    """Gram matrix of the basis for ``form`` in {mass, stiffness, h1}."""
    if form not in ("mass", "stiffness", "h1"):
        raise SplineError(f"unknown bilinear form {form!r}")
    if space.quad.n < space.r:
        raise SplineError("quadrature too coarse for exact Gram assembly")
    g = space.grid
    r = space.r
    tab = g.tab[:, g.tmap]  # (3, ne, nq, r)
    w = g.w[:, :, None, None]
    local = np.zeros((g.elem.size, r, r))
    if form in ("mass", "h1"):
        local += np.sum(w * tab[0][:, :, :, None] * tab[0][:, :, None, :], axis=1)
    if form in ("stiffness", "h1"):
        local += np.sum(w * tab[1][:, :, :, None] * tab[1][:, :, None, :], axis=1)
    n, p = space.dim, r - 1
    diags = np.zeros((p + 1, n))
    conn = g.conn
    for a in range(r):
        for b in range(r):
            i, j = conn[:, a], conn[:, b]
            ok = (i >= 0) & (j >= 0)
            if space.periodic:
                d = (j - i) % n
                keep = ok & (d <= p)
            else:
                d = j - i
                keep = ok & (d >= 0)
            np.add.at(diags, (d[keep], i[keep]), local[keep, a, b])
    return BandedSystem(diags, cyclic=space.periodic)


def solve(system, rhs):
    return system.solve(rhs)


def h1_apply(space, coef):
    """``[A(u, phi_i)]_i`` evaluated without the stiffness-matrix cancellation."""
    g = space.grid
    return _kernels.h1_apply(np.ascontiguousarray(coef, dtype=float), g.conn, g.tab,
                             g.tmap, g.wt, space.dim)


def h1_solve(space, rhs, refine=1):
    """Solve A(u, phi) = rhs with ``refine`` steps of iterative refinement.

    The residual uses :func:`h1_apply`, so refinement removes the O(eps/h^2)
    error floor of the banded factorization on fine meshes.
    """
    H = space.system("h1")
    x = H.solve(rhs)
    for _ in range(refine):
        x = x + H.solve(rhs - h1_apply(space, x))
    return x
