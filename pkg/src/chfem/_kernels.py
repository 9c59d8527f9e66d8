"""Compiled inner loops: nodal evaluation, load assembly, banded products and solves.

Basis tables are indexed ``tab[d, t, q, a]`` (derivative, table row, node,
local function) and cell ``e`` uses row ``tmap[e]``; uniform periodic grids
have a single row shared by every element.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def eval_nodes(coef, conn, tab, tmap):
    ne, r = conn.shape
    nq = tab.shape[1]
    out = np.zeros((ne, nq))
    loc = np.empty(r)
    for e in range(ne):
        t = tmap[e]
        for a in range(r):
            j = conn[e, a]
            loc[a] = coef[j] if j >= 0 else 0.0
        for q in range(nq):
            s = 0.0
            for a in range(r):
                s += loc[a] * tab[t, q, a]
            out[e, q] = s
    return out


@njit(cache=True)
def assemble_load(fw, conn, tab, tmap, dim):
    ne, r = conn.shape
    nq = tab.shape[1]
    out = np.zeros(dim)
    for e in range(ne):
        t = tmap[e]
        for a in range(r):
            j = conn[e, a]
            if j < 0:
                continue
            s = 0.0
            for q in range(nq):
                s += fw[e, q] * tab[t, q, a]
            out[j] += s
    return out


@njit(cache=True)
def standard_load(u, conn, tab, tmap, wt, k, dim):
    """Loads -3(u u_x, phi) - 2k(u_x, phi) - (u_x^2/2 + u u_xx, phi')."""
    ne, r = conn.shape
    nq = tab.shape[2]
    out = np.zeros(dim)
    loc = np.empty(r)
    acc = np.empty(r)
    for e in range(ne):
        t = tmap[e]
        for a in range(r):
            j = conn[e, a]
            loc[a] = u[j] if j >= 0 else 0.0
            acc[a] = 0.0
        for q in range(nq):
            u0 = 0.0
            u1 = 0.0
            u2 = 0.0
            for a in range(r):
                u0 += loc[a] * tab[0, t, q, a]
                u1 += loc[a] * tab[1, t, q, a]
                u2 += loc[a] * tab[2, t, q, a]
            w = wt[t, q]
            f0 = -(3.0 * u0 + 2.0 * k) * u1 * w
            f1 = -(0.5 * u1 * u1 + u0 * u2) * w
            for a in range(r):
                acc[a] += f0 * tab[0, t, q, a] + f1 * tab[1, t, q, a]
        for a in range(r):
            j = conn[e, a]
            if j >= 0:
                out[j] += acc[a]
    return out


@njit(cache=True)
def modified_load(m, u, conn, tab, tmap, wt, k, dim):
    """Loads -((m u)_x + m u_x + 2k u_x, phi) with (m u)_x by the product rule."""
    ne, r = conn.shape
    nq = tab.shape[2]
    out = np.zeros(dim)
    lm = np.empty(r)
    lu = np.empty(r)
    acc = np.empty(r)
    for e in range(ne):
        t = tmap[e]
        for a in range(r):
            j = conn[e, a]
            if j >= 0:
                lm[a] = m[j]
                lu[a] = u[j]
            else:
                lm[a] = 0.0
                lu[a] = 0.0
            acc[a] = 0.0
        for q in range(nq):
            m0 = 0.0
            m1 = 0.0
            u0 = 0.0
            u1 = 0.0
            for a in range(r):
                b0 = tab[0, t, q, a]
                b1 = tab[1, t, q, a]
                m0 += lm[a] * b0
                m1 += lm[a] * b1
                u0 += lu[a] * b0
                u1 += lu[a] * b1
            f0 = -(m1 * u0 + 2.0 * m0 * u1 + 2.0 * k * u1) * wt[t, q]
            for a in range(r):
                acc[a] += f0 * tab[0, t, q, a]
        for a in range(r):
            j = conn[e, a]
            if j >= 0:
                out[j] += acc[a]
    return out


@njit(cache=True)
def h1_apply(c, conn, tab, tmap, wt, dim):
    """A(u, phi_i) for the spline u with coefficients c.

    Inside each cell u_x is formed from coefficient differences (the local
    derivatives sum to zero), which avoids the O(1/h) cancellation of the
    assembled stiffness matrix acting on smooth data.
    """
    ne, r = conn.shape
    nq = tab.shape[2]
    out = np.zeros(dim)
    loc = np.empty(r)
    acc = np.empty(r)
    for e in range(ne):
        t = tmap[e]
        for a in range(r):
            j = conn[e, a]
            loc[a] = c[j] if j >= 0 else 0.0
            acc[a] = 0.0
        ref = loc[0]
        for q in range(nq):
            u0 = 0.0
            u1 = 0.0
            for a in range(r):
                u0 += loc[a] * tab[0, t, q, a]
                u1 += (loc[a] - ref) * tab[1, t, q, a]
            w = wt[t, q]
            for a in range(r):
                acc[a] += (u0 * tab[0, t, q, a] + u1 * tab[1, t, q, a]) * w
        for a in range(r):
            j = conn[e, a]
            if j >= 0:
                out[j] += acc[a]
    return out


# ---------------------------------------------------------------------------
# Uniform periodic grids: cell e couples coefficients e, ..., e + r - 1 (mod n)
# and every cell shares one basis table, so loops run over cells innermost.


@njit(cache=True)
def _extend(v, r):
    n = v.shape[0]
    ve = np.empty(n + r)
    ve[:n] = v
    for a in range(r):
        ve[n + a] = v[a % n]
    return ve


@njit(cache=True)
def _fold(acc, n, r):
    out = acc[:n].copy()
    for a in range(r):
        out[a % n] += acc[n + a]
    return out


@njit(cache=True, fastmath=True)
def standard_load_shift(u, tab, w, k):
    nq, r = tab.shape[2], tab.shape[3]
    n = u.shape[0]
    ue = _extend(u, r)
    acc = np.zeros(n + r)
    u0 = np.empty(n)
    u1 = np.empty(n)
    u2 = np.empty(n)
    for q in range(nq):
        u0[:] = 0.0
        u1[:] = 0.0
        u2[:] = 0.0
        for a in range(r):
            b0 = tab[0, 0, q, a]
            b1 = tab[1, 0, q, a]
            b2 = tab[2, 0, q, a]
            for e in range(n):
                y = ue[e + a]
                u0[e] += y * b0
                u1[e] += y * b1
                u2[e] += y * b2
        wq = w[q]
        for e in range(n):
            f0 = -(3.0 * u0[e] + 2.0 * k) * u1[e] * wq
            f1 = -(0.5 * u1[e] * u1[e] + u0[e] * u2[e]) * wq
            u0[e] = f0
            u1[e] = f1
        for a in range(r):
            b0 = tab[0, 0, q, a]
            b1 = tab[1, 0, q, a]
            for e in range(n):
                acc[e + a] += u0[e] * b0 + u1[e] * b1
    return _fold(acc, n, r)


@njit(cache=True, fastmath=True)
def modified_load_shift(m, u, tab, w, k):
    nq, r = tab.shape[2], tab.shape[3]
    n = u.shape[0]
    me = _extend(m, r)
    ue = _extend(u, r)
    acc = np.zeros(n + r)
    m0 = np.empty(n)
    m1 = np.empty(n)
    u0 = np.empty(n)
    u1 = np.empty(n)
    for q in range(nq):
        m0[:] = 0.0
        m1[:] = 0.0
        u0[:] = 0.0
        u1[:] = 0.0
        for a in range(r):
            b0 = tab[0, 0, q, a]
            b1 = tab[1, 0, q, a]
            for e in range(n):
                x = me[e + a]
                y = ue[e + a]
                m0[e] += x * b0
                m1[e] += x * b1
                u0[e] += y * b0
                u1[e] += y * b1
        wq = w[q]
        for e in range(n):
            m0[e] = -(m1[e] * u0[e] + 2.0 * m0[e] * u1[e] + 2.0 * k * u1[e]) * wq
        for a in range(r):
            b0 = tab[0, 0, q, a]
            for e in range(n):
                acc[e + a] += m0[e] * b0
    return _fold(acc, n, r)


@njit(cache=True)
def band_matvec(diags, x, cyclic):
    p1, n = diags.shape
    y = np.empty(n)
    for i in range(n):
        s = diags[0, i] * x[i]
        for d in range(1, p1):
            j = i + d
            if j < n:
                s += diags[d, i] * x[j]
            elif cyclic:
                s += diags[d, i] * x[j - n]
            j = i - d
            if j >= 0:
                s += diags[d, j] * x[j]
            elif cyclic:
                s += diags[d, j + n] * x[j + n]
        y[i] = s
    return y


def split_band_factor(cb):
    """Row-wise copies of an upper banded Cholesky factor for the two sweeps.

    ``fw[j, d] = U[j - d, j]`` and ``bw[i, d] = U[i, i + d]`` for d >= 1,
    with the reciprocal pivots in column 0 of both.
    """
    p1, n = cb.shape
    p = p1 - 1
    fw = np.zeros((n, p1))
    bw = np.zeros((n, p1))
    inv = 1.0 / cb[p]
    fw[:, 0] = inv
    bw[:, 0] = inv
    for d in range(1, p1):
        fw[d:, d] = cb[p - d, d:]
        bw[: n - d, d] = cb[p - d, d:]
    return fw, bw


@njit(cache=True)
def chol_band_solve(fw, bw, b):
    """Solve U^T U x = b from the row-wise factor of :func:`split_band_factor`."""
    n, p1 = fw.shape
    z = b.copy()
    for j in range(n):
        s = z[j]
        dmax = j if j < p1 - 1 else p1 - 1
        for d in range(1, dmax + 1):
            s -= fw[j, d] * z[j - d]
        z[j] = s * fw[j, 0]
    for i in range(n - 1, -1, -1):
        s = z[i]
        dmax = n - 1 - i if n - 1 - i < p1 - 1 else p1 - 1
        for d in range(1, dmax + 1):
            s -= bw[i, d] * z[i + d]
        z[i] = s * bw[i, 0]
    return z


@njit(cache=True)
def woodbury_update(y, idx, rows, Z, K):
    """y[rows] -= Z (K y[idx]) in place (Z holds only the non-negligible rows)."""
    m = idx.shape[0]
    s = np.zeros(m)
    for a in range(m):
        acc = 0.0
        for c in range(m):
            acc += K[a, c] * y[idx[c]]
        s[a] = acc
    for k in range(rows.shape[0]):
        acc = 0.0
        for a in range(m):
            acc += Z[k, a] * s[a]
        y[rows[k]] -= acc
    return y
