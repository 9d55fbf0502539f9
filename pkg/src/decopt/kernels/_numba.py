"""Loop-based kernels compiled with numba.

Reductions run left to right over the coordinate index, so results do not
depend on BLAS threading.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._numpy import CG_DY, CG_FR, CG_HS, CG_PRP, FLAG_CHECK, FLAG_DEGENERATE, FLAG_HAT, REG_L2, REG_NONCONVEX


@njit(cache=True)
def _dot(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        acc += a[k] * b[k]
    return acc


@njit(cache=True)
def quad_grad(A, b, X):
    n, p = X.shape
    G = np.empty((n, p))
    for i in range(n):
        for r in range(p):
            acc = 0.0
            for c in range(p):
                acc += A[i, r, c] * X[i, c]
            G[i, r] = acc + b[i, r]
    return G


@njit(cache=True)
def quad_values(A, b, X):
    n, p = X.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for r in range(p):
            ax = 0.0
            for c in range(p):
                ax += A[i, r, c] * X[i, c]
            acc += X[i, r] * (0.5 * ax + b[i, r])
        out[i] = acc
    return out


@njit(cache=True)
def _softplus(s):
    return max(s, 0.0) + math.log1p(math.exp(-abs(s)))


@njit(cache=True)
def _sigmoid(s):
    e = math.exp(-abs(s))
    if s >= 0:
        return 1.0 / (1.0 + e)
    return e / (1.0 + e)


@njit(cache=True)
def _add_reg_values(out, X, reg_kind, reg_weight):
    n, p = X.shape
    for i in range(n):
        acc = 0.0
        for k in range(p):
            z2 = X[i, k] * X[i, k]
            if reg_kind == REG_L2:
                acc += 0.5 * z2
            elif reg_kind == REG_NONCONVEX:
                acc += z2 / (1.0 + z2)
        out[i] += reg_weight * acc


@njit(cache=True)
def _add_reg_grad(G, X, reg_kind, reg_weight):
    n, p = X.shape
    for i in range(n):
        for k in range(p):
            z = X[i, k]
            if reg_kind == REG_L2:
                G[i, k] += reg_weight * z
            elif reg_kind == REG_NONCONVEX:
                den = 1.0 + z * z
                G[i, k] += reg_weight * 2.0 * z / (den * den)


@njit(cache=True)
def _margin(indptr, indices, data, X, node, r):
    acc = 0.0
    for k in range(indptr[r], indptr[r + 1]):
        acc += data[k] * X[node, indices[k]]
    return acc


@njit(cache=True)
def logistic_values(indptr, indices, data, labels, row_node, X, reg_kind, reg_weight):
    n = X.shape[0]
    out = np.zeros(n)
    for r in range(indptr.shape[0] - 1):
        node = row_node[r]
        m = _margin(indptr, indices, data, X, node, r)
        out[node] += _softplus(-labels[r] * m)
    _add_reg_values(out, X, reg_kind, reg_weight)
    return out


@njit(cache=True)
def logistic_grad(indptr, indices, data, labels, row_node, X, reg_kind, reg_weight):
    n, p = X.shape
    G = np.zeros((n, p))
    for r in range(indptr.shape[0] - 1):
        node = row_node[r]
        m = _margin(indptr, indices, data, X, node, r)
        coef = -labels[r] * _sigmoid(-labels[r] * m)
        for k in range(indptr[r], indptr[r + 1]):
            G[node, indices[k]] += data[k] * coef
    _add_reg_grad(G, X, reg_kind, reg_weight)
    return G


@njit(cache=True)
def ndcg_direction(vt_new, g_new, g_old, vt_old, d_old, floor):
    n, p = vt_new.shape
    D = np.empty((n, p))
    beta = np.zeros(n)
    for i in range(n):
        num = 0.0
        den = 0.0
        for k in range(p):
            num += vt_new[i, k] * (g_new[i, k] - g_old[i, k])
            den += vt_old[i, k] * vt_old[i, k]
        if den > floor:
            beta[i] = num / den
        for k in range(p):
            D[i, k] = -vt_new[i, k] + beta[i] * d_old[i, k]
    return D, beta


@njit(cache=True)
def sdcg_direction(g_new, g_old, d_old, variant, floor):
    n, p = g_new.shape
    D = np.empty((n, p))
    beta = np.zeros(n)
    for i in range(n):
        gg_new = 0.0
        gg_old = 0.0
        gy = 0.0
        dy = 0.0
        for k in range(p):
            y = g_new[i, k] - g_old[i, k]
            gg_new += g_new[i, k] * g_new[i, k]
            gg_old += g_old[i, k] * g_old[i, k]
            gy += g_new[i, k] * y
            dy += d_old[i, k] * y
        if variant == CG_FR:
            num, den = gg_new, gg_old
        elif variant == CG_PRP:
            num, den = gy, gg_old
        elif variant == CG_HS:
            num, den = gy, dy
        else:
            num, den = gg_new, dy
        if abs(den) > floor:
            beta[i] = num / den
        for k in range(p):
            D[i, k] = -g_new[i, k] + beta[i] * d_old[i, k]
    return D, beta


@njit(cache=True)
def _eig_pair(ss, sy, yy):
    c2 = sy * sy / (ss * yy)
    r = math.sqrt(max(0.0, 1.0 - c2))
    scale = ss / sy
    return scale * c2 / (1.0 + r), scale * (1.0 + r)


@njit(cache=True)
def dmbfgs_directions(v_new, S, Ycheck, Yhat, l, u, floor):
    n, p = S.shape
    D = np.empty((n, p))
    flags = np.full(n, FLAG_DEGENERATE, dtype=np.int64)
    lam = np.full(n, np.nan)
    Lam = np.full(n, np.nan)
    tau = np.full(n, np.nan)
    for i in range(n):
        s = S[i]
        v = v_new[i]
        ss = _dot(s, s)
        use = -1
        sy = 0.0
        yy = 0.0
        if ss > floor:
            sy_c = _dot(s, Ycheck[i])
            yy_c = _dot(Ycheck[i], Ycheck[i])
            if sy_c > 0.0 and yy_c > floor:
                lo, hi = _eig_pair(ss, sy_c, yy_c)
                if lo >= l and hi <= u:
                    use = FLAG_CHECK
                    sy, yy = sy_c, yy_c
                    lam[i], Lam[i] = lo, hi
            if use != FLAG_CHECK:
                sy_h = _dot(s, Yhat[i])
                yy_h = _dot(Yhat[i], Yhat[i])
                if sy_h > floor and yy_h > floor:
                    use = FLAG_HAT
                    sy, yy = sy_h, yy_h
                    lam[i], Lam[i] = _eig_pair(ss, sy_h, yy_h)
        if use == FLAG_DEGENERATE:
            for k in range(p):
                D[i, k] = -v[k]
            continue
        y = Ycheck[i] if use == FLAG_CHECK else Yhat[i]
        flags[i] = use
        vs = _dot(v, s)
        vy = _dot(v, y)
        t = sy / yy
        theta = vs / yy
        beta = vy / yy - 2.0 * vs / sy
        tau[i] = t
        for k in range(p):
            D[i, k] = -t * v[k] + beta * s[k] + theta * y[k]
    return D, flags, lam, Lam, tau
