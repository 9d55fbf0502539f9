"""Vectorized numpy implementations of the per-node kernels.

Every function here has a loop-based twin in ``_numba`` with the same
signature and return convention.
"""

from __future__ import annotations

import numpy as np

REG_NONE = -1
REG_L2 = 0
REG_NONCONVEX = 1

CG_FR, CG_PRP, CG_HS, CG_DY = 0, 1, 2, 3

FLAG_DEGENERATE = -1
FLAG_HAT = 0
FLAG_CHECK = 1


def _rowdot(a, b):
    return np.einsum("ij,ij->i", a, b)


def quad_grad(A, b, X):
    return np.einsum("ijk,ik->ij", A, X) + b


def quad_values(A, b, X):
    AX = np.einsum("ijk,ik->ij", A, X)
    return 0.5 * _rowdot(X, AX) + _rowdot(b, X)


def _softplus(s):
    return np.maximum(s, 0.0) + np.log1p(np.exp(-np.abs(s)))


def _sigmoid(s):
    e = np.exp(-np.abs(s))
    return np.where(s >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _margins(indptr, indices, data, row_node, X):
    m = indptr.shape[0] - 1
    row_of_nz = np.repeat(np.arange(m), np.diff(indptr))
    prod = data * X[row_node[row_of_nz], indices]
    return np.bincount(row_of_nz, weights=prod, minlength=m), row_of_nz


def _reg_values(X, reg_kind, reg_weight):
    if reg_kind == REG_L2:
        return 0.5 * reg_weight * _rowdot(X, X)
    if reg_kind == REG_NONCONVEX:
        sq = X * X
        return reg_weight * np.sum(sq / (1.0 + sq), axis=1)
    return np.zeros(X.shape[0])


def _reg_grad(X, reg_kind, reg_weight):
    if reg_kind == REG_L2:
        return reg_weight * X
    if reg_kind == REG_NONCONVEX:
        den = 1.0 + X * X
        return reg_weight * 2.0 * X / (den * den)
    return np.zeros_like(X)


def logistic_values(indptr, indices, data, labels, row_node, X, reg_kind, reg_weight):
    n = X.shape[0]
    margins, _ = _margins(indptr, indices, data, row_node, X)
    loss = _softplus(-labels * margins)
    out = np.bincount(row_node, weights=loss, minlength=n)
    return out + _reg_values(X, reg_kind, reg_weight)


def logistic_grad(indptr, indices, data, labels, row_node, X, reg_kind, reg_weight):
    n, p = X.shape
    margins, row_of_nz = _margins(indptr, indices, data, row_node, X)
    # d/dm log(1 + exp(-b m)) = -b * sigmoid(-b m)
    coef = -labels * _sigmoid(-labels * margins)
    flat = row_node[row_of_nz] * p + indices
    G = np.bincount(flat, weights=data * coef[row_of_nz], minlength=n * p).reshape(n, p)
    return G + _reg_grad(X, reg_kind, reg_weight)


def ndcg_direction(vt_new, g_new, g_old, vt_old, d_old, floor):
    num = _rowdot(vt_new, g_new - g_old)
    den = _rowdot(vt_old, vt_old)
    safe = den > floor
    beta = np.where(safe, num / np.where(safe, den, 1.0), 0.0)
    return -vt_new + beta[:, None] * d_old, beta


def sdcg_direction(g_new, g_old, d_old, variant, floor):
    y = g_new - g_old
    if variant == CG_FR:
        num, den = _rowdot(g_new, g_new), _rowdot(g_old, g_old)
    elif variant == CG_PRP:
        num, den = _rowdot(g_new, y), _rowdot(g_old, g_old)
    elif variant == CG_HS:
        num, den = _rowdot(g_new, y), _rowdot(d_old, y)
    else:
        num, den = _rowdot(g_new, g_new), _rowdot(d_old, y)
    safe = np.abs(den) > floor
    beta = np.where(safe, num / np.where(safe, den, 1.0), 0.0)
    return -g_new + beta[:, None] * d_old, beta


def _eig_pair(ss, sy, yy):
    c2 = sy * sy / (ss * yy)
    r = np.sqrt(np.maximum(0.0, 1.0 - c2))
    scale = ss / sy
    return scale * c2 / (1.0 + r), scale * (1.0 + r)


def dmbfgs_directions(v_new, S, Ycheck, Yhat, l, u, floor):
    n = S.shape[0]
    ss = _rowdot(S, S)
    sy_c = _rowdot(S, Ycheck)
    yy_c = _rowdot(Ycheck, Ycheck)
    sy_h = _rowdot(S, Yhat)
    yy_h = _rowdot(Yhat, Yhat)

    nondeg = ss > floor
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = nondeg & (sy_c > 0.0) & (yy_c > floor)
        lam_c, Lam_c = _eig_pair(ss, sy_c, yy_c)
        use_check = cand & (lam_c >= l) & (Lam_c <= u)
        hat_ok = nondeg & ~use_check & (sy_h > floor) & (yy_h > floor)
        lam_h, Lam_h = _eig_pair(ss, sy_h, yy_h)

    flags = np.full(n, FLAG_DEGENERATE, dtype=np.int64)
    flags[use_check] = FLAG_CHECK
    flags[hat_ok] = FLAG_HAT
    ok = flags != FLAG_DEGENERATE

    Y = np.where(use_check[:, None], Ycheck, Yhat)
    sy = np.where(use_check, sy_c, sy_h)
    yy = np.where(use_check, yy_c, yy_h)
    lam = np.where(use_check, lam_c, np.where(hat_ok, lam_h, np.nan))
    Lam = np.where(use_check, Lam_c, np.where(hat_ok, Lam_h, np.nan))

    sy_safe = np.where(ok, sy, 1.0)
    yy_safe = np.where(ok, yy, 1.0)
    vs = _rowdot(v_new, S)
    vy = _rowdot(v_new, Y)
    tau = sy_safe / yy_safe
    theta = vs / yy_safe
    beta = vy / yy_safe - 2.0 * vs / sy_safe
    D = -tau[:, None] * v_new + beta[:, None] * S + theta[:, None] * Y
    D[~ok] = -v_new[~ok]
    tau = np.where(ok, tau, np.nan)
    return D, flags, lam, Lam, tau
