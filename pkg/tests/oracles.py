"""Independent reference solvers used only by the tests.

Nothing here imports the package's LP or pricing code: paths are enumerated with
itertools, LPs are solved with scipy's HiGHS or by brute-force vertex enumeration.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


# ---------------------------------------------------------------------------
# small LPs by vertex enumeration


def vertex_enumeration(c, A, rel, b, lb, ub, sense="min", tol=1e-9):
    """Optimum of a bounded LP by enumerating basic solutions; ``(status, value, x)``."""
    c, A, b = np.asarray(c, float), np.asarray(A, float), np.asarray(b, float)
    n = c.size
    rows, rhs, kinds = [], [], []
    for i in range(A.shape[0]):
        rows.append(A[i]), rhs.append(b[i]), kinds.append(rel[i])
    eye = np.eye(n)
    for j in range(n):
        if np.isfinite(lb[j]):
            rows.append(eye[j]), rhs.append(lb[j]), kinds.append(1)
        if np.isfinite(ub[j]):
            rows.append(eye[j]), rhs.append(ub[j]), kinds.append(-1)
    rows, rhs = np.array(rows), np.array(rhs)
    best, arg = None, None
    for combo in itertools.combinations(range(len(rows)), n):
        M = rows[list(combo)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs[list(combo)])
        ax = rows @ x
        scale = 1 + np.abs(rows).sum(axis=1) * (1 + np.abs(x).max())
        ok = True
        for k in range(len(rows)):
            r = ax[k] - rhs[k]
            if (kinds[k] == 1 and r < -tol * scale[k]) or (kinds[k] == -1 and r > tol * scale[k]) \
                    or (kinds[k] == 0 and abs(r) > tol * scale[k]):
                ok = False
                break
        if not ok:
            continue
        v = float(c @ x)
        if best is None or (v < best if sense == "min" else v > best):
            best, arg = v, x
    if best is None:
        return "infeasible", math.nan, None
    return "optimal", best, arg


# ---------------------------------------------------------------------------
# path spaces


def enumerate_paths(T, d, grids):
    """All paths as an array (P, T, d), last coordinate fastest; ``grids[(t, n)]`` are levels."""
    per_date = [list(itertools.product(*[grids[(t, n)] for n in range(1, d + 1)])) for t in range(1, T + 1)]
    return np.array([list(p) for p in itertools.product(*per_date)], dtype=float).reshape(-1, T, d)


def _prefix_ids(paths, t):
    """Integer id of the length-t history of every path (t = 0 is the root)."""
    keys = [tuple(map(tuple, p[:t])) for p in paths]
    table = {}
    return np.array([table.setdefault(k, len(table)) for k in keys]), len(table)


def _marginal_rows(paths, marginals, T, d):
    rows, rhs = [], []
    for t in range(1, T + 1):
        for n in range(1, d + 1):
            for lv, w in marginals[(t, n)]:
                rows.append(np.isclose(paths[:, t - 1, n - 1], lv, atol=1e-12, rtol=0).astype(float))
                rhs.append(w)
    return np.array(rows), np.array(rhs)


def _drift_rows(paths, x0, T, d, assets):
    rows = []
    P = paths.shape[0]
    full = np.concatenate([np.broadcast_to(np.asarray(x0, float), (P, 1, d)), paths], axis=1)
    for t in range(T):
        ids, k = _prefix_ids(paths, t)
        inc = full[:, t + 1] - full[:, t]
        for j in range(k):
            mask = ids == j
            for n in assets:
                rows.append(np.where(mask, inc[:, n], 0.0))
    return np.array(rows).reshape(-1, P)


def martingale_transport(x0, marginals, phi, T, d, sense="max", drift="martingale", assets=None, pinned=()):
    """``sup / inf E^q[phi]`` over measures with the marginals and zero (or nonpositive) drift.

    ``marginals[(t, n)]`` is a list of (level, weight); ``phi`` a vector over paths in
    :func:`enumerate_paths` order; ``pinned`` adds ``E^q[psi] = price`` rows.
    Returns ``(value, q)`` or ``(nan, None)`` when empty.
    """
    grids = {k: [lv for lv, _ in v] for k, v in marginals.items()}
    paths = enumerate_paths(T, d, grids)
    Aeq, beq = _marginal_rows(paths, marginals, T, d)
    for psi, price in pinned:
        Aeq, beq = np.vstack([Aeq, np.asarray(psi, float)]), np.append(beq, price)
    assets = list(range(d)) if assets is None else list(assets)
    D = _drift_rows(paths, x0, T, d, assets) if assets else np.zeros((0, paths.shape[0]))
    kw = {}
    if drift == "martingale":
        Aeq, beq = np.vstack([Aeq, D]), np.concatenate([beq, np.zeros(len(D))])
    elif drift == "supermartingale" and len(D):
        kw = {"A_ub": D, "b_ub": np.zeros(len(D))}
    c = -np.asarray(phi, float) if sense == "max" else np.asarray(phi, float)
    res = linprog(c, A_eq=Aeq, b_eq=beq, bounds=(0, None), method="highs", **kw)
    if res.status != 0:
        return math.nan, None
    v = -res.fun if sense == "max" else res.fun
    return float(v), res.x


def martingale_feasible(x0, marginals, T, d, assets=None, pinned=()) -> bool:
    grids = {k: [lv for lv, _ in v] for k, v in marginals.items()}
    P = enumerate_paths(T, d, grids).shape[0]
    v, _ = martingale_transport(x0, marginals, np.zeros(P), T, d, assets=assets, pinned=pinned)
    return not math.isnan(v)


def superhedge(x0, marginals, phi, T, d, node_set=None, gamma=None, options=()):
    """Direct primal LP on the atom lattice.

    ``node_set(t, history)`` returns ``(V, R)`` (vertices, rays) for the position at
    that node; ``gamma`` is a vector bounding position changes. ``options`` are
    ``(psi, asks, bids, unbounded_ask, unbounded_bid)`` with ``psi`` over paths.
    Static legs are arbitrary functions of each marginal coordinate, priced by the
    marginal. Returns the value, ``-inf`` if unbounded.
    """
    grids = {k: [lv for lv, _ in v] for k, v in marginals.items()}
    paths = enumerate_paths(T, d, grids)
    P = paths.shape[0]
    cols_cost, cols, bounds = [], [], []

    def add(col, cost, bd):
        cols.append(col), cols_cost.append(cost), bounds.append(bd)

    for t in range(1, T + 1):
        for n in range(1, d + 1):
            for lv, w in marginals[(t, n)]:
                add(np.isclose(paths[:, t - 1, n - 1], lv, atol=1e-12, rtol=0).astype(float), w, (None, None))
    for psi, asks, bids, ua, ub_ in options:
        psi = np.asarray(psi, float)
        for a, qty in asks:
            add(psi - a, 0.0, (0, qty))
        if ua is not None:
            add(psi - ua, 0.0, (0, None))
        for bb, qty in bids:
            add(bb - psi, 0.0, (0, qty))
        if ub_ is not None:
            add(ub_ - psi, 0.0, (0, None))
    n_static = len(cols)
    full = np.concatenate([np.broadcast_to(np.asarray(x0, float), (P, 1, d)), paths], axis=1)
    extra_ub = []  # rows over strategy vars, stored as (coeff dict, rhs)
    extra_eq = []
    pos_index = {}
    for t in range(T):
        ids, k = _prefix_ids(paths, t)
        inc = full[:, t + 1] - full[:, t]
        for j in range(k):
            mask = ids == j
            hist = full[np.argmax(mask), : t + 1]
            if gamma is not None:
                for n in range(d):
                    pos_index[(t, j, n)] = len(cols)
                    add(np.where(mask, inc[:, n], 0.0), 0.0, (None, None))
                continue
            V, R = node_set(t, hist)
            V = np.asarray(V, float).reshape(-1, d)
            R = np.zeros((0, d)) if R is None else np.asarray(R, float).reshape(-1, d)
            lam = []
            for v in V:
                lam.append(len(cols))
                add(np.where(mask, inc @ v, 0.0), 0.0, (0, None))
            for r in R:
                add(np.where(mask, inc @ r, 0.0), 0.0, (0, None))
            extra_eq.append(({i: 1.0 for i in lam}, 1.0))
    if gamma is not None:
        g = np.broadcast_to(np.asarray(gamma, float), (d,))
        for t in range(T):
            ids, k = _prefix_ids(paths, t)
            pids, _ = _prefix_ids(paths, t - 1) if t > 0 else (np.zeros(P, int), 1)
            for j in range(k):
                parent = pids[np.argmax(ids == j)]
                for n in range(d):
                    me = pos_index[(t, j, n)]
                    coef = {me: 1.0}
                    if t > 0:
                        coef[pos_index[(t - 1, parent, n)]] = -1.0
                    extra_ub.append((coef, g[n]))
                    extra_ub.append(({i: -v for i, v in coef.items()}, g[n]))
    nv = len(cols)
    Acov = np.array(cols).T  # P x nv
    A_ub = [-Acov]
    b_ub = [-np.asarray(phi, float)]
    if extra_ub:
        M = np.zeros((len(extra_ub), nv))
        for i, (coef, _) in enumerate(extra_ub):
            for j, v in coef.items():
                M[i, j] = v
        A_ub.append(M), b_ub.append(np.array([r for _, r in extra_ub]))
    A_eq = b_eq = None
    if extra_eq:
        A_eq = np.zeros((len(extra_eq), nv))
        for i, (coef, _) in enumerate(extra_eq):
            for j, v in coef.items():
                A_eq[i, j] = v
        b_eq = np.array([r for _, r in extra_eq])
    res = linprog(np.array(cols_cost), A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub), A_eq=A_eq,
                  b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 3:
        return -math.inf
    if res.status != 0:
        raise RuntimeError(f"oracle LP failed: {res.message}")
    return float(res.fun)


def ladder_cost_bruteforce(asks, bids, ua, ub, eta):
    """Cost of trading ``eta`` by walking the book level by level."""
    if eta == 0:
        return 0.0
    levels, extra, sign = (asks, ua, 1.0) if eta > 0 else (bids, ub, -1.0)
    left, total = abs(eta), 0.0
    for p, q in levels:
        take = min(left, q)
        total += p * take
        left -= take
    if left > 1e-12:
        if extra is None:
            return math.inf
        total += extra * left
    return sign * total
