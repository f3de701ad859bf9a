"""Independent test oracles: exhaustive and DP-based exact solvers.

These deliberately avoid the package's solver paths so that agreement
checks are meaningful.  Everything works straight off MipInstance data.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def enumerate_lp_vertices(c, a, senses, b, lb, ub):
    """Best objective over all basic feasible points of a small bounded LP.

    Standard-form slack extension; every basis choice is enumerated and,
    within a basis, every on-bound assignment of the nonbasic structural
    variables.  Minimization.  Returns (best objective, best point).
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    slack_sign = []
    for s in senses:
        if s == "<=":
            slack_sign.append(1.0)
        elif s == ">=":
            slack_sign.append(-1.0)
        else:
            slack_sign.append(0.0)
    total = n + m
    a_ext = np.zeros((m, total))
    a_ext[:, :n] = a
    for r, sg in enumerate(slack_sign):
        a_ext[r, n + r] = sg
    best = math.inf
    best_x = None
    for basis in itertools.combinations(range(total), m):
        bmat = a_ext[:, basis]
        if abs(np.linalg.det(bmat)) < 1e-10:
            continue
        nonbasic_struct = [j for j in range(n) if j not in basis]
        k = len(nonbasic_struct)
        for bits in range(1 << k):
            x = np.zeros(total)
            for t, j in enumerate(nonbasic_struct):
                x[j] = ub[j] if (bits >> t) & 1 else lb[j]
            rhs = b - a_ext @ x
            try:
                xb = np.linalg.solve(bmat, rhs)
            except np.linalg.LinAlgError:
                continue
            x[list(basis)] = xb
            ok = True
            for j in range(n):
                if x[j] < lb[j] - 1e-8 or x[j] > ub[j] + 1e-8:
                    ok = False
                    break
            if ok:
                for r in range(m):
                    sv = x[n + r]
                    if slack_sign[r] == 0.0 and abs(sv) > 1e-8:
                        ok = False
                    elif sv < -1e-8:
                        ok = False
                    if not ok:
                        break
            if not ok:
                continue
            val = float(c @ x[:n])
            if val < best - 1e-12:
                best = val
                best_x = x[:n].copy()
    return best, best_x


def _row_masks(instance):
    """Per-column bitmask of the rows each variable appears in."""
    masks = [0] * instance.num_vars
    for r, row in enumerate(instance.rows):
        for j, v in row.coeffs:
            if v != 0.0:
                masks[j] |= 1 << r
    return masks


def set_cover_dp(instance) -> float:
    """Exact optimum of a min-cost set-covering instance (rows: >= 1).

    Layered DP over row masks: after processing column j the table holds
    the cheapest cost covering at least each mask using columns 0..j.
    """
    m = len(instance.rows)
    assert m <= 22, "mask DP needs at most 22 rows"
    for row in instance.rows:
        assert row.sense == ">=" and row.rhs == 1.0
        assert all(v == 1.0 for _, v in row.coeffs)
    assert instance.sense == "minimize" and instance.num_continuous == 0
    costs = instance.objective_vector()
    masks = _row_masks(instance)
    full = (1 << m) - 1
    g = np.full(1 << m, np.inf)
    g[0] = 0.0
    idx = np.arange(1 << m)
    for j in range(instance.num_binary):
        mj = masks[j]
        g = np.minimum(g, g[idx & ~mj] + costs[j])
    return float(g[full])


def set_packing_dp(instance) -> float:
    """Exact optimum of a max-value set-packing instance (rows: <= 1).

    DP over row masks: best value using a subset of columns whose rows
    fit inside the mask, columns pairwise row-disjoint.
    """
    m = len(instance.rows)
    assert m <= 22, "mask DP needs at most 22 rows"
    for row in instance.rows:
        assert row.sense == "<=" and row.rhs == 1.0
        assert all(v == 1.0 for _, v in row.coeffs)
    assert instance.sense == "maximize" and instance.num_continuous == 0
    values = instance.objective_vector()
    masks = _row_masks(instance)
    full = (1 << m) - 1
    h = np.zeros(1 << m)
    idx = np.arange(1 << m)
    for j in range(instance.num_binary):
        mj = masks[j]
        fits = (idx & mj) == mj
        cand = np.where(fits, h[idx & ~mj] + values[j], -np.inf)
        h = np.maximum(h, cand)
    return float(h[full])


def reference_logistic_probabilities(x, y, reg, iters=20000, lr=0.5):
    """Plain fixed-step gradient descent, run long, as a training oracle."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(iters):
        z = x @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
        gw = x.T @ (p - y) / len(y) + reg * w
        gb = np.mean(p - y)
        w -= lr * gw
        b -= lr * gb
    return 1.0 / (1.0 + np.exp(-(x @ w + b)))
