"""Bounded-variable revised simplex on dense arrays (minimization).

Two-phase method: artificial variables absorb any residual infeasibility
of the slack start, phase 1 drives their sum to zero, phase 2 optimizes
the real objective.  The basis inverse is kept explicitly and updated in
product form each pivot; a dense LU refactorization refreshes it every
``REFACTOR_EVERY`` pivots.  Pricing is Dantzig with Bland's rule engaged
permanently after ``BLAND_AFTER`` degenerate pivots, which guarantees
termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

REFACTOR_EVERY = 50
BLAND_AFTER = 1000

_DUAL_TOL = 1e-9
_PIVOT_TOL = 1e-10
_FEAS_TOL = 1e-7
_DEGEN_TOL = 1e-12

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_ITERATION_LIMIT = "iteration_limit"


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray  # structural variable values
    objective: float  # c . x for the minimized objective
    duals: np.ndarray  # one multiplier per row
    iterations: int
    iterates: list[tuple[int, float]] | None = None  # debug: (iteration, objective)
    basis: np.ndarray | None = None


def _slack_bounds(sense: str) -> tuple[float, float]:
    if sense == "<=":
        return 0.0, np.inf
    if sense == ">=":
        return -np.inf, 0.0
    if sense == "=":
        return 0.0, 0.0
    raise ValueError(f"bad row sense {sense!r}")


def _start_values(lb: np.ndarray, ub: np.ndarray, which: str) -> np.ndarray:
    lo_fin = np.isfinite(lb)
    hi_fin = np.isfinite(ub)
    if which == "low":
        x = np.where(lo_fin, lb, np.where(hi_fin, ub, 0.0))
    else:
        x = np.where(hi_fin, ub, np.where(lo_fin, lb, 0.0))
    return x


class _Workspace:
    """Mutable solver state over the extended (structural+slack+artificial) system."""

    def __init__(self, c, a, senses, b, lb, ub, start_hint=None):
        m, n = a.shape
        self.m, self.n = m, n
        sl_lo = np.empty(m)
        sl_hi = np.empty(m)
        for r, s in enumerate(senses):
            sl_lo[r], sl_hi[r] = _slack_bounds(s)

        # start from the hint (snapped to bounds) when one is given, else
        # pick the all-low/all-high start with less row violation
        candidates = []
        if start_hint is not None:
            hint = np.clip(np.asarray(start_hint, dtype=float), lb, ub)
            hint = np.where(np.isfinite(hint), hint, 0.0)
            snapped = np.where(hint - lb <= ub - hint, lb, ub)
            snapped = np.where(np.isfinite(snapped), snapped, 0.0)
            candidates.append(snapped)
        candidates.append(_start_values(lb, ub, "low"))
        candidates.append(_start_values(lb, ub, "high"))
        best = None
        for xs in candidates:
            resid = b - a @ xs
            viol = np.maximum(resid - sl_hi, 0.0) + np.maximum(sl_lo - resid, 0.0)
            total = float(viol.sum())
            if best is None or total < best[0] - 1e-12:
                best = (total, xs, resid)
        _, x_struct, resid = best

        slack_vals = np.clip(resid, sl_lo, sl_hi)
        art_resid = resid - slack_vals
        art_rows = np.nonzero(np.abs(art_resid) > _FEAS_TOL)[0]
        k = len(art_rows)

        total = n + m + k
        self.A = np.zeros((m, total))
        self.A[:, :n] = a
        self.A[:, n : n + m] = np.eye(m)
        self.lb = np.concatenate([lb, sl_lo, np.zeros(k)])
        self.ub = np.concatenate([ub, sl_hi, np.full(k, np.inf)])
        self.x = np.concatenate([x_struct, slack_vals, np.abs(art_resid[art_rows])])
        self.basis = np.arange(n, n + m)
        for t, r in enumerate(art_rows):
            col = n + m + t
            self.A[r, col] = 1.0 if art_resid[r] > 0 else -1.0
            self.basis[r] = col
        self.artificial = np.arange(n + m, total)
        self.b = b
        self.binv = np.eye(m)
        self.is_basic = np.zeros(total, dtype=bool)
        self.is_basic[self.basis] = True
        self.pivots = 0
        self.degenerate = 0
        self.iterations = 0
        if k and m:
            self.refactorize()  # artificial columns carry -1 coefficients

    def refactorize(self) -> None:
        bmat = self.A[:, self.basis]
        lu, piv = lu_factor(bmat)
        self.binv = lu_solve((lu, piv), np.eye(self.m))
        nonbasic = ~self.is_basic
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs

    def duals(self, c: np.ndarray) -> np.ndarray:
        return c[self.basis] @ self.binv

    def minimize(self, c, max_iters, collect=None):
        """Run simplex iterations on objective c.  Returns a status string."""
        use_bland = self.degenerate >= BLAND_AFTER
        while self.iterations < max_iters:
            self.iterations += 1
            y = self.duals(c)
            d = c - y @ self.A
            at_lb = np.abs(self.x - self.lb) <= 1e-9
            at_ub = np.abs(self.x - self.ub) <= 1e-9
            movable = ~self.is_basic & (self.ub - self.lb > _PIVOT_TOL)
            free = movable & ~at_lb & ~at_ub
            up = movable & (at_lb | free) & (d < -_DUAL_TOL)
            down = movable & ((at_ub & ~at_lb) | free) & (d > _DUAL_TOL)
            viol = np.where(up, -d, 0.0) + np.where(down, d, 0.0)
            if collect is not None:
                collect.append((self.iterations - 1, float(c @ self.x)))
            if not viol.any():
                return STATUS_OPTIMAL
            if use_bland:
                j = int(np.nonzero(viol > 0)[0][0])
            else:
                j = int(np.argmax(viol))
            sigma = 1.0 if up[j] else -1.0

            w = self.binv @ self.A[:, j]
            dxb = -sigma * w
            xb = self.x[self.basis]
            lb_b = self.lb[self.basis]
            ub_b = self.ub[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = dxb < -_PIVOT_TOL
            inc = dxb > _PIVOT_TOL
            with np.errstate(invalid="ignore"):
                ratios[dec] = (xb[dec] - lb_b[dec]) / (-dxb[dec])
                ratios[inc] = (ub_b[inc] - xb[inc]) / dxb[inc]
            ratios[~np.isfinite(lb_b) & dec] = np.inf
            ratios[~np.isfinite(ub_b) & inc] = np.inf
            np.maximum(ratios, 0.0, out=ratios)

            if sigma > 0:
                t_flip = self.ub[j] - self.x[j]
            else:
                t_flip = self.x[j] - self.lb[j]
            t_basic = float(ratios.min()) if self.m else np.inf
            t_star = min(t_flip, t_basic)
            if not np.isfinite(t_star):
                return STATUS_UNBOUNDED

            if t_star <= _DEGEN_TOL:
                self.degenerate += 1
                if self.degenerate >= BLAND_AFTER:
                    use_bland = True

            if t_flip <= t_basic + _DEGEN_TOL:
                # bound flip: the entering variable crosses to its other bound
                self.x[j] = self.ub[j] if sigma > 0 else self.lb[j]
                self.x[self.basis] += t_flip * dxb
                continue

            cand = np.nonzero(ratios <= t_star + _DEGEN_TOL)[0]
            p = int(cand[np.argmax(np.abs(dxb[cand]))])
            leaving = self.basis[p]
            self.x[j] += sigma * t_star
            self.x[self.basis] += t_star * dxb
            self.x[leaving] = lb_b[p] if dxb[p] < 0 else ub_b[p]
            self.basis[p] = j
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            wp = w[p]
            self.binv[p, :] /= wp
            mask = np.arange(self.m) != p
            self.binv[mask, :] -= np.outer(w[mask], self.binv[p, :])
            self.pivots += 1
            if self.pivots % REFACTOR_EVERY == 0:
                self.refactorize()
        return STATUS_ITERATION_LIMIT


def solve_bounded_lp(
    c: np.ndarray,
    a: np.ndarray,
    senses: list[str],
    b: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    max_iters: int = 20000,
    debug: bool = False,
    start_hint: np.ndarray | None = None,
) -> SimplexResult:
    """Minimize c.x subject to rows (a, senses, b) and bounds lb <= x <= ub.

    ``start_hint`` seeds the nonbasic start near a known good point (each
    variable snaps to its closer bound); correctness never depends on it.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = a.shape

    if np.any(lb > ub):
        return SimplexResult(STATUS_INFEASIBLE, np.full(n, np.nan), np.nan, np.zeros(m), 0)

    ws = _Workspace(c, a, senses, b, lb, ub, start_hint=start_hint)
    c_full = np.zeros(ws.A.shape[1])

    if len(ws.artificial):
        c_full[ws.artificial] = 1.0
        status = ws.minimize(c_full, max_iters)
        if status == STATUS_ITERATION_LIMIT:
            return SimplexResult(
                status, ws.x[:n].copy(), float(c @ ws.x[:n]), ws.duals(c_full), ws.iterations
            )
        phase1 = float(ws.x[ws.artificial].sum())
        if phase1 > _FEAS_TOL:
            return SimplexResult(
                STATUS_INFEASIBLE, ws.x[:n].copy(), np.nan, np.zeros(m), ws.iterations
            )
        # pin artificials so they can never re-enter
        ws.lb[ws.artificial] = 0.0
        ws.ub[ws.artificial] = 0.0
        c_full[ws.artificial] = 0.0

    c_full[:n] = c
    iterates: list[tuple[int, float]] | None = [] if debug else None
    status = ws.minimize(c_full, max_iters, collect=iterates)
    duals = ws.duals(c_full)
    x = ws.x[:n].copy()
    return SimplexResult(
        status=status,
        x=x,
        objective=float(c @ x),
        duals=duals,
        iterations=ws.iterations,
        iterates=iterates,
        basis=ws.basis.copy(),
    )
