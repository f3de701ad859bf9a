"""LP-based branch and bound for binary MILP, plus exact test oracles.

The solver accepts injected cuts, an objective cutoff, and node/time
limits.  Branching is most-fractional with ties broken toward the lowest
index; node selection is best-bound by default with a depth-first
option.  A rounding heuristic runs at every node so the incumbent log is
dense enough for time-to-target measurements.

A single solve is single-threaded; concurrent solves on distinct
instances are safe.  Incumbent timestamps come from a monotonic clock.
"""

from __future__ import annotations

import csv
import heapq
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _simplex
from .model import (
    FEASIBILITY_TOL,
    INTEGRALITY_TOL,
    LinearCut,
    MipInstance,
    Solution,
)


class TooManyBinariesError(ValueError):
    """brute_force refuses instances beyond its enumeration cap."""


@dataclass
class SolveOptions:
    time_limit: float = math.inf  # seconds
    node_limit: int = 10**9
    rel_gap: float = 1e-6
    abs_gap: float = 1e-9
    cutoff: float | None = None  # in the instance's own sense
    node_order: str = "best_bound"  # best_bound | depth_first
    branch_rule: str = "most_fractional"
    seed: int = 0
    trace_path: str | Path | None = None

    def validate(self) -> None:
        if self.time_limit <= 0 or self.node_limit <= 0:
            raise ValueError("limits must be positive")
        if self.rel_gap < 0 or self.abs_gap < 0:
            raise ValueError("gaps must be non-negative")
        if self.node_order not in ("best_bound", "depth_first"):
            raise ValueError(f"bad node_order {self.node_order!r}")
        if self.branch_rule != "most_fractional":
            raise ValueError(f"bad branch_rule {self.branch_rule!r}")


@dataclass
class SolveReport:
    best_solution: Solution | None
    best_bound: float
    status: str  # optimal | feasible | infeasible | cutoff | limit
    nodes: int
    wall_time: float
    incumbent_log: list[tuple[float, float]] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.best_solution.objective if self.best_solution else math.nan


class _Tree:
    """Open-node container honouring the configured node order."""

    def __init__(self, order: str):
        self.order = order
        self.heap: list = []
        self.stack: list = []

    def push(self, bound: float, depth: int, node_id: int, payload) -> None:
        if self.order == "best_bound":
            heapq.heappush(self.heap, (bound, node_id, depth, payload))
        else:
            self.stack.append((bound, node_id, depth, payload))

    def pop(self):
        if self.order == "best_bound":
            bound, node_id, depth, payload = heapq.heappop(self.heap)
        else:
            bound, node_id, depth, payload = self.stack.pop()
        return bound, node_id, depth, payload

    def __len__(self) -> int:
        return len(self.heap) + len(self.stack)

    def min_bound(self) -> float:
        if self.order == "best_bound":
            return self.heap[0][0] if self.heap else math.inf
        return min((e[0] for e in self.stack), default=math.inf)


def solve_mip(
    instance: MipInstance,
    extra_cuts: list[LinearCut] = (),
    options: SolveOptions | None = None,
) -> SolveReport:
    """Branch-and-bound solve of instance plus cuts, honouring options.

    The report is in the instance's own sense.  Limits are statuses:
    hitting the node or time limit yields status "limit" with the best
    incumbent attached when one exists.
    """
    opts = options or SolveOptions()
    opts.validate()
    t0 = time.monotonic()
    n_bin = instance.num_binary

    from .lp import relaxation_arrays  # local import to avoid a cycle

    c_user, a, senses, b, lb0, ub0 = relaxation_arrays(instance, list(extra_cuts))
    negate = instance.sense == "maximize"
    c = -c_user if negate else c_user
    n_rows_inst = len(instance.rows)

    cutoff = None
    if opts.cutoff is not None:
        cutoff = -opts.cutoff if negate else opts.cutoff

    incumbent_val = math.inf
    incumbent_x: np.ndarray | None = None
    incumbent_log: list[tuple[float, float]] = []
    nodes = 0
    next_id = 0
    limit_hit = False

    trace_rows: list[tuple] = []

    def trace(node_id, depth, bound, action):
        # bounds and incumbents are recorded in the internal minimize sense
        if opts.trace_path is not None:
            inc = "" if incumbent_x is None else incumbent_val
            trace_rows.append((node_id, depth, bound, action, inc))

    def gap_term() -> float:
        if incumbent_x is None:
            return 0.0
        return max(opts.abs_gap, opts.rel_gap * abs(incumbent_val))

    def should_prune(bound: float) -> str | None:
        if incumbent_x is not None and bound >= incumbent_val - gap_term():
            return "pruned_bound"
        if cutoff is not None and bound >= cutoff - opts.abs_gap:
            return "pruned_cutoff"
        return None

    def accept(x: np.ndarray, val: float) -> bool:
        nonlocal incumbent_val, incumbent_x
        if val >= incumbent_val:
            return False
        if cutoff is not None and val > cutoff - opts.abs_gap:
            return False
        incumbent_val = val
        incumbent_x = x.copy()
        user_obj = (-val if negate else val) + 0.0
        incumbent_log.append((time.monotonic() - t0, user_obj))
        return True

    sense_le = np.array([s == "<=" for s in senses])
    sense_ge = np.array([s == ">=" for s in senses])
    sense_eq = np.array([s == "=" for s in senses])

    def row_violation(x: np.ndarray) -> float:
        lhs = a @ x
        worst = 0.0
        if sense_le.any():
            worst = max(worst, float(np.max(lhs[sense_le] - b[sense_le])))
        if sense_ge.any():
            worst = max(worst, float(np.max(b[sense_ge] - lhs[sense_ge])))
        if sense_eq.any():
            worst = max(worst, float(np.max(np.abs(lhs[sense_eq] - b[sense_eq]))))
        return worst

    # Pure single-row knapsacks admit a closed-form node relaxation: take
    # free items by best ratio until the residual capacity binds.  This is
    # the same LP optimum the simplex would return, orders of magnitude
    # faster on the large validator instances.
    knapsack_mode = (
        not extra_cuts
        and instance.num_continuous == 0
        and len(senses) == 1
        and senses[0] == "<="
        and np.all(a[0] > 0)
    )
    if knapsack_mode:
        kn_w = a[0]
        kn_order = np.argsort(c / kn_w, kind="stable")

    def knapsack_relaxation(lb: np.ndarray, ub: np.ndarray):
        """Returns (status, x, bound) for the node's knapsack LP."""
        x = lb.copy()
        cap = b[0] - float(kn_w @ x)
        if cap < -FEASIBILITY_TOL:
            return _simplex.STATUS_INFEASIBLE, None, math.inf
        for j in kn_order:
            if c[j] >= 0:
                break  # remaining items cannot improve the objective
            if lb[j] == ub[j]:
                continue
            w = kn_w[j]
            if w <= cap:
                x[j] = 1.0
                cap -= w
            else:
                x[j] = cap / w
                break
        return _simplex.STATUS_OPTIMAL, x, float(c @ x)

    tree = _Tree(opts.node_order)
    tree.push(-math.inf, 0, next_id, (lb0.copy(), ub0.copy(), None))
    next_id += 1

    while len(tree):
        if nodes >= opts.node_limit or time.monotonic() - t0 > opts.time_limit:
            limit_hit = True
            break
        parent_bound, node_id, depth, (lb, ub, hint) = tree.pop()
        reason = should_prune(parent_bound)
        if reason:
            trace(node_id, depth, parent_bound, reason)
            continue

        nodes += 1
        if knapsack_mode:
            lp_status, x, bound = knapsack_relaxation(lb, ub)
        else:
            res = _simplex.solve_bounded_lp(c, a, senses, b, lb, ub, start_hint=hint)
            lp_status, x, bound = res.status, res.x, res.objective
        if lp_status == _simplex.STATUS_INFEASIBLE:
            trace(node_id, depth, math.inf, "pruned_infeasible")
            continue
        if lp_status == _simplex.STATUS_UNBOUNDED:
            raise RuntimeError("LP relaxation is unbounded; MILP statuses cannot express this")
        if lp_status == _simplex.STATUS_ITERATION_LIMIT:
            limit_hit = True
            trace(node_id, depth, math.nan, "lp_iteration_limit")
            break
        reason = should_prune(bound)
        if reason:
            trace(node_id, depth, bound, reason)
            continue
        frac = np.abs(x[:n_bin] - np.round(x[:n_bin]))
        if n_bin and frac.max() <= INTEGRALITY_TOL:
            xi = x.copy()
            xi[:n_bin] = np.round(xi[:n_bin])
            accept(xi, float(c @ xi))
            trace(node_id, depth, bound, "integral")
            continue
        if n_bin == 0:
            accept(x, bound)
            trace(node_id, depth, bound, "integral")
            continue

        # rounding heuristic: nearest / floor / ceil of the relaxation,
        # kept whenever the rounded point stays feasible
        for rounder in (np.round, np.floor, np.ceil):
            xr = x.copy()
            xr[:n_bin] = np.clip(rounder(x[:n_bin]), lb[:n_bin], ub[:n_bin])
            if row_violation(xr) <= FEASIBILITY_TOL:
                accept(xr, float(c @ xr))

        j = int(np.argmax(frac))  # ties resolve to the lowest index
        trace(node_id, depth, bound, f"branched_v{j}")
        up_first = x[j] >= 0.5
        children = []
        lb_up = lb.copy()
        lb_up[j] = 1.0
        children.append((lb_up, ub, x))
        ub_dn = ub.copy()
        ub_dn[j] = 0.0
        children.append((lb, ub_dn, x))
        if not up_first:
            children.reverse()
        # depth-first pops from the end, so push the preferred child last
        ordered = children if opts.node_order == "best_bound" else children[::-1]
        for child in ordered:
            tree.push(bound, depth + 1, next_id, child)
            next_id += 1

    wall = time.monotonic() - t0
    open_bound = tree.min_bound()

    if limit_hit:
        status = "limit"
        best_bound_int = min(open_bound, incumbent_val)
    elif incumbent_x is not None:
        status = "optimal"
        best_bound_int = incumbent_val
    elif cutoff is not None:
        status = "cutoff"
        best_bound_int = cutoff
    else:
        status = "infeasible"
        best_bound_int = math.inf

    if opts.trace_path is not None:
        with open(opts.trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node", "depth", "bound", "action", "incumbent"])
            writer.writerows(trace_rows)

    best_solution = None
    if incumbent_x is not None:
        user_obj = (-incumbent_val if negate else incumbent_val) + 0.0
        best_solution = Solution(
            values=incumbent_x,
            objective=user_obj,
            status="optimal" if status == "optimal" else "feasible",
        )
    best_bound = -best_bound_int if negate else best_bound_int
    return SolveReport(
        best_solution=best_solution,
        best_bound=best_bound,
        status=status,
        nodes=nodes,
        wall_time=wall,
        incumbent_log=incumbent_log,
    )


def brute_force(
    instance: MipInstance,
    extra_cuts: list[LinearCut] = (),
    max_binary: int = 24,
) -> Solution:
    """Exact optimum by exhaustive enumeration over binary assignments.

    Pure-binary instances are enumerated in vectorized chunks; mixed
    instances solve the LP over the continuous variables for every
    binary assignment.  Refuses more than ``max_binary`` binaries.
    """
    n = instance.num_binary
    d = instance.num_continuous
    if n > max_binary:
        raise TooManyBinariesError(f"{n} binaries exceed the cap of {max_binary}")

    from .lp import relaxation_arrays

    c, a, senses, b, lb, ub = relaxation_arrays(instance, list(extra_cuts))
    negate = instance.sense == "maximize"

    if d == 0:
        best_val = -math.inf if negate else math.inf
        best_x = None
        total = 1 << n
        chunk = min(total, 1 << 16)
        le = np.array([s == "<=" for s in senses])
        ge = np.array([s == ">=" for s in senses])
        eq = np.array([s == "=" for s in senses])
        shifts = np.arange(n, dtype=np.uint64)
        for lo in range(0, total, chunk):
            codes = np.arange(lo, min(lo + chunk, total), dtype=np.uint64)
            ys = ((codes[:, None] >> shifts) & np.uint64(1)).astype(float)
            lhs = ys @ a.T
            ok = np.ones(len(codes), dtype=bool)
            if le.any():
                ok &= np.all(lhs[:, le] <= b[le] + FEASIBILITY_TOL, axis=1)
            if ge.any():
                ok &= np.all(lhs[:, ge] >= b[ge] - FEASIBILITY_TOL, axis=1)
            if eq.any():
                ok &= np.all(np.abs(lhs[:, eq] - b[eq]) <= FEASIBILITY_TOL, axis=1)
            if not ok.any():
                continue
            vals = ys[ok] @ c
            if negate:
                k = int(np.argmax(vals))
                if vals[k] > best_val:
                    best_val, best_x = float(vals[k]), ys[ok][k]
            else:
                k = int(np.argmin(vals))
                if vals[k] < best_val:
                    best_val, best_x = float(vals[k]), ys[ok][k]
        if best_x is None:
            return Solution(values=np.zeros(0), objective=math.nan, status="infeasible")
        return Solution(values=best_x, objective=best_val, status="optimal")

    # mixed case: one continuous LP per binary assignment
    c_min = -c if negate else c
    best_val = math.inf
    best_x = None
    for code in range(1 << n):
        ybin = np.array([(code >> j) & 1 for j in range(n)], dtype=float)
        lb_f = lb.copy()
        ub_f = ub.copy()
        lb_f[:n] = ybin
        ub_f[:n] = ybin
        res = _simplex.solve_bounded_lp(c_min, a, senses, b, lb_f, ub_f)
        if res.status != _simplex.STATUS_OPTIMAL:
            continue
        if res.objective < best_val:
            best_val = res.objective
            best_x = res.x.copy()
            best_x[:n] = ybin
    if best_x is None:
        return Solution(values=np.zeros(0), objective=math.nan, status="infeasible")
    obj = -best_val if negate else best_val
    return Solution(values=best_x, objective=obj, status="optimal")


def dp_knapsack(
    weights, values, capacity: int, max_cells: int = 50_000_000
) -> tuple[int, list[int]]:
    """Exact 0/1 knapsack over integer data by dynamic programming.

    Returns (optimal value, selected item indices).  The table has
    n * (capacity + 1) cells; anything beyond ``max_cells`` raises a
    capacity overflow error.
    """
    w = [int(v) for v in weights]
    c = [int(v) for v in values]
    if any(int(x) != float(x) for x in list(weights) + list(values)):
        raise ValueError("dp_knapsack needs integer weights and values")
    if len(w) != len(c):
        raise ValueError("weights and values must have equal length")
    if any(v < 0 for v in w) or capacity < 0:
        raise ValueError("weights and capacity must be non-negative")
    n = len(w)
    if n * (capacity + 1) > max_cells:
        raise OverflowError("capacity overflow: DP table exceeds the memory cap")
    dp = np.zeros(capacity + 1, dtype=np.int64)
    take = np.zeros((n, capacity + 1), dtype=bool)
    for i in range(n):
        if w[i] > capacity:
            continue
        cand = dp[: capacity + 1 - w[i]] + c[i]
        improved = cand > dp[w[i] :]
        take[i, w[i] :] = improved
        dp[w[i] :] = np.where(improved, cand, dp[w[i] :])
    chosen = []
    cap = capacity
    for i in range(n - 1, -1, -1):
        if cap >= w[i] and take[i, cap]:
            chosen.append(i)
            cap -= w[i]
    chosen.reverse()
    return int(dp[capacity]), chosen
