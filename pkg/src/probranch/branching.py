"""Probabilistic cardinality branching: calibration, hyperplanes and the
four-region solve.

From per-variable probabilities we round a confident-up set U (p >= tau)
and a confident-down set L (p <= 1 - tau), pool their risk into two
cardinality hyperplanes

    sum_{j in U} y_j >= zeta_1      sum_{j in L} y_j <= zeta_2

whose intercepts carry a Chebyshev-style slack sigma|S|/sqrt(delta), and
partition the feasible region by the two cuts and their integer
complements.  Solving the cut region first and pruning the other three
against its objective preserves exactness while concentrating the work
where the optimum is likely to live.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bnb import SolveOptions, SolveReport, solve_mip
from .model import FORMAT_VERSION, LinearCut, MipInstance
from .predict import Prediction

# Threshold grid used for calibration curves; thresholds must exceed 0.5
# so the rounded-up and rounded-down sets cannot overlap.
DEFAULT_TAU_GRID = np.round(np.arange(51, 101) / 100.0, 2)

_ROUND_EPS = 1e-9  # absorbs float noise before the conservative rounding


class NoFeasibleThresholdError(ValueError):
    """No grid threshold dominates both mean accuracy curves."""


def round_prediction(
    p: Prediction | np.ndarray, tau: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split variable indices into (up, down, unrounded) sets at threshold tau.

    up = {j : p_j >= tau} (inclusive), down = {j : p_j <= 1 - tau}; the
    remaining indices stay unrounded.  Requires tau in (0.5, 1].
    """
    if not 0.5 < tau <= 1.0:
        raise ValueError(f"tau must be in (0.5, 1], got {tau}")
    probs = p.probabilities if isinstance(p, Prediction) else np.asarray(p, dtype=float)
    up = np.nonzero(probs >= tau)[0]
    down = np.nonzero(probs <= 1.0 - tau)[0]
    rest = np.nonzero((probs < tau) & (probs > 1.0 - tau))[0]
    return up, down, rest


@dataclass
class AccuracyStats:
    """Mean/variance of the rounded-set accuracies along the threshold grid.

    Instances whose set is empty at a grid point are skipped on that side
    (the num_valid arrays keep the bookkeeping); grid points with no valid
    instance report NaN means and variances.
    """

    tau_grid: np.ndarray
    mean_alpha_l: np.ndarray
    var_alpha_l: np.ndarray
    mean_alpha_u: np.ndarray
    var_alpha_u: np.ndarray
    mean_size_l: np.ndarray
    mean_size_u: np.ndarray
    num_valid_l: np.ndarray
    num_valid_u: np.ndarray

    def validate(self) -> None:
        g = self.tau_grid
        if np.any(np.diff(g) <= 0):
            raise ValueError("tau grid must be strictly increasing")
        if np.any(g <= 0.5) or np.any(g > 1.0):
            raise ValueError("tau grid must lie in (0.5, 1]")
        for arr in (self.var_alpha_l, self.var_alpha_u):
            if np.any(arr[~np.isnan(arr)] < 0):
                raise ValueError("variances must be non-negative")
        for arr in (self.mean_size_l, self.mean_size_u):
            if np.any(np.diff(arr) > 1e-9):
                raise ValueError("mean set sizes must be non-increasing in tau")

    def index_of(self, tau: float) -> int:
        hits = np.nonzero(np.isclose(self.tau_grid, tau, rtol=0, atol=1e-12))[0]
        if not len(hits):
            raise ValueError(f"tau={tau} is not a grid point")
        return int(hits[0])


def accuracy_curves(
    pairs: list[tuple[Prediction | np.ndarray, np.ndarray]],
    tau_grid: np.ndarray | None = None,
) -> AccuracyStats:
    """Per-threshold accuracy statistics over (prediction, true solution) pairs.

    For each instance and threshold, the up-accuracy is the fraction of the
    rounded-up set whose true value is 1 (and symmetrically for the
    rounded-down set); means and population variances are taken over the
    instances where the respective set is non-empty.
    """
    if len(pairs) < 2:
        raise ValueError("need at least two (prediction, solution) pairs")
    grid = DEFAULT_TAU_GRID if tau_grid is None else np.asarray(tau_grid, dtype=float)
    probs = []
    truths = []
    for p, y in pairs:
        pv = p.probabilities if isinstance(p, Prediction) else np.asarray(p, dtype=float)
        yv = np.round(np.asarray(y, dtype=float))
        if pv.shape != yv.shape:
            raise ValueError("prediction and solution lengths differ")
        if probs and pv.shape != probs[0].shape:
            raise ValueError("inconsistent lengths across pairs")
        probs.append(pv)
        truths.append(yv)

    k = len(grid)
    stats = {
        name: np.full(k, np.nan)
        for name in ("mean_alpha_l", "var_alpha_l", "mean_alpha_u", "var_alpha_u")
    }
    mean_size_l = np.zeros(k)
    mean_size_u = np.zeros(k)
    num_valid_l = np.zeros(k, dtype=int)
    num_valid_u = np.zeros(k, dtype=int)

    for i, tau in enumerate(grid):
        al, au, sl, su = [], [], [], []
        for pv, yv in zip(probs, truths):
            up, down, _ = round_prediction(pv, float(tau))
            sl.append(len(down))
            su.append(len(up))
            if len(down):
                al.append(float(np.mean(yv[down] == 0)))
            if len(up):
                au.append(float(np.mean(yv[up] == 1)))
        mean_size_l[i] = np.mean(sl)
        mean_size_u[i] = np.mean(su)
        num_valid_l[i] = len(al)
        num_valid_u[i] = len(au)
        if al:
            stats["mean_alpha_l"][i] = np.mean(al)
            stats["var_alpha_l"][i] = np.var(al)
        if au:
            stats["mean_alpha_u"][i] = np.mean(au)
            stats["var_alpha_u"][i] = np.var(au)

    out = AccuracyStats(
        tau_grid=grid,
        mean_size_l=mean_size_l,
        mean_size_u=mean_size_u,
        num_valid_l=num_valid_l,
        num_valid_u=num_valid_u,
        **stats,
    )
    out.validate()
    return out


def select_tau(stats: AccuracyStats) -> float:
    """Largest grid threshold dominated by both mean accuracy curves.

    Scans the grid from the top and returns the first tau with
    mean up/down accuracies >= tau and at least one valid instance on
    each side; raises NoFeasibleThresholdError when nothing qualifies.
    """
    for i in range(len(stats.tau_grid) - 1, -1, -1):
        tau = float(stats.tau_grid[i])
        if not (stats.num_valid_l[i] and stats.num_valid_u[i]):
            continue
        if stats.mean_alpha_l[i] >= tau and stats.mean_alpha_u[i] >= tau:
            return tau
    raise NoFeasibleThresholdError("no grid threshold dominates both accuracy curves")


def sigma_from_stats(stats: AccuracyStats, tau: float) -> float:
    """Variance-bound sigma at tau: sqrt of the larger accuracy variance."""
    i = stats.index_of(tau)
    cands = []
    if stats.num_valid_l[i]:
        cands.append(stats.var_alpha_l[i])
    if stats.num_valid_u[i]:
        cands.append(stats.var_alpha_u[i])
    if not cands:
        raise ValueError(f"no valid instances at tau={tau}")
    return float(math.sqrt(max(cands)))


@dataclass
class Calibration:
    """Threshold, variance bound and confidence driving the hyperplanes."""

    tau_star: float
    sigma: float
    delta: float
    stats: AccuracyStats | None = None

    def validate(self) -> None:
        if not 0.5 < self.tau_star <= 1.0:
            raise ValueError("tau_star must be in (0.5, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if self.stats is not None:
            i = self.stats.index_of(self.tau_star)
            worst = max(
                (v for v, nv in (
                    (self.stats.var_alpha_l[i], self.stats.num_valid_l[i]),
                    (self.stats.var_alpha_u[i], self.stats.num_valid_u[i]),
                ) if nv),
                default=0.0,
            )
            if self.sigma**2 < worst - 1e-12:
                raise ValueError("sigma^2 is below the accuracy variance at tau_star")


def calibrate(
    pairs: list[tuple[Prediction | np.ndarray, np.ndarray]],
    delta: float = 0.05,
    tau_grid: np.ndarray | None = None,
) -> Calibration:
    """Pick tau* from accuracy curves and bound sigma by the variance there."""
    stats = accuracy_curves(pairs, tau_grid)
    tau = select_tau(stats)
    sigma = sigma_from_stats(stats, tau)
    cal = Calibration(tau_star=tau, sigma=sigma, delta=delta, stats=stats)
    cal.validate()
    return cal


def data_free_calibration(
    tau: float = 0.9, delta: float = 1e-8, slack_fraction: float = 0.0
) -> Calibration:
    """Calibration for LP-root predictions, where no variance is measurable.

    The Chebyshev margin sigma|S|/sqrt(delta) is replaced by a plain
    slack_fraction * |S| (default 0: the tightened intercepts carry the
    slack on their own).
    """
    return Calibration(
        tau_star=tau, sigma=slack_fraction * math.sqrt(delta), delta=delta, stats=None
    )


def _stats_to_doc(stats: AccuracyStats) -> dict:
    def col(arr):
        return [None if (isinstance(v, float) and math.isnan(v)) else float(v) for v in arr]

    return {
        "tau_grid": [float(v) for v in stats.tau_grid],
        "mean_alpha_l": col(stats.mean_alpha_l),
        "var_alpha_l": col(stats.var_alpha_l),
        "mean_alpha_u": col(stats.mean_alpha_u),
        "var_alpha_u": col(stats.var_alpha_u),
        "mean_size_l": [float(v) for v in stats.mean_size_l],
        "mean_size_u": [float(v) for v in stats.mean_size_u],
        "num_valid_l": [int(v) for v in stats.num_valid_l],
        "num_valid_u": [int(v) for v in stats.num_valid_u],
    }


def _stats_from_doc(doc: dict) -> AccuracyStats:
    def col(vals):
        return np.array([np.nan if v is None else float(v) for v in vals])

    return AccuracyStats(
        tau_grid=np.array([float(v) for v in doc["tau_grid"]]),
        mean_alpha_l=col(doc["mean_alpha_l"]),
        var_alpha_l=col(doc["var_alpha_l"]),
        mean_alpha_u=col(doc["mean_alpha_u"]),
        var_alpha_u=col(doc["var_alpha_u"]),
        mean_size_l=np.asarray(doc["mean_size_l"], dtype=float),
        mean_size_u=np.asarray(doc["mean_size_u"], dtype=float),
        num_valid_l=np.asarray(doc["num_valid_l"], dtype=int),
        num_valid_u=np.asarray(doc["num_valid_u"], dtype=int),
    )


def save_calibration(cal: Calibration, path: str | Path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "tau_star": cal.tau_star,
        "sigma": cal.sigma,
        "delta": cal.delta,
        "stats": None if cal.stats is None else _stats_to_doc(cal.stats),
    }
    Path(path).write_text(json.dumps(doc))


def load_calibration(path: str | Path) -> Calibration:
    doc = json.loads(Path(path).read_text())
    cal = Calibration(
        tau_star=float(doc["tau_star"]),
        sigma=float(doc["sigma"]),
        delta=float(doc["delta"]),
        stats=None if doc.get("stats") is None else _stats_from_doc(doc["stats"]),
    )
    cal.validate()
    return cal


@dataclass
class CardinalityHyperplane:
    """sum_{j in indices} y_j >=/<= rhs_int, rounded conservatively from zeta."""

    indices: np.ndarray
    sense: str  # ">=" or "<="
    zeta: float
    rhs_int: int

    def to_cut(self, label: str = "") -> LinearCut:
        return LinearCut(
            coeffs=[(int(j), 1.0) for j in self.indices],
            sense=self.sense,
            rhs=float(self.rhs_int),
            label=label or f"card{self.sense}{self.rhs_int}",
        )


def _make_hyperplane(indices: np.ndarray, sense: str, zeta: float) -> CardinalityHyperplane:
    if sense == ">=":
        rhs = math.floor(zeta + _ROUND_EPS)
    else:
        rhs = math.ceil(zeta - _ROUND_EPS)
    rhs = min(max(rhs, 0), len(indices))
    return CardinalityHyperplane(indices=indices, sense=sense, zeta=zeta, rhs_int=rhs)


def build_hyperplanes(
    p: Prediction | np.ndarray,
    tau: float,
    sigma: float,
    delta: float,
    mode: str = "plain",
) -> tuple[CardinalityHyperplane | None, CardinalityHyperplane | None]:
    """The two cardinality cuts induced by rounding p at threshold tau.

    plain mode uses the guaranteed mass tau|U| (resp. (1-tau)|L|);
    tightened mode replaces it with the actual probability mass over the
    set.  Both subtract/add the Chebyshev margin sigma|S|/sqrt(delta).
    Hyperplane intercepts round conservatively (floor for >=, ceil for <=)
    so the integer cut relaxes the real one.  A side with an empty set
    yields None.
    """
    if mode not in ("plain", "tightened"):
        raise ValueError(f"bad mode {mode!r}")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    probs = p.probabilities if isinstance(p, Prediction) else np.asarray(p, dtype=float)
    up, down, _ = round_prediction(probs, tau)
    cut_up = None
    cut_down = None
    if len(up):
        base = probs[up].sum() if mode == "tightened" else tau * len(up)
        zeta1 = base - sigma * len(up) / math.sqrt(delta)
        cut_up = _make_hyperplane(up, ">=", zeta1)
    if len(down):
        base = probs[down].sum() if mode == "tightened" else (1.0 - tau) * len(down)
        zeta2 = base + sigma * len(down) / math.sqrt(delta)
        cut_down = _make_hyperplane(down, "<=", zeta2)
    return cut_up, cut_down


@dataclass
class PartitionRegion:
    label: str
    cuts: list[LinearCut]
    infeasible_by_construction: bool = False


@dataclass
class BranchPartition:
    """Disjoint regions covering all 0/1 assignments of the cut variables."""

    regions: list[PartitionRegion]

    @property
    def first(self) -> PartitionRegion:
        return self.regions[0]

    def satisfied_regions(self, assignment: np.ndarray) -> list[int]:
        """Indices of regions whose cut-set the 0/1 assignment satisfies."""
        hits = []
        for i, region in enumerate(self.regions):
            ok = True
            for cut in region.cuts:
                lhs = sum(v * assignment[j] for j, v in cut.coeffs)
                if cut.sense == ">=" and lhs < cut.rhs - 1e-9:
                    ok = False
                elif cut.sense == "<=" and lhs > cut.rhs + 1e-9:
                    ok = False
            if ok:
                hits.append(i)
        return hits


def _complement(h: CardinalityHyperplane) -> tuple[LinearCut, bool]:
    """Integer complement of a cardinality cut, with a trivially-empty flag."""
    if h.sense == ">=":
        rhs = h.rhs_int - 1
        cut = LinearCut(
            coeffs=[(int(j), 1.0) for j in h.indices],
            sense="<=",
            rhs=float(rhs),
            label=f"card<= {rhs} (flip)",
        )
        return cut, rhs < 0
    rhs = h.rhs_int + 1
    cut = LinearCut(
        coeffs=[(int(j), 1.0) for j in h.indices],
        sense=">=",
        rhs=float(rhs),
        label=f"card>={rhs} (flip)",
    )
    return cut, rhs > len(h.indices)


def make_partition(
    cut_up: CardinalityHyperplane | None, cut_down: CardinalityHyperplane | None
) -> BranchPartition:
    """Four (or fewer, in degenerate cases) regions from the two cuts.

    The complement of a >=r cut is <=r-1 and vice versa, so for every 0/1
    assignment exactly one region's cut-set holds.  Complements with an
    out-of-range rhs are kept but flagged trivially infeasible.
    """
    regions: list[PartitionRegion] = []
    if cut_up is not None and cut_down is not None:
        flip_up, dead_up = _complement(cut_up)
        flip_down, dead_down = _complement(cut_down)
        keep_up = cut_up.to_cut("card_up")
        keep_down = cut_down.to_cut("card_down")
        regions.append(PartitionRegion("keep_keep", [keep_up, keep_down]))
        regions.append(PartitionRegion("keep_flip", [keep_up, flip_down], dead_down))
        regions.append(PartitionRegion("flip_keep", [flip_up, keep_down], dead_up))
        regions.append(
            PartitionRegion("flip_flip", [flip_up, flip_down], dead_up or dead_down)
        )
    elif cut_up is not None or cut_down is not None:
        h = cut_up if cut_up is not None else cut_down
        flip, dead = _complement(h)
        regions.append(PartitionRegion("keep", [h.to_cut()]))
        regions.append(PartitionRegion("flip", [flip], dead))
    else:
        regions.append(PartitionRegion("all", []))
    return BranchPartition(regions=regions)


@dataclass
class PartitionReport:
    """Merged solve report plus the per-region reports and the cuts used."""

    best: SolveReport
    regions: list[tuple[str, SolveReport]]
    hyperplanes: tuple[CardinalityHyperplane | None, CardinalityHyperplane | None]
    mode: str


def _better(sense: str, a: float, b: float) -> bool:
    return a < b if sense == "minimize" else a > b


def _merge_logs(region_reports: list[tuple[str, SolveReport]], sense: str):
    log = []
    offset = 0.0
    best = None
    for _, rep in region_reports:
        for t, obj in rep.incumbent_log:
            if best is None or _better(sense, obj, best):
                best = obj
                log.append((offset + t, obj))
        offset += rep.wall_time
    return log


def partition_solve(
    instance: MipInstance,
    prediction: Prediction,
    calibration: Calibration,
    options: SolveOptions | None = None,
    mode: str = "exact",
    tightened: bool = False,
) -> PartitionReport:
    """Solve via the probabilistic partition.

    heuristic mode solves only the region where both cuts hold; exact
    mode then sweeps the complement regions with the first region's
    objective as a non-strict cutoff (none if the first region was
    infeasible) and returns the best solution across regions, which
    matches the plain optimum because the partition covers the feasible
    set.  Regions are solved sequentially here; they are independent
    once the first region's objective is known, so a concurrent sweep
    would be safe.
    """
    if mode not in ("heuristic", "exact"):
        raise ValueError(f"bad mode {mode!r}")
    calibration.validate()
    opts = options or SolveOptions()
    cut_up, cut_down = build_hyperplanes(
        prediction,
        calibration.tau_star,
        calibration.sigma,
        calibration.delta,
        mode="tightened" if tightened else "plain",
    )
    partition = make_partition(cut_up, cut_down)
    sense = instance.sense

    region_reports: list[tuple[str, SolveReport]] = []
    first = partition.first
    first_report = solve_mip(instance, first.cuts, opts)
    region_reports.append((first.label, first_report))

    if mode == "exact":
        cutoff = None
        if first_report.best_solution is not None:
            cutoff = first_report.objective
        if opts.cutoff is not None:
            cutoff = (
                opts.cutoff
                if cutoff is None
                else (min if sense == "minimize" else max)(opts.cutoff, cutoff)
            )
        for region in partition.regions[1:]:
            if region.infeasible_by_construction:
                region_reports.append(
                    (
                        region.label,
                        SolveReport(
                            best_solution=None,
                            best_bound=math.inf if sense == "minimize" else -math.inf,
                            status="infeasible",
                            nodes=0,
                            wall_time=0.0,
                        ),
                    )
                )
                continue
            ropts = replace(opts, cutoff=cutoff)
            region_reports.append((region.label, solve_mip(instance, region.cuts, ropts)))

    best_label = None
    best_report = None
    for label, rep in region_reports:
        if rep.best_solution is None:
            continue
        if best_report is None or _better(sense, rep.objective, best_report.objective):
            best_label = label
            best_report = rep

    nodes = sum(rep.nodes for _, rep in region_reports)
    wall = sum(rep.wall_time for _, rep in region_reports)
    any_limit = any(rep.status == "limit" for _, rep in region_reports)

    if best_report is not None:
        solution = best_report.best_solution
        objective = best_report.objective
        if any_limit:
            status = "limit"
        elif mode == "exact":
            status = "optimal"
        else:
            status = "feasible"
        if mode == "exact" and not any_limit:
            bound = objective
        else:
            bounds = [rep.best_bound for _, rep in region_reports]
            bound = min(bounds) if sense == "minimize" else max(bounds)
    else:
        solution = None
        objective = math.nan
        if any_limit:
            status = "limit"
        elif mode == "heuristic":
            status = first_report.status
        elif all(rep.status in ("infeasible", "cutoff") for _, rep in region_reports):
            status = "infeasible"
        else:
            status = first_report.status
        bound = math.inf if sense == "minimize" else -math.inf

    merged = SolveReport(
        best_solution=solution,
        best_bound=bound,
        status=status,
        nodes=nodes,
        wall_time=wall,
        incumbent_log=_merge_logs(region_reports, sense),
    )
    return PartitionReport(
        best=merged,
        regions=region_reports,
        hyperplanes=(cut_up, cut_down),
        mode=mode,
    )


def hoeffding_tail(set_size: int, gamma: float) -> float:
    """exp(-2 gamma^2 / set_size): the pooled-sum deviation probability."""
    if set_size < 1:
        raise ValueError("set_size must be >= 1")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return math.exp(-2.0 * gamma * gamma / set_size)


@dataclass
class GeneralizationInputs:
    """Per-variable success-mass lower bounds with their confidence terms.

    delta_values maps a variable index to Delta_j in (0, 1], the certified
    probability mass of a correct prediction at confidence delta.  When
    the raw learning-theory inputs (erm_error, vc_dim, sample_count) are
    kept, the stored values must match their recomputation.
    """

    delta_values: dict[int, float]
    delta: float
    gamma: float
    erm_error: dict[int, float] | None = None
    vc_dim: dict[int, float] | None = None
    sample_count: int | None = None

    def validate(self) -> None:
        if not 0 <= self.delta < 1:
            raise ValueError("delta must be in [0, 1)")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        for j, v in self.delta_values.items():
            if not 0 < v <= 1:
                raise ValueError(f"delta value for variable {j} must be in (0, 1]")
        if self.erm_error is not None and self.vc_dim is not None and self.sample_count:
            for j in self.delta_values:
                expect = delta_from_raw(
                    self.erm_error[j], self.vc_dim[j], self.sample_count, self.delta
                )
                if abs(expect - self.delta_values[j]) > 1e-12:
                    raise ValueError(
                        f"stored delta value for variable {j} does not match raw inputs"
                    )

    @classmethod
    def from_raw(
        cls,
        erm_error: dict[int, float],
        vc_dim: dict[int, float],
        sample_count: int,
        delta: float,
        gamma: float,
    ) -> "GeneralizationInputs":
        values = {
            j: delta_from_raw(erm_error[j], vc_dim[j], sample_count, delta)
            for j in erm_error
        }
        out = cls(
            delta_values=values,
            delta=delta,
            gamma=gamma,
            erm_error=erm_error,
            vc_dim=vc_dim,
            sample_count=sample_count,
        )
        out.validate()
        return out


def delta_from_raw(erm_error: float, vc_dim: float, sample_count: int, delta: float) -> float:
    """Certified success mass 1 - e - sqrt([vc(log(2m/vc)+1) + log(4/delta)]/m)."""
    m = sample_count
    inner = vc_dim * (math.log(2.0 * m / vc_dim) + 1.0) + math.log(4.0 / delta)
    return 1.0 - erm_error - math.sqrt(inner / m)


@dataclass
class GeneralizationThresholds:
    lower_on_up_sum: float
    upper_on_down_sum: float
    tail_up: float
    tail_down: float


def generalization_thresholds(
    g: GeneralizationInputs, up: np.ndarray, down: np.ndarray
) -> GeneralizationThresholds:
    """Certified cardinality thresholds for the rounded sets.

    The sum over the up set is at least (1-delta) * sum Delta_j - gamma
    except with the Hoeffding tail probability; the down-set sum is at
    most |L| - (1-delta) * sum Delta_j + gamma symmetrically.
    """
    g.validate()
    try:
        sum_up = sum(g.delta_values[int(j)] for j in up)
        sum_down = sum(g.delta_values[int(j)] for j in down)
    except KeyError as exc:
        raise ValueError(f"missing delta value for variable {exc.args[0]}") from exc
    lower = (1.0 - g.delta) * sum_up - g.gamma
    upper = len(down) - (1.0 - g.delta) * sum_down + g.gamma
    return GeneralizationThresholds(
        lower_on_up_sum=lower,
        upper_on_down_sum=upper,
        tail_up=hoeffding_tail(max(len(up), 1), g.gamma),
        tail_down=hoeffding_tail(max(len(down), 1), g.gamma),
    )
