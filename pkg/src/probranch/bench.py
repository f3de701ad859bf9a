"""Benchmark pipelines, timing metrics and Monte-Carlo validators.

The benchmark protocol mirrors solver practice: solve the cut-augmented
problem, record the best objective F and the time T it took to reach it,
then give the plain solver the same instance and measure the time to
reach F.  Aggregation uses the shifted geometric mean and the speedup
ratio of the two SGMs.

The validators draw large Monte-Carlo samples against the analytic tail
bounds used by the hyperplane construction, and replay the data-free
construction on uniform random knapsacks.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as spstats

from .bnb import SolveOptions, solve_mip
from .branching import (
    Calibration,
    NoFeasibleThresholdError,
    accuracy_curves,
    data_free_calibration,
    partition_solve,
    select_tau,
    sigma_from_stats,
)
from .generators import gen_knapsack_uniform, read_family, stream_rng
from .lp import fractional_knapsack
from .predict import load_prediction, logistic_predict, logistic_train

DEFAULT_SHIFT = 10.0
DEFAULT_TIME_LIMIT = 10.0  # desk-scale per-solve budget, overridable


def sgm(times, shift: float = DEFAULT_SHIFT) -> float:
    """Shifted geometric mean: exp(mean log max(1, t + shift)) - shift.

    Equal inputs return exactly that value (no exp/log round-trip), so
    sgm([t, t]) == t holds bit-exactly.
    """
    arr = np.asarray(list(times), dtype=float)
    if arr.size == 0:
        raise ValueError("sgm needs at least one time")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("times must be finite and non-negative")
    vals = np.maximum(1.0, arr + shift)
    if np.all(vals == vals[0]):
        return float(vals[0] - shift)
    return float(np.exp(np.mean(np.log(vals))) - shift)


def time_to_target(
    incumbent_log: list[tuple[float, float]], target: float, sense: str
) -> float | None:
    """First log timestamp whose objective meets the target, or None.

    Equality is forgiven within 1e-6 * (1 + |target|).  The log must be
    time-ordered.
    """
    times = [t for t, _ in incumbent_log]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("incumbent log is not time-ordered")
    tol = 1e-6 * (1.0 + abs(target))
    for t, obj in incumbent_log:
        if sense == "minimize" and obj <= target + tol:
            return t
        if sense == "maximize" and obj >= target - tol:
            return t
    return None


@dataclass
class BenchConfig:
    family_dir: str | Path
    predictor: str = "logistic"  # logistic | lp-root-simplex | lp-root-ipm | file:<dir>
    mode: str = "heuristic"  # heuristic | exact | plain
    tau: float | None = None  # None selects tau automatically
    delta: float | None = None  # None: 0.05 data-driven, 1e-8 data-free
    sigma: float | None = None  # None: from calibration curves (0 data-free)
    tightened: bool | None = None  # None: tightened for data-free, plain otherwise
    time_limit: float = DEFAULT_TIME_LIMIT
    train_count: int | None = None  # None: everything not in the test split
    test_count: int = 20
    calib_fraction: float = 0.2
    seed: int = 0
    out: str | Path | None = None

    def validate(self) -> None:
        if self.mode not in ("heuristic", "exact", "plain"):
            raise ValueError(f"bad mode {self.mode!r}")
        if self.tau is not None and not 0.5 < self.tau <= 1.0:
            raise ValueError("tau must be in (0.5, 1]")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if self.test_count < 1:
            raise ValueError("test_count must be >= 1")
        if not 0 < self.calib_fraction < 1:
            raise ValueError("calib_fraction must be in (0, 1)")


@dataclass
class BenchRow:
    instance: str
    objective: float  # F reached by the cut run
    t_method: float
    t_original: float | None
    nodes_method: int
    nodes_plain: int
    status_method: str
    status_plain: str


@dataclass
class BenchReport:
    rows: list[BenchRow]
    sgm_method: float | None
    sgm_original: float | None
    speedup: float | None
    not_reached: int
    failed: int
    config: dict = field(default_factory=dict)


def _is_data_free(predictor: str) -> bool:
    return predictor.startswith("lp-root")


def _labels_for(instances, time_limit) -> list[np.ndarray | None]:
    labels = []
    for _, inst in instances:
        rep = solve_mip(inst, options=SolveOptions(time_limit=time_limit))
        if rep.best_solution is None:
            labels.append(None)
        else:
            labels.append(np.round(rep.best_solution.binary_part(inst)))
    return labels


def _auto_tau(stats) -> float | None:
    """One-sided fallback threshold rule for degenerate families.

    When one rounded set is empty on every validation instance (its
    accuracy curve has no valid point anywhere), the strict two-sided
    rule cannot bind; take the largest tau dominated by every curve that
    does have valid instances.
    """
    for i in range(len(stats.tau_grid) - 1, -1, -1):
        tau = float(stats.tau_grid[i])
        has_l = stats.num_valid_l[i] > 0
        has_u = stats.num_valid_u[i] > 0
        if not (has_l or has_u):
            continue
        if (not has_l or stats.mean_alpha_l[i] >= tau) and (
            not has_u or stats.mean_alpha_u[i] >= tau
        ):
            return tau
    return None


def _calibrate_or_fallback(pairs, delta: float) -> Calibration:
    stats = accuracy_curves(pairs)
    try:
        tau = select_tau(stats)
    except NoFeasibleThresholdError:
        tau = _auto_tau(stats)
        if tau is None:
            warnings.warn(
                "no usable accuracy curve; falling back to tau=0.9, sigma=0",
                stacklevel=2,
            )
            return Calibration(tau_star=0.9, sigma=0.0, delta=delta, stats=None)
        warnings.warn(
            "one rounded set was always empty; tau selected one-sidedly",
            stacklevel=2,
        )
    return Calibration(
        tau_star=tau, sigma=sigma_from_stats(stats, tau), delta=delta, stats=stats
    )


def _build_predictor(config: BenchConfig, train):
    """Returns (predict_fn(instance) -> Prediction, Calibration)."""
    from .predict import lp_root_predict

    predictor = config.predictor
    if predictor == "logistic":
        labels = _labels_for(train, config.time_limit)
        usable = [(xi, inst, y) for (xi, inst), y in zip(train, labels) if y is not None]
        if len(usable) < 5:
            raise ValueError("not enough solved training instances for the logistic model")
        n_fit = max(2, int(round(len(usable) * (1.0 - config.calib_fraction))))
        n_fit = min(n_fit, len(usable) - 1)
        fit, val = usable[:n_fit], usable[n_fit:]
        model = logistic_train([(xi, y) for xi, _, y in fit])
        pairs = [(logistic_predict(model, xi), y) for xi, _, y in val]
        if config.tau is None:
            cal = _calibrate_or_fallback(
                pairs, delta=config.delta if config.delta is not None else 0.05
            )
            if config.sigma is not None:
                cal = Calibration(cal.tau_star, config.sigma, cal.delta, cal.stats)
        else:
            stats = accuracy_curves(pairs)
            sigma = config.sigma
            if sigma is None:
                try:
                    sigma = sigma_from_stats(stats, config.tau)
                except ValueError:
                    sigma = 0.0
            cal = Calibration(
                tau_star=config.tau,
                sigma=sigma,
                delta=config.delta if config.delta is not None else 0.05,
                stats=None,
            )
        cal.validate()
        return (lambda inst: logistic_predict(model, np.array(inst.param_tag))), cal

    if predictor in ("lp-root-simplex", "lp-root-ipm"):
        backend = "simplex" if predictor.endswith("simplex") else "ipm"
        cal = data_free_calibration(
            tau=config.tau if config.tau is not None else 0.9,
            delta=config.delta if config.delta is not None else 1e-8,
        )
        if config.sigma is not None:
            cal = Calibration(cal.tau_star, config.sigma, cal.delta, None)
        return (lambda inst: lp_root_predict(inst, backend=backend)), cal

    if predictor.startswith("file:"):
        pred_dir = Path(predictor[len("file:"):])

        def from_file(inst):
            return load_prediction(pred_dir / f"{inst.name}.pred.json", inst.num_binary)

        cal = Calibration(
            tau_star=config.tau if config.tau is not None else 0.9,
            sigma=config.sigma if config.sigma is not None else 0.0,
            delta=config.delta if config.delta is not None else 0.05,
            stats=None,
        )
        return from_file, cal

    raise ValueError(f"unknown predictor {predictor!r}")


def run_benchmark(config: BenchConfig) -> BenchReport:
    """Train, calibrate, and compare cut-first solving against plain solving.

    Rows where the plain solver never reaches the cut run's objective are
    excluded from both SGM lists and surfaced through ``not_reached``
    rather than imputed.
    """
    config.validate()
    family = read_family(config.family_dir)
    total = len(family.instances)
    if config.test_count >= total:
        raise ValueError("test split consumes the whole family")
    test = family.instances[total - config.test_count :]
    n_train = (
        config.train_count
        if config.train_count is not None
        else total - config.test_count
    )
    if n_train < 1:
        raise ValueError("empty training split")
    train = family.instances[: min(n_train, total - config.test_count)]

    tightened = config.tightened
    if tightened is None:
        tightened = _is_data_free(config.predictor)

    if config.mode == "plain":
        predict_fn, cal = None, None
    else:
        predict_fn, cal = _build_predictor(config, train)

    opts = SolveOptions(time_limit=config.time_limit)
    rows: list[BenchRow] = []
    failed = 0
    not_reached = 0
    method_times, original_times = [], []
    for _, inst in test:
        plain_rep = solve_mip(inst, options=opts)
        if config.mode == "plain":
            method_rep = plain_rep
        else:
            part = partition_solve(
                inst,
                predict_fn(inst),
                cal,
                options=opts,
                mode="heuristic" if config.mode == "heuristic" else "exact",
                tightened=tightened,
            )
            method_rep = part.best
        if method_rep.best_solution is None or not method_rep.incumbent_log:
            failed += 1
            rows.append(
                BenchRow(
                    instance=inst.name,
                    objective=math.nan,
                    t_method=math.nan,
                    t_original=None,
                    nodes_method=method_rep.nodes,
                    nodes_plain=plain_rep.nodes,
                    status_method=method_rep.status,
                    status_plain=plain_rep.status,
                )
            )
            continue
        f_method = method_rep.objective
        t_method = method_rep.incumbent_log[-1][0]
        t_orig = time_to_target(plain_rep.incumbent_log, f_method, inst.sense)
        rows.append(
            BenchRow(
                instance=inst.name,
                objective=f_method,
                t_method=t_method,
                t_original=t_orig,
                nodes_method=method_rep.nodes,
                nodes_plain=plain_rep.nodes,
                status_method=method_rep.status,
                status_plain=plain_rep.status,
            )
        )
        if t_orig is None:
            not_reached += 1
        else:
            method_times.append(t_method)
            original_times.append(t_orig)

    if not_reached:
        warnings.warn(
            f"{not_reached} instance(s) never reached the target objective; "
            "excluded from the SGM pairs",
            stacklevel=2,
        )
    sgm_method = sgm(method_times) if method_times else None
    sgm_original = sgm(original_times) if original_times else None
    speedup = None
    if sgm_method is not None and sgm_original is not None and sgm_method > 0:
        speedup = sgm_original / sgm_method
    return BenchReport(
        rows=rows,
        sgm_method=sgm_method,
        sgm_original=sgm_original,
        speedup=speedup,
        not_reached=not_reached,
        failed=failed,
        config={
            "family_dir": str(config.family_dir),
            "predictor": config.predictor,
            "mode": config.mode,
            "tau": None if cal is None else cal.tau_star,
            "delta": None if cal is None else cal.delta,
            "sigma": None if cal is None else cal.sigma,
            "tightened": tightened,
            "time_limit": config.time_limit,
            "train_count": len(train),
            "test_count": len(test),
            "seed": config.seed,
        },
    )


def report_emit(report: BenchReport, path_prefix: str | Path) -> tuple[Path, Path]:
    """Write rows as CSV and aggregates as JSON with a stable layout."""
    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_suffix(".csv")
    json_path = prefix.with_suffix(".json")
    columns = [
        "instance",
        "objective",
        "t_method",
        "t_original",
        "nodes_method",
        "nodes_plain",
        "status_method",
        "status_plain",
    ]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in report.rows:
            writer.writerow(
                [
                    row.instance,
                    row.objective,
                    row.t_method,
                    "" if row.t_original is None else row.t_original,
                    row.nodes_method,
                    row.nodes_plain,
                    row.status_method,
                    row.status_plain,
                ]
            )
    summary = {
        "speedup": report.speedup,
        "sgm_method": report.sgm_method,
        "sgm_original": report.sgm_original,
        "not_reached": report.not_reached,
        "failed": report.failed,
        "rows": len(report.rows),
        "config": report.config,
    }
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    return csv_path, json_path


@dataclass
class LemmaReport:
    name: str
    params: dict
    trials: int
    empirical: float
    bound: float
    stderr: float
    passed: bool
    exact: float | None = None  # analytic oracle for the tail, when available


def _binom_stderr(p_hat: float, trials: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / trials) / trials)


def verify_lemma(which: str, params: dict, trials: int, seed: int) -> LemmaReport:
    """Monte-Carlo check of one concentration bound.

    Simulates the tail event frequency and passes iff it does not exceed
    the analytic bound by more than three binomial standard errors.
    These are proven bounds, so a failure indicates a bug, not bad luck.
    """
    if trials < 10_000:
        raise ValueError("need at least 10^4 trials")
    rng = stream_rng(seed, 0)

    if which in ("hoeffding", "bernstein"):
        n = int(params["n"])
        p = float(params["p"])
        t = float(params["t"])
        if not (n >= 1 and 0 <= p <= 1 and t > 0):
            raise ValueError("bad params for the tail bound")
        sums = rng.binomial(n, p, size=trials)
        empirical = float(np.mean(sums - n * p >= t))
        if which == "hoeffding":
            bound = math.exp(-2.0 * t * t / n)
        else:
            bound = math.exp(-t * t / (2.0 * (n * p + t / 3.0)))
        # exact binomial tail P(Bin(n,p) >= ceil(np + t))
        exact = float(spstats.binom.sf(math.ceil(n * p + t) - 1, n, p))
        stderr = _binom_stderr(empirical, trials)
        return LemmaReport(
            name=which,
            params=params,
            trials=trials,
            empirical=empirical,
            bound=bound,
            stderr=stderr,
            passed=empirical <= bound + 3.0 * stderr,
            exact=exact,
        )

    if which == "chebyshev":
        t = float(params["t"])
        lo = float(params.get("lo", 0.0))
        hi = float(params.get("hi", 1.0))
        if t <= 0 or hi <= lo:
            raise ValueError("bad params for the variance bound")
        y = rng.uniform(lo, hi, size=trials)
        mean = (lo + hi) / 2.0
        var = (hi - lo) ** 2 / 12.0
        empirical = float(np.mean(np.abs(y - mean) >= t))
        bound = var / (t * t)
        # exact tail of |U - mean| >= t for the uniform distribution
        exact = max(0.0, 1.0 - min(2.0 * t, hi - lo) / (hi - lo))
        stderr = _binom_stderr(empirical, trials)
        return LemmaReport(
            name=which,
            params=params,
            trials=trials,
            empirical=empirical,
            bound=bound,
            stderr=stderr,
            passed=empirical <= bound + 3.0 * stderr,
            exact=exact,
        )

    if which == "uniform_bins":
        n = int(params["n"])
        delta = float(params["delta"])
        if n < 1 or not 0 < delta < 1:
            raise ValueError("bad params for the bin bound")
        n_bins = math.ceil(1.0 / delta)
        cap = 2.0 * n * delta
        hits = 0
        batch = max(1, 10**6 // max(n, 1))
        done = 0
        while done < trials:
            take = min(batch, trials - done)
            u = rng.uniform(0.0, 1.0, size=(take, n))
            idx = np.minimum((u / delta).astype(int), n_bins - 1)
            counts = np.apply_along_axis(np.bincount, 1, idx, minlength=n_bins)
            hits += int(np.sum(np.any(counts > cap, axis=1)))
            done += take
        empirical = hits / trials
        bound = n_bins * math.exp(-n * delta / 4.0)
        # union of exact per-bin binomial tails P(Bin(n, delta) > 2n delta)
        exact = min(1.0, n_bins * float(spstats.binom.sf(math.floor(cap), n, delta)))
        stderr = _binom_stderr(empirical, trials)
        return LemmaReport(
            name="uniform_bins",
            params=params,
            trials=trials,
            empirical=empirical,
            bound=bound,
            stderr=stderr,
            passed=empirical <= bound + 3.0 * stderr,
            exact=exact,
        )

    raise ValueError(f"unknown validator {which!r}")


@dataclass
class KnapsackRoundingRow:
    n: int
    trials: int
    margin: float  # 4 sqrt(2) n^(3/4)
    vacuous: bool  # margin >= n makes both inequalities trivial
    violations_up: int
    violations_down: int
    mispicks: list[int]  # per-trial |U \ U*|

    @property
    def median_mispick(self) -> float:
        return float(np.median(self.mispicks)) if self.mispicks else math.nan

    @property
    def max_mispick(self) -> int:
        return max(self.mispicks) if self.mispicks else 0


@dataclass
class KnapsackRoundingReport:
    gamma: float
    rows: list[KnapsackRoundingRow]

    @property
    def total_violations(self) -> int:
        return sum(r.violations_up + r.violations_down for r in self.rows)


def verify_knapsack_rounding(
    n_list: list[int], gamma: float, trials: int, seed: int
) -> KnapsackRoundingReport:
    """Replay the data-free construction on uniform knapsacks.

    Per trial: draw the instance, read the rounded sets off the greedy
    LP solution, solve exactly, and check that the up-set keeps at least
    |U| - 4 sqrt(2) n^(3/4) ones and the down-set gains at most that
    margin.  The margin exceeds n itself for n <= 1024, which the report
    flags as vacuous.
    """
    master = stream_rng(seed, 0)
    rows = []
    for n in n_list:
        margin = 4.0 * math.sqrt(2.0) * n**0.75
        vio_up = vio_down = 0
        mispicks = []
        for _ in range(trials):
            sub_seed = int(master.integers(0, 2**62))
            uk = gen_knapsack_uniform(n, gamma, seed=sub_seed)
            y_lp, _, _ = fractional_knapsack(
                uk.weights, uk.ratios, gamma * n
            )
            up = np.nonzero(y_lp == 1.0)[0]
            down = np.nonzero(y_lp == 0.0)[0]
            rep = solve_mip(
                uk.instance, options=SolveOptions(rel_gap=0.0, abs_gap=1e-9)
            )
            if rep.best_solution is None:
                raise RuntimeError("exact solve failed on a generated knapsack")
            ystar = np.round(rep.best_solution.values[:n])
            if float(ystar[up].sum()) < len(up) - margin - 1e-9:
                vio_up += 1
            if float(ystar[down].sum()) > margin + 1e-9:
                vio_down += 1
            mispicks.append(int(np.sum(ystar[up] == 0)))
        rows.append(
            KnapsackRoundingRow(
                n=n,
                trials=trials,
                margin=margin,
                vacuous=margin >= n,
                violations_up=vio_up,
                violations_down=vio_down,
                mispicks=mispicks,
            )
        )
    return KnapsackRoundingReport(gamma=gamma, rows=rows)
