"""Command-line front end: generate, train, calibrate, solve, bench, verify.

Exit codes: 0 on success, 2 when a validation check fails, 1 on any
other error (including bad usage).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import branching, predict
from .bnb import SolveOptions, solve_mip
from .generators import (
    gen_ca,
    gen_knapsack_uniform,
    gen_mkp,
    gen_scp,
    read_family,
    write_family,
)
from .model import deserialize, serialize


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are errors, not validation failures
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="probranch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded instance family")
    g.add_argument("--kind", choices=["mkp", "scp", "ca", "knapsack"], required=True)
    g.add_argument("--m", type=int, default=5, help="rows (mkp/scp)")
    g.add_argument("--n", type=int, default=20, help="columns / items")
    g.add_argument("--density", type=float, default=0.2, help="scp matrix density")
    g.add_argument("--items", type=int, default=10, help="ca items")
    g.add_argument("--bids", type=int, default=30, help="ca bids")
    g.add_argument("--gamma", type=float, default=0.3, help="knapsack capacity fraction")
    g.add_argument("--count", type=int, default=20, help="family size")
    _add_common(g)

    t = sub.add_parser("train", help="train the per-variable logistic models")
    t.add_argument("--family", required=True)
    t.add_argument("--train-count", type=int, default=None)
    t.add_argument("--reg", type=float, default=1e-4)
    t.add_argument("--max-iters", type=int, default=500)
    t.add_argument("--tol", type=float, default=1e-6)
    t.add_argument("--time-limit", type=float, default=bench_mod.DEFAULT_TIME_LIMIT)
    _add_common(t)

    c = sub.add_parser("calibrate", help="pick tau*/sigma from accuracy curves")
    c.add_argument("--family", required=True)
    c.add_argument("--model", required=True)
    c.add_argument("--train-count", type=int, default=None)
    c.add_argument("--calib-fraction", type=float, default=0.2)
    c.add_argument("--delta", type=float, default=0.05)
    c.add_argument("--time-limit", type=float, default=bench_mod.DEFAULT_TIME_LIMIT)
    _add_common(c)

    s = sub.add_parser("solve", help="solve one instance, optionally with cuts")
    s.add_argument("--instance", required=True)
    s.add_argument("--predictor", default="lp-root-simplex")
    s.add_argument("--model", default=None, help="model file for the logistic predictor")
    s.add_argument("--calibration", default=None)
    s.add_argument("--tau", type=float, default=None)
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("--sigma", type=float, default=None)
    s.add_argument("--mode", choices=["heuristic", "exact", "plain"], default="exact")
    s.add_argument("--tightened", action="store_true")
    s.add_argument("--time-limit", type=float, default=bench_mod.DEFAULT_TIME_LIMIT)
    _add_common(s)

    b = sub.add_parser("bench", help="family benchmark with SGM and speedup")
    b.add_argument("--family", required=True)
    b.add_argument("--predictor", default="logistic")
    b.add_argument("--mode", choices=["heuristic", "exact", "plain"], default="heuristic")
    b.add_argument("--tau", type=float, default=None)
    b.add_argument("--delta", type=float, default=None)
    b.add_argument("--sigma", type=float, default=None)
    b.add_argument("--tightened", action="store_true", default=None)
    b.add_argument("--time-limit", type=float, default=bench_mod.DEFAULT_TIME_LIMIT)
    b.add_argument("--train-count", type=int, default=None)
    b.add_argument("--test-count", type=int, default=20)
    _add_common(b)

    v = sub.add_parser("verify", help="Monte-Carlo validation of the tail bounds")
    v.add_argument(
        "--check",
        choices=["hoeffding", "bernstein", "chebyshev", "uniform-bins",
                 "knapsack-rounding", "all"],
        default="all",
    )
    v.add_argument("--trials", type=int, default=100_000)
    v.add_argument("--n", type=int, default=100)
    v.add_argument("--p", type=float, default=0.5)
    v.add_argument("--t", type=float, default=10.0)
    v.add_argument("--delta", type=float, default=0.05)
    v.add_argument("--gamma", type=float, default=0.3)
    v.add_argument("--n-list", type=str, default="100,200,400")
    v.add_argument("--kr-trials", type=int, default=50)
    _add_common(v)

    return parser


def _cmd_generate(args) -> int:
    out = Path(args.out or f"{args.kind}_family")
    if args.kind == "mkp":
        fam = gen_mkp(args.m, args.n, args.count, args.seed)
    elif args.kind == "scp":
        fam = gen_scp(args.m, args.n, args.density, args.count, args.seed)
    elif args.kind == "ca":
        fam = gen_ca(args.items, args.bids, args.count, args.seed)
    else:
        uk = gen_knapsack_uniform(args.n, args.gamma, args.seed)
        out.parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_bytes(serialize(uk.instance))
        print(f"wrote {out}")
        return 0
    write_family(fam, out)
    print(f"wrote {len(fam.instances)} instances to {out}")
    return 0


def _train_slice(family, train_count):
    total = len(family.instances)
    n_train = train_count if train_count is not None else max(1, total - 20)
    return family.instances[: min(n_train, total)]


def _cmd_train(args) -> int:
    family = read_family(args.family)
    train = _train_slice(family, args.train_count)
    labeled = []
    for xi, inst in train:
        rep = solve_mip(inst, options=SolveOptions(time_limit=args.time_limit))
        if rep.best_solution is not None:
            labeled.append((xi, np.round(rep.best_solution.binary_part(inst))))
    if len(labeled) < 2:
        print("error: not enough solvable training instances", file=sys.stderr)
        return 1
    model = predict.logistic_train(
        labeled, reg=args.reg, max_iters=args.max_iters, tol=args.tol
    )
    out = Path(args.out or "model.json")
    predict.save_model(model, out)
    print(f"trained {model.num_vars} per-variable models on {len(labeled)} instances -> {out}")
    return 0


def _cmd_calibrate(args) -> int:
    family = read_family(args.family)
    model = predict.load_model(args.model)
    train = _train_slice(family, args.train_count)
    n_val = max(2, int(round(len(train) * args.calib_fraction)))
    val = train[len(train) - n_val :]
    pairs = []
    for xi, inst in val:
        rep = solve_mip(inst, options=SolveOptions(time_limit=args.time_limit))
        if rep.best_solution is None:
            continue
        pairs.append(
            (predict.logistic_predict(model, xi), np.round(rep.best_solution.binary_part(inst)))
        )
    cal = branching.calibrate(pairs, delta=args.delta)
    out = Path(args.out or "calibration.json")
    branching.save_calibration(cal, out)
    print(f"tau*={cal.tau_star} sigma={cal.sigma:.6g} delta={cal.delta} -> {out}")
    return 0


def _prediction_for(args, inst):
    if args.predictor == "logistic":
        if not args.model:
            raise ValueError("the logistic predictor needs --model")
        model = predict.load_model(args.model)
        return predict.logistic_predict(model, np.array(inst.param_tag))
    if args.predictor in ("lp-root-simplex", "lp-root-ipm"):
        backend = "simplex" if args.predictor.endswith("simplex") else "ipm"
        return predict.lp_root_predict(inst, backend=backend)
    if args.predictor.startswith("file:"):
        return predict.load_prediction(args.predictor[len("file:"):], inst.num_binary)
    raise ValueError(f"unknown predictor {args.predictor!r}")


def _cmd_solve(args) -> int:
    inst = deserialize(Path(args.instance).read_bytes())
    opts = SolveOptions(time_limit=args.time_limit, seed=args.seed)
    if args.mode == "plain":
        rep = solve_mip(inst, options=opts)
        doc = {
            "instance": inst.name,
            "mode": "plain",
            "status": rep.status,
            "objective": None if rep.best_solution is None else rep.objective,
            "best_bound": rep.best_bound,
            "nodes": rep.nodes,
            "wall_time": rep.wall_time,
        }
    else:
        if args.calibration:
            cal = branching.load_calibration(args.calibration)
        elif args.predictor.startswith("lp-root"):
            cal = branching.data_free_calibration(
                tau=args.tau if args.tau is not None else 0.9,
                delta=args.delta if args.delta is not None else 1e-8,
            )
        else:
            cal = branching.Calibration(
                tau_star=args.tau if args.tau is not None else 0.9,
                sigma=args.sigma if args.sigma is not None else 0.0,
                delta=args.delta if args.delta is not None else 0.05,
            )
        if args.sigma is not None:
            cal = branching.Calibration(cal.tau_star, args.sigma, cal.delta, cal.stats)
        tightened = args.tightened or (
            args.predictor.startswith("lp-root") and not args.calibration
        )
        part = branching.partition_solve(
            inst, _prediction_for(args, inst), cal, options=opts,
            mode=args.mode, tightened=tightened,
        )
        rep = part.best
        doc = {
            "instance": inst.name,
            "mode": args.mode,
            "predictor": args.predictor,
            "tau": cal.tau_star,
            "sigma": cal.sigma,
            "delta": cal.delta,
            "tightened": tightened,
            "status": rep.status,
            "objective": None if rep.best_solution is None else rep.objective,
            "best_bound": rep.best_bound,
            "nodes": rep.nodes,
            "wall_time": rep.wall_time,
            "regions": [
                {"label": label, "status": r.status, "nodes": r.nodes,
                 "objective": None if r.best_solution is None else r.objective}
                for label, r in part.regions
            ],
        }
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _cmd_bench(args) -> int:
    config = bench_mod.BenchConfig(
        family_dir=args.family,
        predictor=args.predictor,
        mode=args.mode,
        tau=args.tau,
        delta=args.delta,
        sigma=args.sigma,
        tightened=args.tightened,
        time_limit=args.time_limit,
        train_count=args.train_count,
        test_count=args.test_count,
        seed=args.seed,
    )
    report = bench_mod.run_benchmark(config)
    prefix = Path(args.out or "bench_report")
    csv_path, json_path = bench_mod.report_emit(report, prefix)
    print(
        f"rows={len(report.rows)} sgm_method={report.sgm_method} "
        f"sgm_original={report.sgm_original} speedup={report.speedup} "
        f"not_reached={report.not_reached} failed={report.failed}"
    )
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _cmd_verify(args) -> int:
    failures = 0
    lines = []
    checks = (
        ["hoeffding", "bernstein", "chebyshev", "uniform-bins", "knapsack-rounding"]
        if args.check == "all"
        else [args.check]
    )
    for check in checks:
        if check == "knapsack-rounding":
            n_list = [int(v) for v in args.n_list.split(",") if v]
            rep = bench_mod.verify_knapsack_rounding(
                n_list, args.gamma, args.kr_trials, args.seed
            )
            for row in rep.rows:
                ok = row.violations_up == 0 and row.violations_down == 0
                failures += 0 if ok else 1
                lines.append(
                    f"knapsack-rounding n={row.n}: violations="
                    f"{row.violations_up}+{row.violations_down} margin={row.margin:.1f}"
                    f"{' (vacuous)' if row.vacuous else ''} "
                    f"median|U\\U*|={row.median_mispick} -> {'pass' if ok else 'FAIL'}"
                )
            continue
        if check == "hoeffding" or check == "bernstein":
            params = {"n": args.n, "p": args.p, "t": args.t}
        elif check == "chebyshev":
            params = {"t": min(args.t, 0.5)}
        else:
            params = {"n": max(args.n, 400), "delta": args.delta}
        rep = bench_mod.verify_lemma(
            check.replace("-", "_"), params, args.trials, args.seed
        )
        failures += 0 if rep.passed else 1
        lines.append(
            f"{rep.name}: empirical={rep.empirical:.4f} bound={rep.bound:.4f} "
            f"exact={rep.exact if rep.exact is None else round(rep.exact, 5)} "
            f"-> {'pass' if rep.passed else 'FAIL'}"
        )
    out = "\n".join(lines)
    print(out)
    if args.out:
        Path(args.out).write_text(out + "\n")
    return 2 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "generate": _cmd_generate,
            "train": _cmd_train,
            "calibrate": _cmd_calibrate,
            "solve": _cmd_solve,
            "bench": _cmd_bench,
            "verify": _cmd_verify,
        }[args.command]
        return handler(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except Exception as exc:  # CLI boundary: report and signal an error
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
