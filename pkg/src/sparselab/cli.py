"""Command-line frontend.

Subcommands: ``gen`` (problem instances), ``solve`` (Lasso solvers),
``certify`` (recovery certificates), ``bounds`` (threshold formulas),
``experiment fig1|fig2|fig3`` (Monte Carlo sweeps with CSV + SVG output),
and ``validate-lemmas`` (the statistical validation grid).

Configuration precedence is flag > config file > preset default; the
effective configuration is echoed to stdout and written next to the outputs
for provenance.  Every subcommand is deterministic under a fixed --seed.
Exit status: 0 on success, 1 on domain errors (bad parameters, degenerate
problems), 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import certificate as cert
from . import experiment as exp
from . import wishart
from .ensemble import load_instance, make_instance, save_instance
from .lasso import path_to_csv, solve_homotopy, solve_proximal
from .linalg import RankDeficiencyError

# (n, p, trials): `desk` finishes in minutes on a laptop; the `paper`
# presets mirror the full-scale protocol at moderate and high redundancy and
# are documented as long-running (hours).
PRESETS = {
    "desk": {"n": 1000, "p": 4000, "trials": 200},
    "paper": {"n": 8000, "p": 32000, "trials": 1000},
    "paper-hr": {"n": 3000, "p": 36000, "trials": 1000},
}

FIGURE_DEFAULTS = {
    "fig1": {"sweep_variable": "k"},
    "fig2": {"sweep_variable": "gamma_ratio", "condition_subset": "c1_only"},
    "fig3": {"sweep_variable": "T_ratio", "condition_subset": "c2_only"},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparselab",
        description="Sparse-recovery laboratory: solvers, certificates, bounds, "
                    "and Monte Carlo phase-transition experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a problem instance file")
    g.add_argument("--n", type=int, required=True, help="number of measurements")
    g.add_argument("--p", type=int, required=True, help="ambient dimension")
    g.add_argument("--k", type=int, required=True, help="sparsity of the signal")
    g.add_argument("--T", type=float, default=1.0, help="magnitude of the nonzero entries")
    g.add_argument("--eps", type=float, default=1.0, help="noise l2 norm")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--out", required=True, help="output .npz instance file")

    s = sub.add_parser("solve", help="solve the Lasso on an instance file")
    s.add_argument("--instance", required=True, help="instance .npz file from gen")
    s.add_argument("--gamma", type=float, required=True, help="regularization parameter")
    s.add_argument("--solver", choices=("homotopy", "proximal"), default="homotopy")
    s.add_argument("--tol", type=float, default=1e-10, help="proximal termination tolerance")
    s.add_argument("--max-iter", type=int, default=100_000, help="proximal iteration cap")
    s.add_argument("--path-csv", help="write the homotopy path breakpoints to this CSV")

    c = sub.add_parser("certify", help="evaluate recovery certificates on an instance")
    c.add_argument("--instance", required=True, help="instance .npz file from gen")
    c.add_argument("--gamma", type=float, required=True, help="regularization parameter")
    c.add_argument("--json", dest="json_out", help="also write the report as JSON")

    b = sub.add_parser("bounds", help="print threshold formulas and probability bounds")
    b.add_argument("--n", type=int, required=True, help="number of measurements")
    b.add_argument("--p", type=int, required=True, help="ambient dimension")
    b.add_argument("--alpha", type=float, required=True, help="tuning constant in [0,1)")
    b.add_argument("--beta", type=float, required=True, help="tuning constant in [0,1)")
    b.add_argument("--eps", type=float, default=1.0, help="noise l2 budget")
    b.add_argument("--k", type=int, help="sparsity for the partial-recovery bound")
    b.add_argument("--json", dest="json_out", help="also write all quantities as JSON")

    e = sub.add_parser("experiment", help="run a Monte Carlo sweep, write CSV + SVG")
    e.add_argument("figure", choices=("fig1", "fig2", "fig3"))
    e.add_argument("--preset", choices=tuple(PRESETS), default="desk")
    e.add_argument("--config", help="JSON config file (overrides preset, overridden by flags)")
    e.add_argument("--n", type=int, help="number of measurements")
    e.add_argument("--p", type=int, help="ambient dimension")
    e.add_argument("--alpha", type=float, help="tuning constant in [0,1)")
    e.add_argument("--beta", type=float, help="tuning constant in [0,1)")
    e.add_argument("--eps", type=float, help="noise l2 budget")
    e.add_argument("--trials", type=int, help="trials per sweep point")
    e.add_argument("--grid", help="comma-separated sweep values")
    e.add_argument("--gamma", dest="gamma_rule",
                   choices=("t_over_5p5", "t_over_4", "t_over_2"),
                   help="regularization rule for the sparsity sweep")
    e.add_argument("--mode", choices=("certificate", "solver"),
                   help="success evaluated by certificates or by the solver")
    e.add_argument("--seed", type=int, help="master seed")
    e.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads (results are independent of this)")
    e.add_argument("--out", default=".", help="output directory")

    v = sub.add_parser("validate-lemmas", help="run the statistical validation grid")
    v.add_argument("--seed", type=int, default=0, help="master seed")
    v.add_argument("--out", help="optional CSV output path")

    return parser


def _echo(header: str, payload: dict) -> None:
    print(f"# {header}")
    print(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _cmd_gen(args) -> int:
    inst = make_instance(args.n, args.p, args.k, args.T, args.eps, args.seed)
    save_instance(inst, args.out)
    _echo("generated instance", {
        "n": inst.n, "p": inst.p, "k": inst.x0.k, "T": args.T, "eps": inst.eps,
        "seed": args.seed, "noise_norm": float(np.linalg.norm(inst.w)), "out": args.out,
    })
    return 0


def _cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    if args.solver == "homotopy":
        sol = solve_homotopy(inst.a, inst.y, args.gamma, return_path=bool(args.path_csv))
    else:
        sol = solve_proximal(inst.a, inst.y, args.gamma, tol=args.tol, max_iter=args.max_iter)
    label, missed, spurious = cert.classify_recovery(sol.x, inst.x0)
    _echo("solution", {
        "solver": sol.method, "gamma": args.gamma,
        "support_size": int(sol.support.size),
        "support_1based": (sol.support + 1).tolist(),
        "kkt_ok": sol.kkt.ok,
        "on_support_violation": sol.kkt.on_support_violation,
        "off_support_excess": sol.kkt.off_support_excess,
        "unique": sol.unique, "converged": sol.converged, "iterations": sol.iterations,
        "recovery": label,
        "missed_1based": (missed + 1).tolist(),
        "spurious_1based": (spurious + 1).tolist(),
        "l2_error": float(np.linalg.norm(sol.x - inst.x0.dense())),
    })
    if args.path_csv:
        path_to_csv(sol.path, args.path_csv)
        print(f"# path written to {args.path_csv}")
    return 0


def _cmd_certify(args) -> int:
    inst = load_instance(args.instance)
    report = cert.certify_exact(inst.a, inst.x0, inst.w, args.gamma)
    payload = {
        "gamma": report.gamma,
        "k": inst.x0.k,
        "fuchs": report.fuchs,
        "erc": report.erc,
        "c1": {"passed": report.c1.passed, "margin": report.c1.margin,
               "note": "vacuous (empty support)" if inst.x0.k == 0 else ""},
        "c2": {"passed": report.c2.passed, "margin": report.c2.margin,
               "worst_index_1based": None if report.c2.worst_index is None
               else report.c2.worst_index + 1},
        "u_norm": report.u_norm,
        "exact": report.exact,
    }
    _echo("certificate report", payload)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_bounds(args) -> int:
    t1 = bounds_mod.theorem1_bounds(args.n, args.p, args.alpha, args.beta, args.eps)
    t2 = bounds_mod.theorem2_bounds(args.n, args.p, args.alpha, args.beta, args.eps)
    par = bounds_mod.experiment_params(args.n, args.p, args.alpha, args.beta, args.eps)
    k3 = args.k if args.k is not None else t1.k_max_int
    t3 = bounds_mod.theorem3_bounds(args.n, args.p, args.alpha, args.beta, args.eps, k3)

    rows = [
        ("inputs", f"n={args.n} p={args.p} alpha={args.alpha} beta={args.beta} eps={args.eps}"),
        ("k_max = alpha*beta*n/(2 log p)", f"{t1.k_max:.4f}  (floor {t1.k_max_int})"),
        ("gamma (exact recovery)", f"{t1.gamma:.6f}"),
        ("T_min = 5.5*gamma", f"{t1.t_min:.6f}"),
        ("prob lower bound (exact)", f"{t1.prob_lb:.6f}"),
        ("Delta (compressible)", f"{t2.delta:.6f}"),
        ("gamma = Delta*eps", f"{t2.gamma:.6f}"),
        ("T_min = 5.5*Delta*eps", f"{t2.t_min:.6f}"),
        ("tail sup-norm cap", f"{t2.tail_inf_max:.6f}"),
        ("prob lower bound (compressible)", f"{t2.prob_lb:.6f}"),
        (f"l2 bound at k={k3} (partial)", f"{t3.l2_bound:.6f}"),
        ("prob lower bound (partial)", f"{t3.prob_lb:.6f}"),
        ("k_beta / gamma0 / T (protocol)", f"{par.k_beta:.4f} / {par.gamma0:.6f} / {par.big_t:.6f}"),
    ]
    width = max(len(r[0]) for r in rows)
    for name, val in rows:
        print(f"{name:<{width}}  {val}")

    payload = {
        "theorem1": dataclasses.asdict(t1),
        "theorem2": dataclasses.asdict(t2),
        "theorem3": dataclasses.asdict(t3),
        "protocol": dataclasses.asdict(par),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0


_DEFAULT_GRIDS = {
    "fig1": lambda par: tuple(sorted(set(
        float(max(1, round(f * par.k_beta))) for f in (0.3, 0.6, 0.9, 1.0, 1.2, 1.5, 1.9)))),
    "fig2": lambda par: (0.25, 0.5, 0.75, 1.0, 1.5, 2.0),
    "fig3": lambda par: (1.0, 2.0, 3.0, 4.0, 5.5),
}


def _cmd_experiment(args) -> int:
    settings = {"alpha": 0.8, "beta": 0.8, "eps": 1.0, "master_seed": 0,
                "mode": "certificate", "gamma_rule": "t_over_5p5"}
    settings.update(PRESETS[args.preset])
    settings.update(FIGURE_DEFAULTS[args.figure])
    if args.config:
        settings.update(json.loads(Path(args.config).read_text()))
    flag_map = {"n": args.n, "p": args.p, "alpha": args.alpha, "beta": args.beta,
                "eps": args.eps, "trials": args.trials, "master_seed": args.seed,
                "gamma_rule": args.gamma_rule, "mode": args.mode,
                "threads": args.threads}
    settings.update({k: v for k, v in flag_map.items() if v is not None})
    if args.grid:
        settings["sweep_grid"] = tuple(float(v) for v in args.grid.split(","))
    if "sweep_grid" not in settings or not settings["sweep_grid"]:
        par = bounds_mod.experiment_params(settings["n"], settings["p"], settings["alpha"],
                                           settings["beta"], settings["eps"])
        settings["sweep_grid"] = _DEFAULT_GRIDS[args.figure](par)
    config = exp.ExperimentConfig(**settings)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo(f"effective configuration ({args.figure}, preset {args.preset})",
          json.loads(config.to_json()))
    (out_dir / f"{args.figure}_config.json").write_text(config.to_json())

    thresholds = None
    if args.figure == "fig1":
        estimates, kbetas = exp.run_fig1(config)
        thresholds = {f"k_beta={b:g}": v for b, v in kbetas.items()}
        xlabel = "sparsity k"
    elif args.figure == "fig2":
        estimates = exp.run_fig2(config)
        xlabel = "gamma / gamma0"
    else:
        estimates = exp.run_fig3(config)
        xlabel = "T / gamma0"

    csv_path = out_dir / f"{args.figure}.csv"
    svg_path = out_dir / f"{args.figure}.svg"
    exp.write_results(estimates, csv_path, config.sweep_variable)
    exp.emit_plot(estimates, svg_path, thresholds=thresholds, xlabel=xlabel,
                  title=f"{args.figure} (n={config.n}, p={config.p}, trials={config.trials})")
    for e in estimates:
        print(f"{config.sweep_variable}={e.sweep_value:g}: p_hat={e.p_hat:.4f} "
              f"[{e.ci_low:.4f}, {e.ci_high:.4f}] ({e.successes}/{e.trials}, "
              f"{e.anomalies} anomalies)")
    print(f"# wrote {csv_path} and {svg_path}")
    return 0


def _cmd_validate(args) -> int:
    results = wishart.run_grid(args.seed)
    print(wishart.results_table(results))
    if args.out:
        import csv as _csv

        with open(args.out, "w", newline="") as fh:
            _csv.writer(fh).writerows(wishart.results_to_csv_rows(results))
        print(f"# wrote {args.out}")
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen": _cmd_gen,
        "solve": _cmd_solve,
        "certify": _cmd_certify,
        "bounds": _cmd_bounds,
        "experiment": _cmd_experiment,
        "validate-lemmas": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, RankDeficiencyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
