"""Command-line entry point: ``deep-eda run|sweep|heatmap|gen-nk``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .dbm import load_dbm, save_dbm
from .eda import make_model, run_eda
from .errors import DeepEdaError
from .harness import (
    RUN_LOG_FIELDS,
    SUMMARY_FIELDS,
    RunRecord,
    Settings,
    export_results_csv,
    export_run_log_csv,
    export_weight_heatmap,
    load_config,
    run_sweep,
    table_report,
)
from .problems import generate_nk_instance, save_nk_instance


def _add_common(p):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--dump-config", action="store_true", help="print effective settings and exit")
    p.add_argument("--problem", choices=["onemax", "trap", "nk", "hiff"])
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, help="trap block size or NK neighbor count")
    p.add_argument("--model", choices=["dbm", "umda"])
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="deep-eda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one EDA run")
    _add_common(run)
    run.add_argument("--popsize", type=int)
    run.add_argument("--snapshot", help="save the final DBM parameters to this file")

    sweep = sub.add_parser("sweep", help="population-size sweep")
    _add_common(sweep)
    sweep.add_argument("--grid", help="comma-separated population sizes")
    sweep.add_argument("--runs", type=int, help="runs per population size")
    sweep.add_argument("--jobs", type=int, help="worker processes")
    sweep.add_argument("--no-early-stop", action="store_true")
    sweep.add_argument("--out", default="results", help="output directory (default: results)")
    sweep.add_argument("--no-plot", action="store_true", help="skip the PNG figure")

    heat = sub.add_parser("heatmap", help="W1 heatmap from a DBM parameter file")
    heat.add_argument("--params", required=True)
    heat.add_argument("--out", required=True, help="PGM output path")
    heat.add_argument("--png", help="also render a PNG figure here")

    gen = sub.add_parser("gen-nk", help="generate an NK instance with certified optimum")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    return parser


def _settings(args):
    settings = load_config(args.config) if args.config else Settings()
    overrides = {
        "problem": args.problem, "n": args.n, "k": args.k, "model": args.model, "seed": args.seed,
        "popsize": getattr(args, "popsize", None), "grid": getattr(args, "grid", None),
        "runs": getattr(args, "runs", None), "jobs": getattr(args, "jobs", None),
    }
    if getattr(args, "no_early_stop", False):
        overrides["early_stop"] = False
    return settings.updated(**overrides)


def cmd_run(args, out):
    settings = _settings(args)
    if args.dump_config:
        out.write(settings.dump())
        return 0
    problem = settings.make_problem()
    cfg = settings.eda_config()
    model = make_model(cfg)
    result = run_eda(problem, cfg, model=model)
    record = RunRecord(
        problem.label, cfg.population_size, cfg.seed, bool(result.solved), float(result.best_fitness),
        result.generations_used, result.unique_evaluations, float(result.wall_time),
    )
    writer = csv.writer(out)
    writer.writerow(RUN_LOG_FIELDS)
    writer.writerow([
        record.problem, record.popsize, record.seed, int(record.solved), repr(record.best_fitness),
        record.generations, record.unique_evals, f"{record.wall_s:.3f}",
    ])
    if result.failed:
        print(f"run failed: {result.error}", file=sys.stderr)
    if args.snapshot:
        if getattr(model, "last_params", None) is None:
            print("no DBM parameters to save (umda backend or no generation ran)", file=sys.stderr)
            return 1
        save_dbm(model.last_params, args.snapshot)
    return 0


def cmd_sweep(args, out):
    settings = _settings(args)
    if args.dump_config:
        out.write(settings.dump())
        return 0
    spec = settings.sweep_spec()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    def progress(row):
        logging.getLogger("deep_eda").info(
            "popsize %d: %d/%d solved", row.popsize, row.successes, row.runs
        )

    summary = run_sweep(spec, jobs=settings.jobs, progress=progress)
    export_results_csv(summary, outdir / "summary.csv")
    export_run_log_csv(summary, outdir / "runs.csv")
    if not args.no_plot:
        from .plotting import plot_sweep

        plot_sweep(summary, outdir / "sweep.png", title=spec.problem.label)

    writer = csv.writer(out)
    writer.writerow(SUMMARY_FIELDS)
    for r in summary.rows:
        writer.writerow([
            r.problem, r.popsize, r.runs, r.successes,
            *("" if x is None else f"{x:.6g}" for x in (r.mean_unique_evals, r.std_unique_evals, r.mean_wall_s, r.std_wall_s)),
        ])
    report = table_report(summary.rows, spec.runs_per_size)
    for key in ("50", "90"):
        row = report[key]
        out.write(f"# min popsize for >={key}% success: {row.popsize if row else '-'}\n")
    return 0


def cmd_heatmap(args, out):
    params = load_dbm(args.params)
    export_weight_heatmap(params, args.out)
    if args.png:
        from .plotting import plot_weights

        plot_weights(params.W1, args.png)
    out.write(f"wrote {args.out}\n")
    return 0


def cmd_gen_nk(args, out):
    inst = generate_nk_instance(args.n, args.k, args.seed)
    save_nk_instance(inst, args.out)
    out.write(f"wrote {args.out} (known optimum {inst.known_optimum:.17g})\n")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "heatmap": cmd_heatmap, "gen-nk": cmd_gen_nk}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args, out)
    except (DeepEdaError, OSError) as exc:
        print(f"deep-eda: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
