"""Command-line entry point: ``run``, ``figure`` and ``check``."""

import argparse
import json
import sys

from .experiments import FIGURES, ExperimentConfig, emit_figure_data, feasibility_check, load_records, run_experiment


def _config(path):
    return ExperimentConfig.from_yaml(path) if path else ExperimentConfig()


def _cmd_run(args):
    cfg = _config(args.config).replace(seed=args.seed, trials=args.trials, schemes=args.schemes, out=args.out)
    done = [0]
    total = len(cfg.points()) * cfg.trials

    def progress(recs):
        done[0] += 1
        if not args.quiet:
            rates = " ".join(f"{r['scheme']}={r['sum_rate_bps_hz']:.3f}" if r["feasible"] else f"{r['scheme']}=infeasible"
                             for r in recs)
            print(f"[{done[0]}/{total}] point {recs[0]['point_id']} trial {recs[0]['trial']}: {rates}",
                  file=sys.stderr, flush=True)

    _, summary = run_experiment(cfg, progress=progress)
    for pid, entry in summary["points"].items():
        params = " ".join(f"{k}={v:g}" for k, v in entry["params"].items())
        cells = " ".join(f"{s}={d['mean_sum_rate']:.4f}({d['feasible_fraction']:.2f})"
                         for s, d in entry["schemes"].items())
        print(f"point {pid} [{params}] {cells}")
    print(f"wrote {cfg.out}/records.csv, details.jsonl, summary.json")
    return 0


def _cmd_figure(args):
    records = load_records(args.records)
    names = FIGURES if args.figure == "all" else [args.figure]
    for name in names:
        for path in emit_figure_data(records, name, args.out or args.records, plot=not args.no_plot):
            print(path)
    return 0


def _cmd_check(args):
    cfg = _config(args.config).replace(seed=args.seed, trials=args.trials)
    rows = feasibility_check(cfg)
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="irs-swipt", description="IRS-aided SWIPT sum-rate experiments")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a seeded Monte Carlo sweep")
    r.add_argument("--config", help="YAML config (defaults are used for missing keys)")
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--schemes", help="comma-separated subset of hybrid,ps,ts,tdma,tdma_d")
    r.add_argument("--out", help="output directory")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("figure", help="tabulate and plot results of a run")
    f.add_argument("--records", required=True, help="directory written by `run`")
    f.add_argument("--figure", required=True, choices=FIGURES + ("all",))
    f.add_argument("--out", help="output directory (default: the records directory)")
    f.add_argument("--no-plot", action="store_true", help="write the CSV table only")
    f.set_defaults(func=_cmd_figure)

    c = sub.add_parser("check", help="feasibility-only pass over the sweep")
    c.add_argument("--config")
    c.add_argument("--seed", type=int)
    c.add_argument("--trials", type=int)
    c.set_defaults(func=_cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
