"""Command-line front end.

Subcommands: ``simulate``, ``analyze``, ``demo-ranking``, ``list-configs``.

Exit codes:
    0  success
    2  usage error, unreadable/invalid config, malformed input
    3  runtime failure during a simulation
    4  a group is below the Lfdr estimation floor
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .exceptions import BatchFormatError, ConfigurationError, EstimationError, WFDRError
from .lfdr import LfdrOptions, estimate_lfdr, oracle_lfdr, pvalues
from .metrics import replication_metrics
from .model import GaussianComponent, GroupSpec, HypothesisBatch, MixtureModel, read_batch_csv
from .procedures import PROCEDURES, apply_procedure
from .ranking import r_stat, vcr, wpo_stat
from .sim import (ReplicationError, builtin_configs, default_threads, get_builtin, load_config,
                  run_experiment, write_outputs)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_FLOOR = 0, 2, 3, 4

# the two worked-example units: label, x, b (a = 1) and their stated Lfdr
DEMO_UNITS = (("A", 2.73, 83.32, 0.112), ("B", 3.11, 11.95, 0.055))
DEMO_MODEL = MixtureModel.single(2, 0.2, 2.0)


def ranking_demo(alpha):
    """Rows (unit, x, b, Lfdr, WPO, VCR, R) for the two demonstration units.

    The statistics are computed from the units' stated Lfdr values, which are
    given to three decimals.  ``lfdr_model`` is the value implied by a
    N(0,1)/N(2,1) mixture with non-null proportion 0.2, shown as a cross-check;
    VCR near ``alpha`` is too sensitive to use it directly.  Returns
    ``(rows, order)`` with ``order`` the unit labels by ascending R.
    """
    batch = HypothesisBatch(x=[u[1] for u in DEMO_UNITS], b=[u[2] for u in DEMO_UNITS])
    implied = oracle_lfdr(DEMO_MODEL, batch).values
    rows = []
    for (label, x, b, lf), lf_model in zip(DEMO_UNITS, implied):
        rows.append({
            "unit": label, "x": x, "b": b, "lfdr": lf, "lfdr_model": float(lf_model),
            "wpo": wpo_stat(lf, 1.0, b),
            "vcr": vcr(lf, 1.0, b, alpha) if lf != alpha else float("nan"),
            "r": r_stat(lf, 1.0, b, alpha),
        })
    order = [r["unit"] for r in sorted(rows, key=lambda r: r["r"])]
    return rows, order


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    parser = _Parser(prog="wfdr", description="Weighted FDR control and simulation studies.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a built-in or custom simulation study")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON experiment config")
    src.add_argument("--builtin", help="name of a built-in config (see list-configs)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, help="override the master seed")
    sim.add_argument("--reps", type=int, help="override the number of replications")
    sim.add_argument("--threads", type=int, help="worker processes (default: $WFDR_THREADS or CPU count)")

    an = sub.add_parser("analyze", help="apply a procedure to a batch CSV")
    an.add_argument("--input", required=True, help="CSV with columns x[,a,b,group,theta]")
    an.add_argument("--alpha", type=float, default=0.1)
    an.add_argument("--method", choices=PROCEDURES, default="dd")
    an.add_argument("--lfdr", choices=("oracle", "estimate"), default="estimate")
    an.add_argument("--null-mean", type=float, default=0.0)
    an.add_argument("--null-sd", type=float, default=1.0)
    an.add_argument("--p", type=_float_list, help="oracle non-null proportion, one per group")
    an.add_argument("--alt-mean", type=_float_list, help="oracle non-null mean, one per group")
    an.add_argument("--alt-sd", type=_float_list, help="oracle non-null sd, one per group (default 1)")
    an.add_argument("--tail", choices=("upper", "lower", "two-sided"), default="upper",
                    help="p-value tail for proportion estimation and reported p-values")
    an.add_argument("--lambda", dest="lam", type=float, default=0.5)
    an.add_argument("--min-group-size", type=int, default=50)
    an.add_argument("--seed", type=int, default=0, help="seed for the oracle's randomization")
    an.add_argument("--out", required=True, help="per-hypothesis output CSV")

    demo = sub.add_parser("demo-ranking", help="show how the optimal ranking depends on alpha")
    demo.add_argument("--alpha", type=float, default=0.05)
    demo.add_argument("--out", help="optional CSV copy of the table")

    sub.add_parser("list-configs", help="list built-in simulation configs")
    return parser


def _cmd_simulate(args):
    try:
        cfg = load_config(args.config) if args.config else get_builtin(args.builtin)
        changes = {}
        if args.seed is not None:
            changes["master_seed"] = args.seed
        if args.reps is not None:
            changes["reps"] = args.reps
        if changes:
            cfg = cfg.replace(**changes)
        threads = args.threads if args.threads is not None else default_threads()
        if threads < 1:
            raise ConfigurationError("--threads must be >= 1")
    except ConfigurationError as exc:
        print(f"wfdr simulate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        summary = run_experiment(cfg, threads=threads)
        csv_path, man_path = write_outputs(summary, args.out, threads=threads)
    except ReplicationError as exc:
        print(f"wfdr simulate: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (WFDRError, OSError) as exc:
        print(f"wfdr simulate: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{cfg.name}: {len(summary.rows)} rows, {cfg.reps} reps, {summary.wall_time:.1f}s")
    for rec in summary.to_records():
        print(f"  {rec['sweep_value']!s:>8} {rec['procedure']:<16} wFDR={rec['wfdr_ratio']:.4f} "
              f"(BH def {rec['wfdr_bh']:.4f})  ETP={rec['etp']:.1f}")
    print(f"wrote {csv_path} and {man_path}")
    return EXIT_OK


def _oracle_model(args, batch):
    if args.p is None or args.alt_mean is None:
        raise ConfigurationError("--lfdr oracle needs --p and --alt-mean")
    n_groups = int(batch.group.max()) + 1
    def expand(vals, name):
        if len(vals) == 1:
            return vals * n_groups
        if len(vals) != n_groups:
            raise ConfigurationError(f"--{name} has {len(vals)} values for {n_groups} groups")
        return vals
    ps = expand(args.p, "p")
    mus = expand(args.alt_mean, "alt-mean")
    sds = expand(args.alt_sd or [1.0], "alt-sd")
    sizes = np.bincount(batch.group, minlength=n_groups)
    null = GaussianComponent(args.null_mean, args.null_sd)
    return MixtureModel(tuple(GroupSpec(max(1, int(n)), p, null, GaussianComponent(mu, sd))
                              for n, p, mu, sd in zip(sizes, ps, mus, sds)))


def _cmd_analyze(args):
    try:
        if not 0.0 < args.alpha < 1.0 and args.method != "pfer-oracle":
            raise ConfigurationError("--alpha must lie in (0, 1)")
        batch = read_batch_csv(args.input)
        null = GaussianComponent(args.null_mean, args.null_sd)
        model = None
        if args.lfdr == "oracle" or args.method in ("oracle", "pfer-oracle"):
            model = _oracle_model(args, batch)
        opts = LfdrOptions(lam=args.lam, min_group_size=args.min_group_size, null=null, tail=args.tail)
    except (BatchFormatError, ConfigurationError) as exc:
        print(f"wfdr analyze: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        lfdr = oracle_lfdr(model, batch) if args.lfdr == "oracle" else estimate_lfdr(batch, opts)
    except EstimationError as exc:
        print(f"wfdr analyze: {exc}", file=sys.stderr)
        return EXIT_FLOOR
    pv = pvalues(batch.x, args.tail, null)
    oracle = oracle_lfdr(model, batch) if args.method == "oracle" else None
    try:
        d = apply_procedure(args.method, batch, args.alpha, lfdr, pvals=pv, oracle=oracle,
                            model=model, seed=args.seed)
    except ConfigurationError as exc:
        print(f"wfdr analyze: {exc}", file=sys.stderr)
        return EXIT_USAGE

    alpha_r = min(max(args.alpha, 1e-12), 1 - 1e-12)
    r = np.asarray(r_stat(lfdr.values, batch.a, batch.b, alpha_r)).reshape(batch.m)
    rank = np.empty(batch.m, dtype=int)
    rank[d.order] = np.arange(1, batch.m + 1)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "x", "a", "b", "group", "lfdr", "r_stat", "rank", "rejected", "pvalue"])
        for i in range(batch.m):
            w.writerow([i, repr(float(batch.x[i])), repr(float(batch.a[i])), repr(float(batch.b[i])),
                        int(batch.group[i]), repr(float(lfdr.values[i])), repr(float(r[i])),
                        int(rank[i]), int(d.reject[i]), repr(float(pv[i]))])

    groups = {}
    for gid in batch.group_ids:
        idx = (batch.group == gid)
        rej = idx & (d.reject == 1)
        groups[str(int(gid))] = {
            "size": int(idx.sum()),
            "rejected": int(rej.sum()),
            "max_rejected_pvalue": float(pv[rej].max()) if rej.any() else None,
        }
    summary = {"method": args.method, "alpha": args.alpha, "lfdr": args.lfdr,
               "num_rejected": d.num_rejected, "k": d.trace.k, "groups": groups}
    if d.randomized is not None:
        summary["randomized"] = {"index": d.randomized.index,
                                 "accept_probability": d.randomized.accept_probability,
                                 "realized": d.randomized.realized}
    if batch.has_truth():
        rm = replication_metrics(d, batch)
        summary["weighted_fdp"] = rm.weighted_fdp
        summary["weighted_true_positives"] = rm.weighted_true_pos
    summary_path = os.path.splitext(args.out)[0] + ".summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)

    print(f"{args.method}: rejected {d.num_rejected} of {batch.m} (k={d.trace.k}) at alpha={args.alpha}")
    for gid, g in groups.items():
        thr = "-" if g["max_rejected_pvalue"] is None else f"{g['max_rejected_pvalue']:.3g}"
        print(f"  group {gid}: {g['rejected']}/{g['size']} rejected, max rejected p-value {thr}")
    if "weighted_fdp" in summary:
        print(f"  realized weighted FDP {summary['weighted_fdp']:.4f}")
    print(f"wrote {args.out} and {summary_path}")
    return EXIT_OK


def _cmd_demo(args):
    if not 0.0 < args.alpha < 1.0:
        print("wfdr demo-ranking: --alpha must lie in (0, 1)", file=sys.stderr)
        return EXIT_USAGE
    rows, order = ranking_demo(args.alpha)
    print(f"alpha = {args.alpha}")
    print(f"{'unit':<5}{'x':>7}{'b':>8}{'Lfdr':>8}{'(model)':>9}{'WPO':>9}{'VCR':>10}{'R':>11}")
    for r in rows:
        print(f"{r['unit']:<5}{r['x']:>7.2f}{r['b']:>8.2f}{r['lfdr']:>8.3f}{r['lfdr_model']:>9.4f}"
              f"{r['wpo']:>9.4f}{r['vcr']:>10.1f}{r['r']:>11.6f}")
    wpo_order = [r["unit"] for r in sorted(rows, key=lambda r: r["wpo"])]
    print(f"order by R (VCR): {', '.join(order)}")
    print(f"order by WPO:     {', '.join(wpo_order)}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["unit", "x", "b", "lfdr", "lfdr_model", "wpo", "vcr", "r"])
            w.writeheader()
            w.writerows(rows)
    return EXIT_OK


def _cmd_list(args):
    for cfg in builtin_configs():
        sweep = f"sweep {cfg.sweep.param} over {list(cfg.sweep.values)}" if cfg.sweep else "no sweep"
        print(f"{cfg.name:<16} m={cfg.model.m:<5} alpha={cfg.alpha:<5} "
              f"procedures={','.join(cfg.procedures)}; {sweep}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"simulate": _cmd_simulate, "analyze": _cmd_analyze,
                "demo-ranking": _cmd_demo, "list-configs": _cmd_list}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
