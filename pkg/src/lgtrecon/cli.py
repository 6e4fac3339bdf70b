"""Command-line entry point.

Exit codes: 0 success, 2 bad input or configuration, 3 model violation or
reconstruction abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .coupling import nonrecoverability_demo
from .distance import median_matrix, neighbor_joining
from .errors import InputError, ModelViolationError
from .highways import road_roller
from .lgt import LgtParams, generate_gene_trees, write_event_log
from .newick import read_trees, write_rates, write_trees
from .quartets import plurality_cover, quartet_frequencies, tree_from_cover
from .sequences import logdet_matrix, read_phylip


def _load(args):
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _write_tree(path, tree, lengths=True):
    with open(path, "w") as fh:
        fh.write(tree.newick(lengths=lengths) + "\n")


def cmd_simulate(args):
    cfg = _load(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    sp = harness.build_species(cfg, args.trial)
    highways = harness.resolve_highways(sp, cfg)
    samples = generate_gene_trees(sp, LgtParams(cfg.R, cfg.p, cfg.seed), cfg.genes, highways,
                                  stream=(args.trial,), details=True)
    _write_tree(out / "species.nwk", sp)
    write_rates(out / "rates.csv", sp)
    write_trees(out / "genes.nwk", [s.gene for s in samples])
    write_event_log(out / "events.csv", samples)
    print(f"wrote {cfg.genes} gene trees to {out}")


def cmd_reconstruct(args):
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "mt-seq":
        if not args.alignments:
            raise InputError("mt-seq needs --alignments")
        mats = []
        for g, path in enumerate(args.alignments):
            D, saturated = logdet_matrix(read_phylip(path, g))
            if saturated:
                print(f"{path}: {saturated} saturated pairs ignored", file=sys.stderr)
            mats.append(D)
        med = median_matrix(mats)
        med.matrix.to_csv(out / "median.csv")
        tree, lengths = neighbor_joining(med.matrix), True
    else:
        if not args.genes:
            raise InputError(f"{args.method} needs --genes")
        genes = [g for g in read_trees(args.genes, kind="gene") if not g.is_empty]
        if args.method == "qp":
            table = quartet_frequencies(genes)
            cover = plurality_cover(table)
            table.to_csv(out / "quartets.csv", cover.chosen)
            tree, lengths = tree_from_cover(cover), False
        else:
            med = median_matrix(genes)
            med.matrix.to_csv(out / "median.csv")
            tree, lengths = neighbor_joining(med.matrix), True
    _write_tree(out / "species.nwk", tree, lengths)
    print(tree.newick(lengths=lengths))


def cmd_experiment(args):
    cfg = _load(args)
    res = harness.run_experiment(cfg, out=cfg.out)
    print(json.dumps(res.summary(), sort_keys=True))


def cmd_sweep(args):
    cfg = _load(args)
    grid = [float(x) for x in args.grid.split(",")]
    if args.axis in ("N", "k"):
        grid = [int(x) for x in grid]
    harness.sweep(cfg, args.axis, grid, out=cfg.out)
    harness.report(Path(cfg.out) / "sweep.csv", Path(cfg.out) / "plot")
    print(f"wrote {Path(cfg.out) / 'sweep.csv'}")


def cmd_report(args):
    for p in harness.report(args.sweep, args.out or "."):
        print(p)


def cmd_highways(args):
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    genes = [g for g in read_trees(args.genes, kind="gene") if not g.is_empty]
    species, rep = road_roller(genes, gamma_lo=args.gamma_lo)
    _write_tree(out / "species.nwk", species, lengths=False)
    rep.to_csv(out / "highways.csv")
    for c in rep.calls:
        a, b = (sorted(s) for s in c.splits)
        arrow = "->" if c.oriented else "<->"
        print(f"component {c.component}: {{{','.join(a)}}} {arrow} {{{','.join(b)}}} "
              f"(support {c.support})")
    for a in rep.aborts:
        print(f"component {a.component}: aborted, {a.reason}", file=sys.stderr)


def cmd_nonrecover(args):
    rep = nonrecoverability_demo(args.n, args.lam, args.genes, args.trials, args.seed or 0)
    summary = rep.summary()
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / "coupling.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(summary, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the base seed")
    common.add_argument("--threads", type=int, default=None, help="worker processes")
    common.add_argument("--out", default=None, help="output directory")

    p = argparse.ArgumentParser(prog="lgtrecon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="species tree, genes and event log")
    s.add_argument("config")
    s.add_argument("--trial", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reconstruct", parents=[common], help="species topology from genes")
    s.add_argument("--method", choices=("qp", "mt", "mt-seq"), default="qp")
    s.add_argument("--genes", help="multi-tree Newick file")
    s.add_argument("--alignments", nargs="*", help="PHYLIP files, one per gene")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("experiment", parents=[common], help="Monte Carlo success rate")
    s.add_argument("config")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("sweep", parents=[common], help="success rate along one axis")
    s.add_argument("config")
    s.add_argument("--axis", required=True, choices=sorted(harness.SWEEP_AXES))
    s.add_argument("--grid", required=True, help="comma-separated values")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", parents=[common], help="plot data from a sweep CSV")
    s.add_argument("sweep")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("highways", parents=[common], help="locate LGT highways")
    s.add_argument("--genes", required=True)
    s.add_argument("--gamma-lo", type=float, default=0.1)
    s.set_defaults(func=cmd_highways)

    s = sub.add_parser("nonrecover", parents=[common], help="coupled-pair demonstration")
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--lam", type=float, default=240.0, help="expected events per gene")
    s.add_argument("--genes", type=int, default=10)
    s.add_argument("--trials", type=int, default=50)
    s.set_defaults(func=cmd_nonrecover)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelViolationError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
