"""``lagr`` command-line interface."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import cfq as cfq_mod
from . import cogs as cogs_mod
from .graphs import MRGraph, strip_nulls
from .isomorphism import graph_isomorphic

log = logging.getLogger("lagr")


def _cmd_train(args):
    from .harness import load_config, run_with_restarts

    cfg = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    report = run_with_restarts(cfg)
    print(json.dumps({"status": report.status, "attempts": report.attempts,
                      "checkpoint": str(report.result.checkpoint) if report.result else None}))
    return 0 if report.status == "accepted" else 2


def _cmd_eval(args):
    from .harness import evaluate

    report = evaluate(args.ckpt, args.split, data_dir=args.data_dir, predictions=args.predictions)
    print(json.dumps(report, indent=1, sort_keys=True))
    return 0


def _cmd_retrain(args):
    from .harness import load_config, retrain

    cfg = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    result = retrain(args.alignments, cfg)
    print(json.dumps({"train_acc": result.train_acc, "dev_acc": result.dev_acc,
                      "checkpoint": str(result.checkpoint)}))
    return 0


def _cmd_convert(args):
    n_ok = n_bad = 0
    with open(args.out, "w") as out:
        if args.dataset == "cogs":
            for ex in cogs_mod.read_cogs_tsv(args.inp):
                try:
                    g = strip_nulls(cogs_mod.graph_of(ex))
                except cogs_mod.LogicalFormError as exc:
                    log.warning("%s: %s", ex.id, exc)
                    n_bad += 1
                    continue
                out.write(json.dumps({"id": ex.id, "tokens": list(ex.tokens), "graph": g.to_json()}) + "\n")
                n_ok += 1
        else:
            for ex in cfq_mod.read_cfq_jsonl(args.inp):
                try:
                    g = cfq_mod.sparql_to_graph(ex.sparql)
                except ValueError as exc:
                    log.warning("%s: %s", ex.id, exc)
                    n_bad += 1
                    continue
                out.write(json.dumps({"id": ex.id, "question": ex.question, "graph": g.to_json()}) + "\n")
                n_ok += 1
    print(f"converted {n_ok} examples, {n_bad} rejected")
    return 0 if n_ok or not n_bad else 1


def read_graph_line(line):
    """A graph from one line: graph JSON, ``{"graph": ...}`` JSON, or SPARQL text."""
    line = line.strip()
    if line.startswith("{"):
        obj = json.loads(line)
        return MRGraph.from_json(obj.get("graph", obj))
    if not line:
        return MRGraph()
    return cfq_mod.sparql_to_graph(line)


def _cmd_graph_acc(args):
    preds = Path(args.pred).read_text().splitlines()
    golds = Path(args.gold).read_text().splitlines()
    if len(preds) != len(golds):
        print(f"error: {len(preds)} predictions but {len(golds)} gold graphs", file=sys.stderr)
        return 1
    hits = 0
    for i, (p, g) in enumerate(zip(preds, golds), 1):
        try:
            pred = read_graph_line(p)
        except ValueError as exc:
            log.warning("prediction line %d unreadable: %s", i, exc)
            continue
        hits += graph_isomorphic(pred, read_graph_line(g))
    n = len(golds)
    print(json.dumps({"n": n, "correct": hits, "graph_accuracy": hits / n if n else 0.0}))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lagr", description="Label aligned graphs semantic parser")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train with restarts from a key=value config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--data-dir")
    p.add_argument("--predictions")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("retrain", help="strong training on dumped alignments")
    p.add_argument("--alignments", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_retrain)

    p = sub.add_parser("convert", help="dataset file to graph JSON lines")
    p.add_argument("--dataset", choices=("cogs", "cfq"), required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("graph-acc", help="graph accuracy of predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=_cmd_graph_acc)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
