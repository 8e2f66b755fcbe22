"""Command-line surface.

Commands: preprocess, align-eval, train, evaluate, sweep, search, report.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import corpus
from .alignment import evaluate_alignment, load_alignments
from .errors import ConfigError, DataError
from .experiment import (DEFAULT_SEARCH_SPACE, parse_config_file, random_search,
                         read_metrics, run_experiment, run_sweep, spec_from_config,
                         write_metrics, write_predictions)
from .model import Segmenter
from .training import BatchEncoder, make_translation_lookup, evaluate_model


def _add_common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--outdir", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="canoseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="parse IGT, extract instances, write splits")
    p.add_argument("--input", required=True)
    p.add_argument("--lang", default="default")
    _add_common(p)

    p = sub.add_parser("align-eval", help="score predicted alignments against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    _add_common(p)

    p = sub.add_parser("train", help="train per the experiment spec")
    _add_common(p)

    p = sub.add_parser("evaluate", help="decode a checkpoint over a data split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=["dev", "test"])
    _add_common(p)

    p = sub.add_parser("sweep", help="strategy-grid sweep (stage 2: CLS strategies)")
    p.add_argument("--stage2-top", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("search", help="sample hyperparameter configurations")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--space", default=None, help="JSON file overriding the search space")
    p.add_argument("--out", default=None)
    _add_common(p)

    p = sub.add_parser("report", help="re-render reports from stored run metrics")
    p.add_argument("--runs", required=True)
    _add_common(p)
    return parser


def _load_spec(args, require_config=True):
    values = {}
    if args.config:
        values = parse_config_file(args.config)
    elif require_config:
        raise ConfigError("--config is required for this command")
    overrides = {}
    if args.outdir is not None:
        overrides["outdir"] = args.outdir
    if args.workers is not None:
        overrides["workers"] = str(args.workers)
    if args.seed is not None:
        overrides["data.seed"] = str(args.seed)
    spec = spec_from_config(values, overrides)
    if args.workers is not None:
        spec.workers = args.workers
    return spec


def cmd_preprocess(args):
    outdir = args.outdir or "."
    os.makedirs(outdir, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    sentences = corpus.parse_igt_file(args.input)
    sentences = corpus.preprocess_sentences(sentences, corpus.rules_for(args.lang))
    instances = corpus.extract_instances(sentences, seed)
    train_split, dev_split, test_split = corpus.split(instances, seed=seed)
    corpus.write_instances(os.path.join(outdir, "instances.tsv"), instances)
    for name, part in (("train", train_split), ("dev", dev_split), ("test", test_split)):
        corpus.write_instances(os.path.join(outdir, f"{name}.tsv"), part)
    kept = len(corpus.validate_sentences(sentences))
    print(f"sentences={len(sentences)} valid={kept} instances={len(instances)} "
          f"train={len(train_split)} dev={len(dev_split)} test={len(test_split)}")
    return 0


def cmd_align_eval(args):
    with open(args.gold, encoding="utf-8") as f:
        n = len(f.read().splitlines())
    ids = [f"s{i:05d}" for i in range(n)]
    gold = load_alignments(args.gold, ids)
    pred = load_alignments(args.pred, ids)
    score = evaluate_alignment(list(pred.values()), list(gold.values()))
    print(f"precision={score.precision:.4f}")
    print(f"recall={score.recall:.4f}")
    print(f"f1={score.f1:.4f}")
    return 0


def cmd_train(args):
    spec = _load_spec(args)
    rows = run_experiment(spec)
    print(f"wrote {os.path.join(spec.outdir, 'results.csv')} ({len(rows)} rows)")
    return 0


def cmd_evaluate(args):
    spec = _load_spec(args)
    model = Segmenter.load(args.checkpoint)
    from .experiment import prepare_data  # local import to keep CLI startup light
    bundle = prepare_data(spec)
    insts = bundle.dev if args.split == "dev" else bundle.test
    lookup = None
    if model.cfg.needs_translation():
        lookup = make_translation_lookup(bundle.embeddings, bundle.alignments)
    encoder = BatchEncoder(model.src_vocab, model.tgt_vocab, lookup, model.cfg.np_dtype)
    preds, result = evaluate_model(model, insts, encoder)
    outdir = spec.outdir
    os.makedirs(outdir, exist_ok=True)
    write_predictions(os.path.join(outdir, f"predictions.{args.split}.tsv"),
                      [i.surface for i in insts], [i.canonical for i in insts], preds)
    write_metrics(os.path.join(outdir, f"metrics.{args.split}.txt"), {
        "accuracy": result.accuracy, "f1": result.f1,
        "precision": result.precision, "recall": result.recall,
        "edit_distance": result.edit_distance,
    })
    print(f"accuracy={result.accuracy:.4f} f1={result.f1:.4f} "
          f"edit_distance={result.edit_distance}")
    return 0


def cmd_sweep(args):
    spec = _load_spec(args)
    out = run_sweep(spec, stage2_top=getattr(args, "stage2_top", 0))
    result = out[0] if isinstance(out, tuple) else out
    print(f"sweep rows={len(result.rows)} -> {os.path.join(spec.outdir, 'sweep.csv')}")
    return 0


def cmd_search(args):
    space = DEFAULT_SEARCH_SPACE
    if args.space:
        with open(args.space, encoding="utf-8") as f:
            space = json.load(f)
    seed = args.seed if args.seed is not None else 0
    samples = random_search(space, args.n, seed)
    text = "\n".join(json.dumps(s, sort_keys=True) for s in samples) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args):
    """Collect per-run metrics files under a runs directory into one CSV."""
    import csv

    rows = []
    for dirpath, _dirnames, filenames in sorted(os.walk(args.runs)):
        if "metrics.txt" not in filenames:
            continue
        rel = os.path.relpath(dirpath, args.runs)
        parts = rel.split(os.sep)
        metrics = read_metrics(os.path.join(dirpath, "metrics.txt"))
        rows.append((parts, metrics))
    outdir = args.outdir or "."
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "report.csv")
    keys = sorted({k for _, m in rows for k in m})
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["run"] + keys)
        for parts, metrics in rows:
            w.writerow(["/".join(parts)] + [f"{metrics.get(k, 0.0):.4f}" for k in keys])
    print(f"wrote {path} ({len(rows)} runs)")
    return 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "align-eval": cmd_align_eval,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "search": cmd_search,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
