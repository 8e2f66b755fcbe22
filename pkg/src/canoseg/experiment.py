"""Experiment harness: spec files, multi-seed training runs over train-size
limits, the two-stage strategy sweep, random hyperparameter search, and
report emission.

Run artifacts land under ``<outdir>/runs/<spec-hash>/<config>/<limit>/<seed>/``;
reports are deterministic byte-for-byte given an identical spec.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import corpus
from .alignment import load_alignments
from .errors import BadSpace, ConfigError, DataError
from .metrics import aggregate_runs
from .model import (ModelConfig,
                    Segmenter, normalize_strategy)
from .training import (BatchEncoder, TrainConfig, evaluate_model,
                       make_translation_lookup, model_defaults, regime_for_limit,
                       train)
from .transrepr import load_embeddings, normalize_cls_strategy

PAPER_ENC_GRID = ("Init-State", "Concat", "Concat-Half", "None", "Init-Char")
PAPER_DEC_GRID = ("Concat-Half", "Init-State", "Concat", "None")
PAPER_CLS_GRID = ("CLS-None", "CLS-Avg", "CLS-Concat")


@dataclass(frozen=True)
class StrategyConfig:
    enc: str
    dec: str
    cls: str

    @property
    def is_baseline(self):
        return self.enc == "None" and self.dec == "None"

    def label(self):
        if self.is_baseline:
            return "enc-None__dec-None"
        return f"enc-{self.enc}__dec-{self.dec}__cls-{self.cls}"


@dataclass
class ExperimentSpec:
    igt_path: str
    lang: str = "default"
    pipeline_seed: int = 0
    embeddings_path: str | None = None
    alignments_path: str | None = None
    limits: list = field(default_factory=lambda: [None])
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    sweep_seeds: list = field(default_factory=lambda: [1])
    regime: str = "auto"
    eval_split: str = "test"
    strategies: list = field(default_factory=lambda: [StrategyConfig("None", "None", "CLS-None")])
    enc_grid: tuple = PAPER_ENC_GRID
    dec_grid: tuple = PAPER_DEC_GRID
    cls_grid: tuple = PAPER_CLS_GRID
    model_overrides: dict = field(default_factory=dict)
    train_overrides: dict = field(default_factory=dict)
    outdir: str = "out"
    workers: int = 1

    def validate(self):
        if not os.path.exists(self.igt_path):
            raise ConfigError(f"igt file not found: {self.igt_path}")
        if self.eval_split not in ("dev", "test"):
            raise ConfigError(f"eval_split must be dev or test, got {self.eval_split!r}")
        if self.regime not in ("auto", "small100", "standard"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        needs_alignment = any(
            not s.is_baseline and s.cls != "CLS-Only" for s in self.strategies)
        needs_embeddings = any(not s.is_baseline for s in self.strategies)
        if needs_embeddings and not self.embeddings_path:
            raise ConfigError("embeddings_path is required for translation strategies")
        if needs_alignment and not self.alignments_path:
            raise ConfigError("alignments_path is required unless all strategies are "
                              "baseline or CLS-Only")

    def fingerprint(self):
        """Hash of everything that affects results (not the output location)."""
        d = {k: v for k, v in self.__dict__.items() if k not in ("outdir", "workers")}
        d["strategies"] = [s.label() for s in self.strategies]
        blob = json.dumps(d, sort_keys=True, default=str).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# spec files: flat key-value lines with dotted section prefixes


def parse_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _parse_limits(s):
    out = []
    for tok in s.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(None if tok.lower() in ("all", "full") else int(tok))
    return out


def _parse_ints(s):
    return [int(t) for t in s.split(",") if t.strip()]


def _parse_strategy_list(s, decoder=False):
    return tuple(normalize_strategy(t.strip(), decoder=decoder)
                 for t in s.split(",") if t.strip())


MODEL_OVERRIDE_KEYS = {"arch": str, "emb": int, "hid": int, "enc_layers": int,
                       "dec_layers": int, "dropout": float, "plm_dim": int,
                       "bidirectional_encoder": lambda s: s.lower() in ("1", "true", "yes")}
TRAIN_OVERRIDE_KEYS = {"batch_size": int, "max_epochs": int, "lr": float,
                       "beta1": float, "beta2": float, "factor": float,
                       "patience": int, "min_lr": float, "scheduler": str,
                       "early_stop_accuracy": float}


def spec_from_config(values, overrides=None):
    """Build an ExperimentSpec from flat key-value pairs; ``overrides``
    (typically CLI flags) win over file values."""
    merged = dict(values)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    if "data.igt" not in merged:
        raise ConfigError("missing required key data.igt")
    spec = ExperimentSpec(igt_path=merged["data.igt"])
    if "data.lang" in merged:
        spec.lang = merged["data.lang"]
    if "data.seed" in merged:
        spec.pipeline_seed = int(merged["data.seed"])
    if "data.embeddings" in merged:
        spec.embeddings_path = merged["data.embeddings"]
    if "data.alignments" in merged:
        spec.alignments_path = merged["data.alignments"]
    if "limits" in merged:
        spec.limits = _parse_limits(merged["limits"])
    if "seeds" in merged:
        spec.seeds = _parse_ints(merged["seeds"])
    if "sweep.seeds" in merged:
        spec.sweep_seeds = _parse_ints(merged["sweep.seeds"])
    if "regime" in merged:
        spec.regime = merged["regime"]
    if "eval_split" in merged:
        spec.eval_split = merged["eval_split"]
    if "strategy.enc" in merged or "strategy.dec" in merged or "strategy.cls" in merged:
        spec.strategies = [StrategyConfig(
            normalize_strategy(merged.get("strategy.enc", "None")),
            normalize_strategy(merged.get("strategy.dec", "None"), decoder=True),
            normalize_cls_strategy(merged.get("strategy.cls", "CLS-None")))]
    if "sweep.enc" in merged:
        spec.enc_grid = _parse_strategy_list(merged["sweep.enc"])
    if "sweep.dec" in merged:
        spec.dec_grid = _parse_strategy_list(merged["sweep.dec"], decoder=True)
    if "sweep.cls" in merged:
        spec.cls_grid = tuple(normalize_cls_strategy(t.strip())
                              for t in merged["sweep.cls"].split(",") if t.strip())
    for key, conv in MODEL_OVERRIDE_KEYS.items():
        if f"model.{key}" in merged:
            spec.model_overrides[key] = conv(merged[f"model.{key}"])
    for key, conv in TRAIN_OVERRIDE_KEYS.items():
        if f"train.{key}" in merged:
            spec.train_overrides[key] = conv(merged[f"train.{key}"])
    if "outdir" in merged:
        spec.outdir = merged["outdir"]
    if "workers" in merged:
        spec.workers = int(merged["workers"])
    return spec


# ---------------------------------------------------------------------------
# data preparation


@dataclass
class DataBundle:
    train: list
    dev: list
    test: list
    embeddings: dict | None
    alignments: dict | None


def prepare_data(spec):
    sentences = corpus.parse_igt_file(spec.igt_path)
    sentences = corpus.preprocess_sentences(sentences, corpus.rules_for(spec.lang))
    alignments = None
    if spec.alignments_path:
        alignments = load_alignments(spec.alignments_path, [s.id for s in sentences])
    instances = corpus.extract_instances(sentences, spec.pipeline_seed)
    if not instances:
        raise DataError(f"{spec.igt_path}: no usable instances after preprocessing")
    train_split, dev_split, test_split = corpus.split(instances, seed=spec.pipeline_seed)
    embeddings = load_embeddings(spec.embeddings_path) if spec.embeddings_path else None
    return DataBundle(train_split, dev_split, test_split, embeddings, alignments)


# ---------------------------------------------------------------------------
# single runs


def _resolve_regime(spec, limit):
    return spec.regime if spec.regime != "auto" else regime_for_limit(limit)


def run_one(spec, strategy, limit, seed, bundle, eval_split=None):
    """Train one (strategy, limit, seed) cell and evaluate it."""
    eval_split = eval_split or spec.eval_split
    regime = _resolve_regime(spec, limit)
    train_insts = bundle.train if limit is None else corpus.subsample(bundle.train, limit, seed)
    src_vocab, tgt_vocab = corpus.build_vocab(train_insts)

    model_kwargs = model_defaults(regime)
    model_kwargs.update(spec.model_overrides)
    if bundle.embeddings:
        dims = {e.dim for e in bundle.embeddings.values()}
        model_kwargs.setdefault("plm_dim", dims.pop())
    cfg = ModelConfig(arch=model_kwargs.pop("arch", "PointerGenerator"),
                      enc_strategy=strategy.enc, dec_strategy=strategy.dec,
                      cls_strategy=strategy.cls, **model_kwargs)
    tcfg = TrainConfig.from_regime(regime, seed=seed,
                                   dropout=model_kwargs.get("dropout",
                                                            cfg.dropout),
                                   **spec.train_overrides)
    model = Segmenter(cfg, src_vocab, tgt_vocab, seed=seed)
    embeddings = bundle.embeddings if cfg.needs_translation() else None
    alignments = bundle.alignments if cfg.needs_translation() else None
    best_state, dev_result = train(model, train_insts, bundle.dev, embeddings,
                                   alignments, tcfg)

    eval_insts = bundle.dev if eval_split == "dev" else bundle.test
    lookup = None
    if cfg.needs_translation():
        lookup = make_translation_lookup(bundle.embeddings, bundle.alignments)
    encoder = BatchEncoder(src_vocab, tgt_vocab, lookup, cfg.np_dtype)
    preds, result = evaluate_model(model, eval_insts, encoder)
    result.history = dev_result.history
    return model, preds, eval_insts, result


def _run_cell(args):
    spec, strategy, limit, seed, eval_split = args
    bundle = prepare_data(spec)
    model, preds, eval_insts, result = run_one(spec, strategy, limit, seed, bundle,
                                               eval_split)
    run_dir = _run_dir(spec, strategy, limit, seed)
    os.makedirs(run_dir, exist_ok=True)
    model.save(os.path.join(run_dir, "checkpoint.txt"),
               extra_header={"strategy": strategy.label(), "limit": _limit_label(limit),
                             "run_seed": str(seed)})
    write_predictions(os.path.join(run_dir, "predictions.tsv"),
                      [e.surface for e in eval_insts],
                      [e.canonical for e in eval_insts], preds)
    write_metrics(os.path.join(run_dir, "metrics.txt"), {
        "accuracy": result.accuracy, "f1": result.f1,
        "precision": result.precision, "recall": result.recall,
        "edit_distance": result.edit_distance, "epochs": len(result.history),
    })
    return result


def _limit_label(limit):
    return "all" if limit is None else str(limit)


def _run_dir(spec, strategy, limit, seed):
    return os.path.join(spec.outdir, "runs", spec.fingerprint(), strategy.label(),
                        _limit_label(limit), str(seed))


# ---------------------------------------------------------------------------
# experiment and sweep drivers


def run_experiment(spec):
    """Train every (strategy, limit, seed) cell; per-(strategy, limit)
    aggregates use the sample standard deviation over seeds."""
    spec.validate()
    cells = [(spec, strategy, limit, seed, spec.eval_split)
             for strategy in spec.strategies
             for limit in spec.limits
             for seed in spec.seeds]
    results = _execute(cells, spec.workers)
    rows = []
    idx = 0
    for strategy in spec.strategies:
        for limit in spec.limits:
            per_seed = []
            for seed in spec.seeds:
                r = results[idx]
                idx += 1
                rows.append({"config": strategy.label(), "limit": _limit_label(limit),
                             "seed": seed, "accuracy": r.accuracy, "f1": r.f1,
                             "edit_distance": r.edit_distance})
                per_seed.append(r)
            agg = aggregate_runs(per_seed)
            rows.append({"config": strategy.label(), "limit": _limit_label(limit),
                         "seed": "mean", "accuracy": agg.mean["accuracy"],
                         "f1": agg.mean["f1"], "edit_distance": agg.mean["edit_distance"]})
            rows.append({"config": strategy.label(), "limit": _limit_label(limit),
                         "seed": "std", "accuracy": agg.std["accuracy"],
                         "f1": agg.std["f1"], "edit_distance": agg.std["edit_distance"]})
    os.makedirs(spec.outdir, exist_ok=True)
    report_path = os.path.join(spec.outdir, "results.csv")
    with open(report_path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["config", "limit", "seed", "accuracy", "f1", "edit_distance"])
        for row in rows:
            w.writerow([row["config"], row["limit"], row["seed"],
                        _fmt4(row["accuracy"]), _fmt4(row["f1"]),
                        _fmt4(row["edit_distance"])])
    return rows


def _execute(cells, workers):
    if workers <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, cells))


@dataclass
class SweepRow:
    enc: str
    dec: str
    cls: str
    accuracy: dict      # limit label -> dev accuracy
    average: float
    is_baseline: bool


@dataclass
class SweepResult:
    rows: list
    limits: list


def run_sweep(spec, stage2_top=0):
    """Stage 1: the full encoder x decoder grid with CLS-None (the baseline
    pair carries no CLS choice), dev accuracy per train limit, rows sorted by
    the cross-limit average, descending.  Stage 2 (optional): the CLS grid
    over the ``stage2_top`` best non-baseline stage-1 configurations."""
    for dec in spec.dec_grid:
        normalize_strategy(dec, decoder=True)  # rejects Init-Char in the decoder
    stage1 = [StrategyConfig(enc, dec, "CLS-None") for enc in spec.enc_grid
              for dec in spec.dec_grid]
    sweep_spec = replace(spec, strategies=stage1, eval_split="dev",
                         seeds=list(spec.sweep_seeds))
    sweep_spec.validate()
    rows = _sweep_rows(sweep_spec, stage1)
    result = SweepResult(rows=rows, limits=[_limit_label(l) for l in spec.limits])
    os.makedirs(spec.outdir, exist_ok=True)
    write_sweep_report(os.path.join(spec.outdir, "sweep"), result)

    if stage2_top > 0:
        leaders = [r for r in result.rows if not r.is_baseline][:stage2_top]
        stage2 = [StrategyConfig(r.enc, r.dec, cls)
                  for r in leaders for cls in spec.cls_grid]
        spec2 = replace(spec, strategies=stage2, eval_split="dev",
                        seeds=list(spec.sweep_seeds))
        spec2.validate()
        rows2 = _sweep_rows(spec2, stage2)
        baseline_rows = [r for r in result.rows if r.is_baseline]
        result2 = SweepResult(rows=_sort_rows(rows2 + baseline_rows), limits=result.limits)
        write_sweep_report(os.path.join(spec.outdir, "cls_sweep"), result2)
        return result, result2
    return result


def _sweep_rows(spec, strategies):
    cells = [(spec, strategy, limit, seed, "dev")
             for strategy in strategies
             for limit in spec.limits
             for seed in spec.seeds]
    results = _execute(cells, spec.workers)
    rows = []
    idx = 0
    for strategy in strategies:
        acc = {}
        for limit in spec.limits:
            per_seed = [results[idx + i] for i in range(len(spec.seeds))]
            idx += len(spec.seeds)
            acc[_limit_label(limit)] = float(np.mean([r.accuracy for r in per_seed]))
        avg = float(np.mean(list(acc.values())))
        rows.append(SweepRow(enc=strategy.enc, dec=strategy.dec,
                             cls=strategy.cls if not strategy.is_baseline else "-",
                             accuracy=acc, average=avg,
                             is_baseline=strategy.is_baseline))
    return _sort_rows(rows)


def _sort_rows(rows):
    return sorted(rows, key=lambda r: (-r.average, r.enc, r.dec, r.cls))


# ---------------------------------------------------------------------------
# random hyperparameter search


DEFAULT_SEARCH_SPACE = {
    "arch": {"dist": "categorical", "values": ["PointerGenerator", "AttentiveLSTM"]},
    "emb": {"dist": "q_uniform", "min": 128, "max": 1024, "q": 64},
    "hid": {"dist": "q_uniform", "min": 128, "max": 2048, "q": 64},
    "dropout": {"dist": "uniform", "min": 0.0, "max": 0.5},
    "batch_size": {"dist": "categorical", "values": [16, 32, 64]},
    "lr": {"dist": "log_uniform", "min": 1e-6, "max": 0.01},
    "beta1": {"dist": "uniform", "min": 0.8, "max": 0.999},
    "beta2": {"dist": "uniform", "min": 0.98, "max": 0.999},
    "scheduler": {"dist": "categorical",
                  "values": ["reduceonplateau", "warmupinvsqrt", None]},
    "conditional": {
        "arch": {
            "PointerGenerator": {"attention_heads": [1], "enc_layers": [1, 2],
                                 "dec_layers": [1, 2]},
            "AttentiveLSTM": {"attention_heads": [1], "enc_layers": [1, 2],
                              "dec_layers": [1, 2]},
        },
        "scheduler": {
            "reduceonplateau": {
                "factor": {"dist": "uniform", "min": 0.1, "max": 0.9},
                "patience": {"dist": "q_uniform", "min": 10, "max": 50, "q": 1},
                "min_lr": {"dist": "uniform", "min": 1e-7, "max": 0.001},
            },
            "warmupinvsqrt": {
                "warmup_samples": {"dist": "q_uniform", "min": 0, "max": 5_000_000,
                                   "q": 1},
            },
        },
    },
}


def _sample_value(desc, rng):
    if not isinstance(desc, dict) or "dist" not in desc:
        raise BadSpace(f"malformed distribution: {desc!r}")
    dist = desc["dist"]
    if dist == "categorical":
        values = desc.get("values")
        if not values:
            raise BadSpace("categorical distribution needs non-empty values")
        return values[int(rng.integers(len(values)))]
    if dist == "uniform":
        return float(rng.uniform(desc["min"], desc["max"]))
    if dist == "log_uniform":
        lo, hi = desc["min"], desc["max"]
        if lo <= 0 or hi <= lo:
            raise BadSpace(f"log_uniform needs 0 < min < max, got {lo}, {hi}")
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    if dist == "q_uniform":
        q = desc.get("q", 1)
        value = rng.uniform(desc["min"], desc["max"])
        return int(np.clip(round(value / q) * q, desc["min"], desc["max"]))
    raise BadSpace(f"unknown distribution {dist!r}")


def random_search(space, n, seed):
    """Draw ``n`` configurations from the search space, honoring per-arch and
    per-scheduler conditionals; deterministic given the seed."""
    if not isinstance(space, dict):
        raise BadSpace("search space must be a mapping")
    rng = np.random.default_rng(seed)
    conditional = space.get("conditional", {})
    samples = []
    for _ in range(n):
        config = {}
        for key, desc in space.items():
            if key == "conditional":
                continue
            config[key] = _sample_value(desc, rng)
        for cond_key, by_value in conditional.items():
            chosen = config.get(cond_key)
            extra = by_value.get(chosen, {})
            for key, desc in extra.items():
                if isinstance(desc, list):
                    config[key] = desc[int(rng.integers(len(desc)))]
                else:
                    config[key] = _sample_value(desc, rng)
        samples.append(config)
    return samples


# ---------------------------------------------------------------------------
# report emission


def _fmt4(x):
    return f"{float(x):.4f}"


def write_metrics(path, values):
    """Line-delimited key=value records, reals as 4-decimal fixed point."""
    with open(path, "w", encoding="utf-8") as f:
        for key in sorted(values):
            v = values[key]
            f.write(f"{key}={v if isinstance(v, int) else _fmt4(v)}\n")


def read_metrics(path):
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            out[key] = float(value)
    return out


def write_predictions(path, surfaces, golds, preds):
    with open(path, "w", encoding="utf-8") as f:
        for s, g, p in zip(surfaces, golds, preds):
            f.write(f"{s}\t{g}\t{p}\n")


def sweep_table_text(result):
    headers = ["encoder", "decoder", "cls"] + [f"n={l}" for l in result.limits] + ["average"]
    lines = []
    rows = []
    for r in result.rows:
        cells = [r.enc, r.dec, r.cls]
        cells += [_fmt4(r.accuracy[l]) for l in result.limits]
        cells.append(_fmt4(r.average))
        if r.is_baseline:
            cells[0] = "*" + cells[0]
        rows.append(cells)
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    lines.append("* baseline (no translation input)")
    return "\n".join(lines) + "\n"


def write_sweep_report(prefix, result):
    with open(prefix + ".csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["encoder", "decoder", "cls"] + [f"acc@{l}" for l in result.limits]
                   + ["average", "baseline"])
        for r in result.rows:
            w.writerow([r.enc, r.dec, r.cls]
                       + [_fmt4(r.accuracy[l]) for l in result.limits]
                       + [_fmt4(r.average), "1" if r.is_baseline else "0"])
    with open(prefix + ".txt", "w", encoding="utf-8") as f:
        f.write(sweep_table_text(result))


def read_sweep_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
