"""Training loop: batching, the two hyperparameter regimes, checkpoint
selection on dev whole-word accuracy, and the plateau learning-rate schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .alignment import aligned_indices, SentenceAlignment
from .corpus import Vocabulary
from .errors import ConfigError, DataError
from .metrics import edit_distance_total, morpheme_f1, whole_word_accuracy
from .transrepr import translation_features

# The two tuned settings: one for 100-sample training runs, one for the rest.
REGIMES = {
    "small100": dict(batch_size=16, enc_layers=2, dec_layers=2, emb=512, hid=1024,
                     dropout=0.3662, lr=2.411e-4, max_epochs=607,
                     beta1=0.8716, beta2=0.9848,
                     factor=0.686, patience=30, min_lr=5.021e-4),
    "standard": dict(batch_size=64, enc_layers=1, dec_layers=1, emb=1024, hid=2048,
                     dropout=0.2212, lr=8.056e-4, max_epochs=627,
                     beta1=0.8218, beta2=0.9845,
                     factor=0.782, patience=30, min_lr=7.737e-4),
}


def regime_for_limit(limit):
    """The 100-sample setting gets its own hyperparameters."""
    return "small100" if limit is not None and limit <= 100 else "standard"


def model_defaults(regime):
    r = REGIMES[regime]
    return dict(emb=r["emb"], hid=r["hid"], enc_layers=r["enc_layers"],
                dec_layers=r["dec_layers"], dropout=r["dropout"])


@dataclass(frozen=True)
class TrainConfig:
    regime: str = "standard"
    batch_size: int = 64
    max_epochs: int = 627
    lr: float = 8.056e-4
    beta1: float = 0.8218
    beta2: float = 0.9845
    dropout: float = 0.2212
    scheduler: str = "reduceonplateau"
    factor: float = 0.782
    patience: int = 30
    min_lr: float = 7.737e-4
    seed: int = 1
    early_stop_accuracy: float | None = None
    max_grad_norm: float | None = None

    @classmethod
    def from_regime(cls, regime, **overrides):
        if regime not in REGIMES:
            raise ConfigError(f"unknown regime {regime!r}; expected one of {sorted(REGIMES)}")
        r = REGIMES[regime]
        kwargs = dict(regime=regime, batch_size=r["batch_size"], max_epochs=r["max_epochs"],
                      lr=r["lr"], beta1=r["beta1"], beta2=r["beta2"], dropout=r["dropout"],
                      factor=r["factor"], patience=r["patience"], min_lr=r["min_lr"])
        kwargs.update(overrides)
        return cls(**kwargs)

    @classmethod
    def small100(cls, **overrides):
        return cls.from_regime("small100", **overrides)

    @classmethod
    def standard(cls, **overrides):
        return cls.from_regime("standard", **overrides)


@dataclass
class EpochStats:
    loss: float
    dev_accuracy: float
    lr: float


@dataclass
class RunResult:
    accuracy: float
    f1: float
    edit_distance: int
    precision: float = 0.0
    recall: float = 0.0
    history: list = field(default_factory=list)


@dataclass
class Batch:
    surfaces: list
    golds: list
    src: np.ndarray
    src_mask: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray
    tgt_mask: np.ndarray
    trans: tuple | None

    def __len__(self):
        return len(self.surfaces)


_EMPTY_ALIGNMENT = SentenceAlignment(sentence_id="", links=frozenset())


def make_translation_lookup(embeddings, alignments):
    """Per-instance conditioning features from loaded embeddings and (optional)
    alignments.  Returns arrays (word_avg, avg_incl_cls, cls)."""

    def lookup(inst):
        try:
            emb = embeddings[inst.sentence_id]
        except KeyError:
            raise DataError(f"no translation embeddings for sentence "
                            f"{inst.sentence_id!r}") from None
        alignment = (alignments or {}).get(inst.sentence_id, _EMPTY_ALIGNMENT)
        aligned = aligned_indices(inst.word_index, alignment)
        return translation_features(emb, aligned)

    return lookup


class BatchEncoder:
    """Turns instance lists into padded id arrays (and translation features
    when the model consumes them)."""

    def __init__(self, src_vocab, tgt_vocab, trans_lookup=None, dtype=np.float32):
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.trans_lookup = trans_lookup
        self.dtype = dtype

    def encode(self, instances):
        srcs = [self.src_vocab.encode(i.surface) + [Vocabulary.EOS] for i in instances]
        tgts = [self.tgt_vocab.encode(i.canonical) for i in instances]
        b = len(instances)
        t_len = max(len(s) for s in srcs)
        u_len = max(len(t) for t in tgts) + 1  # room for EOS
        src = np.full((b, t_len), Vocabulary.PAD, dtype=np.int64)
        src_mask = np.zeros((b, t_len), dtype=self.dtype)
        tgt_in = np.full((b, u_len), Vocabulary.PAD, dtype=np.int64)
        tgt_out = np.full((b, u_len), Vocabulary.PAD, dtype=np.int64)
        tgt_mask = np.zeros((b, u_len), dtype=self.dtype)
        for i, (s, t) in enumerate(zip(srcs, tgts)):
            src[i, :len(s)] = s
            src_mask[i, :len(s)] = 1.0
            tgt_in[i, 0] = Vocabulary.BOS
            tgt_in[i, 1:len(t) + 1] = t
            tgt_out[i, :len(t)] = t
            tgt_out[i, len(t)] = Vocabulary.EOS
            tgt_mask[i, :len(t) + 1] = 1.0
        trans = None
        if self.trans_lookup is not None:
            feats = [self.trans_lookup(inst) for inst in instances]
            trans = (np.stack([f[0] for f in feats]),
                     np.stack([f[1] for f in feats]),
                     np.stack([f[2] for f in feats]))
        return Batch(surfaces=[i.surface for i in instances],
                     golds=[i.canonical for i in instances],
                     src=src, src_mask=src_mask,
                     tgt_in=tgt_in, tgt_out=tgt_out, tgt_mask=tgt_mask,
                     trans=trans)


def make_batches(instances, batch_size, seed, encoder):
    """Seeded shuffle, then fixed-size padded batches (last one may be short)."""
    if not instances:
        return []
    perm = np.random.default_rng(seed).permutation(len(instances))
    shuffled = [instances[i] for i in perm]
    return [encoder.encode(shuffled[i:i + batch_size])
            for i in range(0, len(shuffled), batch_size)]


def evaluate_model(model, instances, encoder, chunk=128):
    """Greedy-decode ``instances`` and score all three metrics."""
    preds = []
    golds = [i.canonical for i in instances]
    for i in range(0, len(instances), chunk):
        group = instances[i:i + chunk]
        trans = None
        if encoder.trans_lookup is not None:
            feats = [encoder.trans_lookup(inst) for inst in group]
            trans = (np.stack([f[0] for f in feats]),
                     np.stack([f[1] for f in feats]),
                     np.stack([f[2] for f in feats]))
        preds.extend(model.greedy_decode_batch([g.surface for g in group], trans))
    acc = whole_word_accuracy(preds, golds)
    p, r, f1 = morpheme_f1(preds, golds)
    ed = edit_distance_total(preds, golds)
    return preds, RunResult(accuracy=acc, f1=f1, edit_distance=ed, precision=p, recall=r)


def train(model, train_insts, dev_insts, embeddings, alignments, cfg):
    """Train with Adam + plateau scheduling, checkpointing on best dev
    whole-word accuracy.  Returns (best parameter snapshot, RunResult with
    per-epoch history)."""
    lookup = None
    if model.cfg.needs_translation():
        lookup = make_translation_lookup(embeddings, alignments)
    encoder = BatchEncoder(model.src_vocab, model.tgt_vocab, lookup, model.cfg.np_dtype)
    drop_rng = np.random.default_rng([cfg.seed, 0xD120])
    adam = ad.Adam(model.parameters(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
                   max_grad_norm=cfg.max_grad_norm)
    scheduler = None
    if cfg.scheduler == "reduceonplateau":
        scheduler = ad.PlateauScheduler(cfg.lr, cfg.factor, cfg.patience, cfg.min_lr)
    elif cfg.scheduler not in ("none", None):
        raise ConfigError(f"unsupported scheduler {cfg.scheduler!r}")

    best_state = model.state_dict()
    best_acc = -1.0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        batches = make_batches(train_insts, cfg.batch_size, [cfg.seed, epoch], encoder)
        losses = []
        for batch in batches:
            loss = model.forward_loss(batch, train=True, rng=drop_rng)
            ad.backward(loss)
            adam.step()
            losses.append(loss.item())
        _, dev_result = evaluate_model(model, dev_insts, encoder)
        acc = dev_result.accuracy
        if scheduler is not None:
            adam.lr = scheduler.step(acc)
        if acc > best_acc:
            best_acc = acc
            best_state = model.state_dict()
        history.append(EpochStats(loss=float(np.mean(losses)), dev_accuracy=acc,
                                  lr=adam.lr))
        if cfg.early_stop_accuracy is not None and acc >= cfg.early_stop_accuracy:
            break

    model.load_state_dict(best_state)
    _, final = evaluate_model(model, dev_insts, encoder)
    final.history = history
    return best_state, final
