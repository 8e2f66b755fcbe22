"""Translation representations.

Loads precomputed per-sentence translation embeddings (TransEmb-v1 files: one
JSON record per line with a sentence-wide vector and one vector per
translation word) and projects them to a fixed-length conditioning vector
under one of four strategies for treating the sentence-wide vector:

  cls-none    average the aligned word vectors, project
  cls-avg     include the sentence vector in that average, project
  cls-concat  project word average and sentence vector separately, concatenate
  cls-only    project the sentence vector alone (no alignments needed)

An empty alignment set contributes a zero word-average, which keeps the
projection total and differentiable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import (DimMismatch, DuplicateSentenceId, EmbeddingParseError,
                     IndexOutOfBounds)

CLS_STRATEGIES = ("CLS-None", "CLS-Avg", "CLS-Concat", "CLS-Only")
DEFAULT_PLM_DIM = 768


def normalize_cls_strategy(name):
    for s in CLS_STRATEGIES:
        if name.replace("_", "-").lower() == s.lower():
            return s
    raise ValueError(f"unknown CLS strategy {name!r}; expected one of {CLS_STRATEGIES}")


@dataclass
class TranslationEmbeddings:
    sentence_id: str
    dim: int
    cls: np.ndarray          # (dim,)
    words: np.ndarray        # (num_words, dim)


@dataclass
class TranslationVector:
    v: ad.Tensor


def load_embeddings(path):
    """Parse a TransEmb-v1 file into a sentence_id -> embeddings map."""
    out = {}
    dim_seen = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                sid = rec["id"]
                dim = int(rec["dim"])
                cls_vec = np.asarray(rec["cls"], dtype=np.float64)
                words = [np.asarray(w, dtype=np.float64) for w in rec["words"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise EmbeddingParseError(f"{path}:{lineno}: {e}") from e
            if sid in out:
                raise DuplicateSentenceId(f"{path}:{lineno}: duplicate id {sid!r}")
            if dim_seen is None:
                dim_seen = dim
            elif dim != dim_seen:
                raise DimMismatch(f"{path}:{lineno}: dim {dim} != {dim_seen}")
            if cls_vec.shape != (dim,) or any(w.shape != (dim,) for w in words):
                raise DimMismatch(f"{path}:{lineno}: vector length != dim {dim}")
            word_mat = np.stack(words) if words else np.zeros((0, dim))
            out[sid] = TranslationEmbeddings(sid, dim, cls_vec, word_mat)
    return out


def _fmt(x):
    # 9 significant digits: exact round trip for float32-precision values
    return format(float(x), ".9g")


def write_embeddings(path, records):
    """Write TransEmb-v1; floats formatted to 9 significant digits."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            cls_s = "[" + ", ".join(_fmt(x) for x in rec.cls) + "]"
            words_s = "[" + ", ".join(
                "[" + ", ".join(_fmt(x) for x in w) + "]" for w in rec.words) + "]"
            f.write('{"id": %s, "dim": %d, "cls": %s, "words": %s}\n'
                    % (json.dumps(rec.sentence_id), rec.dim, cls_s, words_s))


def translation_features(emb, aligned):
    """Per-word conditioning inputs: (word average, average including the
    sentence vector, sentence vector).  Empty alignment -> zero word average
    and the sentence vector alone for the inclusive average."""
    for j in aligned:
        if j < 0 or j >= emb.words.shape[0]:
            raise IndexOutOfBounds(
                f"aligned index {j} out of range for {emb.words.shape[0]} words")
    cls_vec = emb.cls
    if aligned:
        picked = emb.words[list(aligned)]
        word_avg = picked.mean(axis=0)
        incl = np.vstack([cls_vec[None, :], picked]).mean(axis=0)
    else:
        word_avg = np.zeros_like(cls_vec)
        incl = cls_vec.copy()
    return word_avg, incl, cls_vec


class TranslationProjector:
    """Learned projection from PLM space to a fixed-length vector of
    ``out_dim``; under cls-concat the two halves come from separate matrices."""

    def __init__(self, cls_strategy, plm_dim, out_dim, rng, prefix="trans",
                 dtype=np.float32, init_scale=None):
        self.cls_strategy = normalize_cls_strategy(cls_strategy)
        self.plm_dim = plm_dim
        self.out_dim = out_dim
        k = init_scale if init_scale is not None else 1.0 / np.sqrt(out_dim)
        if self.cls_strategy == "CLS-Concat":
            if out_dim % 2 != 0:
                raise DimMismatch(
                    f"CLS-Concat needs an even output size, got {out_dim}")
            half = out_dim // 2
            self.w_trans = _init_matrix(f"{prefix}.w_trans", plm_dim, half, rng, k, dtype)
            self.w_cls = _init_matrix(f"{prefix}.w_cls", plm_dim, half, rng, k, dtype)
        else:
            self.w_trans = _init_matrix(f"{prefix}.w_trans", plm_dim, out_dim, rng, k, dtype)
            self.w_cls = None

    def params(self):
        return [self.w_trans] + ([self.w_cls] if self.w_cls is not None else [])

    def project(self, word_avg, incl_cls, cls_vec):
        """Batched projection: inputs are (B, plm_dim) arrays or tensors."""
        if self.cls_strategy == "CLS-None":
            return ad.matmul(ad.as_tensor(word_avg), self.w_trans)
        if self.cls_strategy == "CLS-Avg":
            return ad.matmul(ad.as_tensor(incl_cls), self.w_trans)
        if self.cls_strategy == "CLS-Only":
            return ad.matmul(ad.as_tensor(cls_vec), self.w_trans)
        v1 = ad.matmul(ad.as_tensor(word_avg), self.w_trans)
        v2 = ad.matmul(ad.as_tensor(cls_vec), self.w_cls)
        return ad.concat([v1, v2], axis=1)


def _init_matrix(name, rows, cols, rng, k, dtype):
    return ad.Parameter(name, rng.uniform(-k, k, size=(rows, cols)).astype(dtype))


def represent(emb, aligned, projector):
    """Fixed-length translation vector for one word (see module docstring)."""
    if emb.dim != projector.plm_dim:
        raise DimMismatch(f"embeddings dim {emb.dim} != projector dim {projector.plm_dim}")
    word_avg, incl, cls_vec = translation_features(emb, aligned)
    out = projector.project(word_avg[None, :], incl[None, :], cls_vec[None, :])
    return TranslationVector(v=out)
