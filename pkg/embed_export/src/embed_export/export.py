"""Produce TransEmb-v1 files from the translation lines of an IGT corpus.

For every sentence, the pretrained model's final hidden layer yields one
sentence-wide vector (the sentence-start token) and one vector per
translation word, obtained by mean-pooling that word's wordpieces.  The
translation line is pretokenized with the segmenter's own rules so word
indices agree with the alignment files the segmenter consumes.  Words lost
to truncation get zero vectors and a warning.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from canoseg.corpus import parse_igt_file, pretokenize, rules_for

log = logging.getLogger("embed_export")


class ModelLoadError(Exception):
    pass


class TokenizationMismatch(Exception):
    pass


@dataclass
class ExportJob:
    input_path: str
    model_id: str
    output_path: str
    max_length: int = 512
    lang: str = "default"
    batch_size: int = 8


def load_model(model_id):
    try:
        from transformers import AutoModel, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as e:
        raise ModelLoadError(f"cannot load model {model_id!r}: {e}") from e
    model.eval()
    return tokenizer, model


def _word_vectors(hidden, word_ids, attention_mask, n_words, sentence_id):
    """Mean-pool wordpiece vectors per word; truncated words become zeros."""
    dim = hidden.shape[-1]
    buckets = [[] for _ in range(n_words)]
    seen = set()
    for pos, wid in enumerate(word_ids):
        if wid is None or not attention_mask[pos]:
            continue
        if wid >= n_words:
            raise TokenizationMismatch(
                f"{sentence_id}: wordpiece mapped to word {wid} of {n_words}")
        buckets[wid].append(hidden[pos])
        seen.add(wid)
    if seen and seen != set(range(max(seen) + 1)):
        raise TokenizationMismatch(
            f"{sentence_id}: wordpiece-to-word mapping has gaps ({sorted(seen)})")
    vectors = np.zeros((n_words, dim), dtype=np.float64)
    for w, pieces in enumerate(buckets):
        if pieces:
            vectors[w] = np.mean(pieces, axis=0)
        else:
            log.warning("%s: word %d lost to truncation; emitting a zero vector",
                        sentence_id, w)
    return vectors


def embed_translations(word_lists, sentence_ids, tokenizer, model, max_length,
                       batch_size=8):
    """Yield (cls_vector, word_matrix) per sentence, in order."""
    import torch

    for start in range(0, len(word_lists), batch_size):
        group = word_lists[start:start + batch_size]
        ids = sentence_ids[start:start + batch_size]
        enc = tokenizer(group, is_split_into_words=True, truncation=True,
                        max_length=max_length, padding=True, return_tensors="pt")
        with torch.no_grad():
            hidden = model(**enc).last_hidden_state.numpy().astype(np.float64)
        for bi, (words, sid) in enumerate(zip(group, ids)):
            try:
                word_ids = enc.word_ids(bi)
            except Exception as e:
                raise TokenizationMismatch(
                    f"{sid}: tokenizer provides no wordpiece-to-word mapping: {e}"
                ) from e
            mask = enc["attention_mask"][bi].tolist()
            cls_vec = hidden[bi, 0].copy()
            vectors = _word_vectors(hidden[bi], word_ids, mask, len(words), sid)
            yield cls_vec, vectors


def _fmt(x):
    return format(float(x), ".9g")


def write_transemb_record(f, sentence_id, dim, cls_vec, word_vectors):
    cls_s = "[" + ", ".join(_fmt(x) for x in cls_vec) + "]"
    words_s = "[" + ", ".join(
        "[" + ", ".join(_fmt(x) for x in w) + "]" for w in word_vectors) + "]"
    f.write('{"id": %s, "dim": %d, "cls": %s, "words": %s}\n'
            % (json.dumps(sentence_id), dim, cls_s, words_s))


def export(job: ExportJob):
    """Run the model over every translation line and write one TransEmb-v1
    record per sentence, in file order.  Returns the number of records."""
    tokenizer, model = load_model(job.model_id)
    rules = rules_for(job.lang)
    sentences = parse_igt_file(job.input_path)
    word_lists = [pretokenize(" ".join(s.translation), rules) for s in sentences]
    ids = [s.id for s in sentences]
    dim = int(model.config.hidden_size)
    n = 0
    with open(job.output_path, "w", encoding="utf-8") as f:
        for sid, words, (cls_vec, vectors) in zip(
                ids, word_lists,
                embed_translations(word_lists, ids, tokenizer, model,
                                   job.max_length, job.batch_size)):
            assert vectors.shape == (len(words), dim)
            write_transemb_record(f, sid, dim, cls_vec, vectors)
            n += 1
    return n
