#!/usr/bin/env python3
"""Generate a synthetic demo dataset: an IGT corpus whose surface words are
syllable concatenations, oracle translation embeddings (one record per
sentence), and diagonal word alignments in Pharaoh format.

Usage: python3 scripts/make_demo_data.py --outdir demo_data [--sentences 40]
"""

import argparse
import os

import numpy as np

from canoseg import corpus
from canoseg.transrepr import TranslationEmbeddings, write_embeddings

SYLLABLES = ["ba", "ke", "lu", "mi", "zo", "ta", "ri", "po", "ne", "su"]
ENGLISH = ["the", "fish", "speaks", "now", "boy", "went", "home", "dog",
           "sees", "water", "big", "runs", "stone", "falls"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="demo_data")
    ap.add_argument("--sentences", type=int, default=40)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    blocks = []
    for i in range(args.sentences):
        n_words = 2 + i % 3
        words, canon = [], []
        for _ in range(n_words):
            k = 2 + int(rng.integers(2))
            syls = [SYLLABLES[int(rng.integers(len(SYLLABLES)))] for _ in range(k)]
            words.append("".join(syls))
            canon.append("-".join(syls))
        trans = [ENGLISH[int(rng.integers(len(ENGLISH)))] for _ in range(n_words)]
        blocks.append("\n".join(["\\t " + " ".join(words),
                                 "\\m " + " ".join(canon),
                                 "\\g " + " ".join("G" + w for w in words),
                                 "\\l " + " ".join(trans)]))

    os.makedirs(args.outdir, exist_ok=True)
    igt_path = os.path.join(args.outdir, "corpus.igt")
    with open(igt_path, "w", encoding="utf-8") as f:
        f.write("\n\n".join(blocks) + "\n")

    sentences = corpus.preprocess_sentences(corpus.parse_igt_file(igt_path))
    records = []
    align_lines = []
    for s in sentences:
        records.append(TranslationEmbeddings(
            s.id, args.dim, rng.normal(size=args.dim),
            rng.normal(size=(len(s.translation), args.dim))))
        m = len(s.translation)
        align_lines.append(" ".join(f"{i}-{min(i, m - 1)}"
                                    for i in range(len(s.transcription))))
    write_embeddings(os.path.join(args.outdir, "trans.emb"), records)
    with open(os.path.join(args.outdir, "align.pharaoh"), "w", encoding="utf-8") as f:
        f.write("\n".join(align_lines) + "\n")
    print(f"wrote {args.outdir}/corpus.igt, trans.emb, align.pharaoh "
          f"({len(sentences)} sentences)")


if __name__ == "__main__":
    main()
