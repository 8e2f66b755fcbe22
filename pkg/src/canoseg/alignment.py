"""Word-alignment ingestion and evaluation.

Alignments arrive in Pharaoh format ("i-j" pairs, one line per sentence, same
order as the IGT file); the aligner itself is external.  Evaluation is
micro-averaged precision/recall/F1 over the pooled link sets.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataError, IdMismatch, MalformedAlignment


@dataclass(frozen=True)
class AlignmentLink:
    src: int
    tgt: int


@dataclass
class SentenceAlignment:
    sentence_id: str
    links: frozenset

    def __len__(self):
        return len(self.links)


@dataclass(frozen=True)
class AlignmentScore:
    precision: float
    recall: float
    f1: float


def f_score(precision, recall):
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def parse_pharaoh(line, sentence_id=""):
    """Parse one line of whitespace-separated "i-j" pairs; duplicates collapse."""
    links = set()
    for token in line.split():
        left, sep, right = token.partition("-")
        if not sep:
            raise MalformedAlignment(token)
        try:
            links.add(AlignmentLink(int(left), int(right)))
        except ValueError:
            raise MalformedAlignment(token) from None
    return SentenceAlignment(sentence_id=sentence_id, links=frozenset(links))


def serialize_pharaoh(alignment):
    return " ".join(f"{l.src}-{l.tgt}" for l in sorted(alignment.links,
                                                       key=lambda l: (l.src, l.tgt)))


def load_alignments(path, sentence_ids):
    """Read one Pharaoh line per sentence, pairing by file order."""
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if len(lines) != len(sentence_ids):
        raise DataError(
            f"{path}: {len(lines)} alignment lines for {len(sentence_ids)} sentences")
    return {sid: parse_pharaoh(line, sid) for sid, line in zip(sentence_ids, lines)}


def aligned_indices(word_index, alignment):
    """Sorted, deduplicated translation indices linked to ``word_index``."""
    return sorted({l.tgt for l in alignment.links if l.src == word_index})


def evaluate_alignment(pred, gold):
    """Micro-averaged P/R/F1 over all sentences (links pooled corpus-wide)."""
    pred_by_id = {a.sentence_id: a for a in pred}
    gold_by_id = {a.sentence_id: a for a in gold}
    if set(pred_by_id) != set(gold_by_id) or len(pred) != len(gold):
        raise IdMismatch("predicted and gold alignments cover different sentences")
    hits = 0
    n_pred = 0
    n_gold = 0
    for sid, g in gold_by_id.items():
        p = pred_by_id[sid]
        hits += len(p.links & g.links)
        n_pred += len(p.links)
        n_gold += len(g.links)
    precision = hits / n_pred if n_pred else 0.0
    recall = hits / n_gold if n_gold else 0.0
    return AlignmentScore(precision, recall, f_score(precision, recall))
