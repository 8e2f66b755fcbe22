import numpy as np
import pytest

from canoseg.alignment import AlignmentLink, SentenceAlignment
from canoseg.corpus import SegmentationInstance
from canoseg.transrepr import TranslationEmbeddings, write_embeddings

SYLLABLES = ["ba", "ke", "lu", "mi", "zo", "ta", "ri", "po", "ne", "su"]
ENGLISH = ["the", "fish", "speaks", "now", "boy", "went", "home", "dog",
           "sees", "water", "big", "runs", "stone", "falls"]


def make_igt_text(n_sentences=20, seed=5, with_bad_block=False):
    """Deterministic synthetic IGT corpus: surface words are syllable
    concatenations, canonical forms join the syllables with '-'."""
    rng = np.random.default_rng(seed)
    blocks = []
    for i in range(n_sentences):
        n_words = 2 + i % 3
        words, canon = [], []
        for _ in range(n_words):
            k = 2 + int(rng.integers(2))
            syls = [SYLLABLES[int(rng.integers(len(SYLLABLES)))] for _ in range(k)]
            words.append("".join(syls))
            canon.append("-".join(syls))
        trans = [ENGLISH[int(rng.integers(len(ENGLISH)))] for _ in range(n_words)]
        blocks.append("\n".join([
            "\\t " + " ".join(words),
            "\\m " + " ".join(canon),
            "\\g " + " ".join("G" + w for w in words),
            "\\l " + " ".join(trans),
        ]))
    if with_bad_block:
        blocks.append("\\t one two three\n\\m one-two\n\\l bad block")
    return "\n\n".join(blocks) + "\n"


def make_embeddings(sentences, dim=12, seed=9):
    rng = np.random.default_rng(seed)
    recs = []
    for s in sentences:
        recs.append(TranslationEmbeddings(
            sentence_id=s.id, dim=dim,
            cls=rng.normal(size=dim),
            words=rng.normal(size=(len(s.translation), dim))))
    return recs


def make_alignment_lines(sentences):
    """Diagonal links: word i of the transcription to translation word
    min(i, m-1)."""
    lines = []
    for s in sentences:
        m = len(s.translation)
        links = [f"{i}-{min(i, m - 1)}" for i in range(len(s.transcription))]
        lines.append(" ".join(links))
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """A complete on-disk fixture: IGT corpus, TransEmb-v1 file, alignments."""
    from canoseg import corpus

    root = tmp_path_factory.mktemp("fixture")
    igt = root / "corpus.igt"
    igt.write_text(make_igt_text(20), encoding="utf-8")
    sentences = corpus.preprocess_sentences(corpus.parse_igt_file(str(igt)))
    emb_path = root / "trans.emb"
    write_embeddings(str(emb_path), make_embeddings(sentences))
    (root / "align.pharaoh").write_text(make_alignment_lines(sentences),
                                        encoding="utf-8")
    return root


def make_random_pairs(n, seed, alphabet="abcdefghij", min_len=3, max_len=8):
    """Distinct (surface, canonical) pairs: canonical = surface with one
    random morpheme boundary."""
    rng = np.random.default_rng(seed)
    seen, pairs = set(), []
    while len(pairs) < n:
        w = "".join(rng.choice(list(alphabet), size=int(rng.integers(min_len, max_len))))
        if w in seen:
            continue
        seen.add(w)
        cut = int(rng.integers(1, len(w)))
        pairs.append(SegmentationInstance(w, w[:cut] + "-" + w[cut:],
                                          f"s{len(pairs)}", 0))
    return pairs


def make_homograph_corpus(n_homographs=40, plm_dim=8, seed=7):
    """Surfaces with two canonical readings each, disambiguated only by an
    oracle translation vector (orthogonal unit vectors per sense)."""
    rng = np.random.default_rng(seed)
    alphabet = list("abcdef")
    seen, surfaces = set(), []
    while len(surfaces) < n_homographs:
        w = "".join(rng.choice(alphabet, size=int(rng.integers(4, 7))))
        if w in seen:
            continue
        seen.add(w)
        surfaces.append(w)
    sense_vecs = np.zeros((2, plm_dim))
    sense_vecs[0, 0] = 1.0
    sense_vecs[1, 1] = 1.0
    instances, embeddings, alignments = [], {}, {}
    for i, w in enumerate(surfaces):
        for sense in (0, 1):
            cut = 2 if sense == 0 else 1
            sid = f"h{i}_{sense}"
            instances.append(SegmentationInstance(w, w[:cut] + "-" + w[cut:], sid, 0))
            vec = sense_vecs[sense]
            embeddings[sid] = TranslationEmbeddings(sid, plm_dim, vec.copy(),
                                                    vec[None, :].copy())
            alignments[sid] = SentenceAlignment(sid, frozenset({AlignmentLink(0, 0)}))
    return instances, embeddings, alignments
