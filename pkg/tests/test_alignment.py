import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from canoseg.alignment import (AlignmentLink, SentenceAlignment,
                               aligned_indices, evaluate_alignment, f_score,
                               load_alignments, parse_pharaoh, serialize_pharaoh)
from canoseg.errors import DataError, IdMismatch, MalformedAlignment


def links(*pairs):
    return frozenset(AlignmentLink(i, j) for i, j in pairs)


def test_parse_pharaoh_basic():
    assert parse_pharaoh("0-0 1-2").links == links((0, 0), (1, 2))


def test_parse_pharaoh_empty_line():
    assert parse_pharaoh("").links == frozenset()


def test_parse_pharaoh_duplicates_collapse():
    assert parse_pharaoh("0-0 0-0").links == links((0, 0))


@pytest.mark.parametrize("bad", ["x-1", "1-", "1:2", "3"])
def test_parse_pharaoh_malformed(bad):
    with pytest.raises(MalformedAlignment):
        parse_pharaoh(bad)


@settings(max_examples=50, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 20), st.integers(0, 20)), max_size=12))
def test_parse_serialize_round_trip(pairs):
    a = SentenceAlignment("s", links(*pairs))
    assert parse_pharaoh(serialize_pharaoh(a)).links == a.links


def test_aligned_indices_sorted_dedup():
    a = SentenceAlignment("s", links((0, 0), (1, 2), (1, 3)))
    assert aligned_indices(1, a) == [2, 3]
    assert aligned_indices(5, a) == []
    b = SentenceAlignment("s", links((0, 4), (0, 1)))
    assert aligned_indices(0, b) == [1, 4]


def test_evaluate_identity_is_perfect():
    gold = [SentenceAlignment("a", links((0, 0), (1, 1)))]
    score = evaluate_alignment(gold, gold)
    assert (score.precision, score.recall, score.f1) == (1.0, 1.0, 1.0)


def test_evaluate_half_overlap_hand_oracle():
    pred = [SentenceAlignment("a", links((0, 0), (1, 1)))]
    gold = [SentenceAlignment("a", links((0, 0), (1, 2)))]
    score = evaluate_alignment(pred, gold)
    assert (score.precision, score.recall, score.f1) == (0.5, 0.5, 0.5)


def test_evaluate_swap_swaps_p_and_r():
    pred = [SentenceAlignment("a", links((0, 0), (1, 1), (2, 2)))]
    gold = [SentenceAlignment("a", links((0, 0), (3, 3)))]
    s1 = evaluate_alignment(pred, gold)
    s2 = evaluate_alignment(gold, pred)
    assert s1.precision == s2.recall
    assert s1.recall == s2.precision
    assert s1.f1 == s2.f1


def test_evaluate_pools_links_across_sentences():
    pred = [SentenceAlignment("a", links((0, 0))),
            SentenceAlignment("b", links((0, 0), (1, 1), (2, 2)))]
    gold = [SentenceAlignment("a", links((0, 0), (1, 1))),
            SentenceAlignment("b", links((0, 0)))]
    score = evaluate_alignment(pred, gold)
    assert score.precision == pytest.approx(2 / 4)
    assert score.recall == pytest.approx(2 / 3)


def test_evaluate_empty_denominators_are_zero():
    pred = [SentenceAlignment("a", frozenset())]
    gold = [SentenceAlignment("a", links((0, 0)))]
    score = evaluate_alignment(pred, gold)
    assert (score.precision, score.recall, score.f1) == (0.0, 0.0, 0.0)


def test_evaluate_id_mismatch():
    with pytest.raises(IdMismatch):
        evaluate_alignment([SentenceAlignment("a", frozenset())],
                           [SentenceAlignment("b", frozenset())])


def test_reported_aligner_quality_f1_arithmetic():
    # harmonic mean of the reported precision/recall reproduces the reported F1
    assert f_score(0.1637, 0.1846) == pytest.approx(0.1735, abs=5e-4)


def test_f1_from_constructed_link_sets():
    gold = [SentenceAlignment("s", links(*(((i, 0) for i in range(8868)))))]
    pred_links = {(i, 0) for i in range(1637)} | {(100000 + i, 1) for i in range(10000 - 1637)}
    pred = [SentenceAlignment("s", links(*pred_links))]
    score = evaluate_alignment(pred, gold)
    assert score.precision == pytest.approx(0.1637, abs=1e-12)
    assert score.recall == pytest.approx(0.1846, abs=1e-4)
    assert score.f1 == pytest.approx(0.1735, abs=5e-4)


def test_load_alignments_pairs_by_order(tmp_path):
    path = tmp_path / "a.pharaoh"
    path.write_text("0-0\n\n1-1 2-0\n", encoding="utf-8")
    by_id = load_alignments(path, ["x", "y", "z"])
    assert by_id["x"].links == links((0, 0))
    assert by_id["y"].links == frozenset()
    assert by_id["z"].links == links((1, 1), (2, 0))


def test_load_alignments_count_mismatch(tmp_path):
    path = tmp_path / "a.pharaoh"
    path.write_text("0-0\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_alignments(path, ["x", "y"])
