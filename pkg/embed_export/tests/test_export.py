import logging

import numpy as np
import pytest

from canoseg.corpus import parse_igt_file, pretokenize, rules_for
from canoseg.transrepr import load_embeddings

from embed_export import ExportJob, ModelLoadError, export
from embed_export.cli import main
from embed_export.export import _word_vectors, TokenizationMismatch


def run_export(igt_file, tiny_model_dir, tmp_path, name="out.emb", **kw):
    out = tmp_path / name
    job = ExportJob(input_path=igt_file, model_id=tiny_model_dir,
                    output_path=str(out), **kw)
    n = export(job)
    return out, n


def test_export_one_record_per_sentence_in_order(igt_file, tiny_model_dir, tmp_path):
    out, n = run_export(igt_file, tiny_model_dir, tmp_path)
    assert n == 3
    loaded = load_embeddings(out)  # round-trips through the consumer's loader
    assert list(loaded) == ["s00000", "s00001", "s00002"]


def test_word_counts_match_pretokenized_translations(igt_file, tiny_model_dir,
                                                     tmp_path):
    out, _ = run_export(igt_file, tiny_model_dir, tmp_path)
    loaded = load_embeddings(out)
    sentences = parse_igt_file(igt_file)
    rules = rules_for("default")
    for s in sentences:
        expected = len(pretokenize(" ".join(s.translation), rules))
        assert loaded[s.id].words.shape[0] == expected
    # the first sentence's trailing period is its own token
    assert loaded["s00000"].words.shape[0] == 4
    # single-word sentence
    assert loaded["s00001"].words.shape[0] == 1


def test_dim_matches_model_hidden_size(igt_file, tiny_model_dir, tmp_path):
    out, _ = run_export(igt_file, tiny_model_dir, tmp_path)
    for rec in load_embeddings(out).values():
        assert rec.dim == 32
        assert rec.cls.shape == (32,)
        assert rec.words.shape[1] == 32


def test_cls_vector_differs_from_word_vectors(igt_file, tiny_model_dir, tmp_path):
    out, _ = run_export(igt_file, tiny_model_dir, tmp_path)
    rec = load_embeddings(out)["s00000"]
    for w in rec.words:
        assert not np.allclose(rec.cls, w)


def test_export_deterministic(igt_file, tiny_model_dir, tmp_path):
    a, _ = run_export(igt_file, tiny_model_dir, tmp_path, name="a.emb")
    b, _ = run_export(igt_file, tiny_model_dir, tmp_path, name="b.emb")
    assert a.read_bytes() == b.read_bytes()


def test_truncated_words_get_zero_vectors_and_warning(igt_file, tiny_model_dir,
                                                      tmp_path, caplog):
    with caplog.at_level(logging.WARNING, logger="embed_export"):
        out, _ = run_export(igt_file, tiny_model_dir, tmp_path, max_length=6)
    rec = load_embeddings(out)["s00002"]  # six translation words, most truncated
    assert np.all(rec.words[-1] == 0.0)
    assert any("truncation" in r.message for r in caplog.records)
    # untruncated words keep real vectors
    assert np.any(rec.words[0] != 0.0)


def test_model_load_error():
    job = ExportJob(input_path="x", model_id="/nonexistent/model", output_path="y")
    with pytest.raises(ModelLoadError):
        export(job)


def test_word_vectors_gap_detection():
    hidden = np.zeros((4, 2))
    with pytest.raises(TokenizationMismatch):
        _word_vectors(hidden, [None, 0, 2, None], [1, 1, 1, 1], 3, "s")
    with pytest.raises(TokenizationMismatch):
        _word_vectors(hidden, [None, 5, None, None], [1, 1, 1, 1], 2, "s")


def test_cli_round_trip(igt_file, tiny_model_dir, tmp_path, capsys):
    out = tmp_path / "cli.emb"
    rc = main(["--input", igt_file, "--model", tiny_model_dir,
               "--out", str(out), "--max-len", "64"])
    assert rc == 0
    assert "wrote 3 records" in capsys.readouterr().out
    assert len(load_embeddings(out)) == 3


def test_cli_bad_model_exit_code(igt_file, tmp_path):
    rc = main(["--input", igt_file, "--model", "/nonexistent",
               "--out", str(tmp_path / "x.emb")])
    assert rc == 2
