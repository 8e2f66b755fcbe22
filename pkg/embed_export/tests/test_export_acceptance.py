"""Release gate for the export tool, mirroring the primary suite's style."""

from contextlib import contextmanager

from canoseg.corpus import parse_igt_file, pretokenize, rules_for
from canoseg.transrepr import load_embeddings

from embed_export import ExportJob, export


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}", flush=True)
        raise
    print(f"[PASS] {name}", flush=True)


def test_export_conformance_and_round_trip(igt_file, tiny_model_dir, tmp_path):
    """Output conforms to TransEmb-v1, word counts equal the pretokenized
    translation lengths, and the file loads through the segmenter's loader."""
    with criterion("export conformance + primary-loader round trip"):
        out = tmp_path / "acc.emb"
        n = export(ExportJob(input_path=igt_file, model_id=tiny_model_dir,
                             output_path=str(out)))
        loaded = load_embeddings(out)   # raises on any format violation
        assert len(loaded) == n
        rules = rules_for("default")
        for s in parse_igt_file(igt_file):
            rec = loaded[s.id]
            assert rec.words.shape[0] == len(
                pretokenize(" ".join(s.translation), rules))
            assert rec.cls.shape == (rec.dim,)
