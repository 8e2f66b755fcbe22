import pytest
import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

IGT = """\\t besuro balixo
\\m besuro b-ali-xo
\\l The fish speaks.

\\t runo
\\m ru-no
\\l Water

\\t keta mizo
\\m ke-ta mi-zo
\\l The big dog runs home now
"""


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A local wordpiece BERT with random weights: every letter is a piece,
    so real words split into several wordpieces."""
    root = tmp_path_factory.mktemp("tinybert")
    letters = list("abcdefghijklmnopqrstuvwxyz")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + letters + \
            ["##" + c for c in letters] + [",", ".", "'"]
    vmap = {t: i for i, t in enumerate(vocab)}
    tok = Tokenizer(models.WordPiece(vocab=vmap, unk_token="[UNK]"))
    tok.normalizer = normalizers.BertNormalizer(lowercase=True)
    tok.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tok.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]", pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vmap["[CLS]"]), ("[SEP]", vmap["[SEP]"])])
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="[UNK]",
                                   pad_token="[PAD]", cls_token="[CLS]",
                                   sep_token="[SEP]", mask_token="[MASK]")
    cfg = BertConfig(vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2,
                     num_attention_heads=2, intermediate_size=64,
                     max_position_embeddings=64)
    torch.manual_seed(0)
    BertModel(cfg).save_pretrained(root)
    fast.save_pretrained(root)
    return str(root)


@pytest.fixture
def igt_file(tmp_path):
    path = tmp_path / "corpus.igt"
    path.write_text(IGT, encoding="utf-8")
    return str(path)
