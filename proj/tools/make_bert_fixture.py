"""Writes a tiny random BERT checkpoint plus reference hidden states.

Usage: python3 tools/make_bert_fixture.py tests/data/tiny_bert
"""
import json
import sys
from pathlib import Path

import torch
from transformers import BertConfig, BertModel, BertTokenizer

VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "*", ".", ",", "the", "radio", "station",
         "europa", "plus", "russian", "soviet", "union", "republic", "is", "a", "of", "in",
         "##s", "##ing", "play", "broad", "##cast", "w", "##1", "##2", "##3", "pat", "e"]


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "vocab.txt").write_text("\n".join(VOCAB) + "\n")
    torch.manual_seed(7)
    cfg = BertConfig(vocab_size=len(VOCAB), hidden_size=16, num_hidden_layers=2, num_attention_heads=4,
                     intermediate_size=32, max_position_embeddings=64, type_vocab_size=2,
                     hidden_act="gelu", layer_norm_eps=1e-12)
    model = BertModel(cfg, add_pooling_layer=True).eval()
    with torch.no_grad():
        for p in model.parameters():
            p.normal_(0.0, 0.3)
    model.save_pretrained(out, safe_serialization=True)
    tok = BertTokenizer(str(out / "vocab.txt"), do_lower_case=True)

    words = ["Europa", "Plus", "is", "a", "Russian", "radio", "station", ".", "[SEP]", "Soviet", "broadcasting", "w12"]
    ids = [tok.cls_token_id]
    for w in words:
        ids += [tok.sep_token_id] if w == "[SEP]" else tok.convert_tokens_to_ids(tok.tokenize(w))
    ids.append(tok.sep_token_id)
    tail = ids.index(tok.sep_token_id) + 1
    types = [0] * tail + [1] * (len(ids) - tail)
    with torch.no_grad():
        h = model(input_ids=torch.tensor([ids]), token_type_ids=torch.tensor([types])).last_hidden_state[0]
    ref = {"words": words, "ids": ids, "types": types, "hidden": h.double().tolist()}
    (out / "reference.json").write_text(json.dumps(ref))
    for f in ("config.json",):
        cfg_json = json.loads((out / f).read_text())
        (out / f).write_text(json.dumps(cfg_json, indent=1, sort_keys=True))


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/tiny_bert"))
