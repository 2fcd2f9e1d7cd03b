"""Builds the tiny random checkpoints under crates/lm/tests/fixtures and the
reference scores the Rust backends are tested against.

Scores are computed with the transformers reference implementations of each
architecture; the input layout is rebuilt here from the token pieces.
"""

import json
import math
import pathlib

import torch
from tokenizers import Tokenizer, decoders, models, normalizers, pre_tokenizers, trainers
from transformers import (
    BertConfig,
    BertForMaskedLM,
    GPT2Config,
    GPT2LMHeadModel,
    RobertaConfig,
    RobertaForMaskedLM,
)

ROOT = pathlib.Path(__file__).resolve().parents[1]
OUT = ROOT / "crates" / "lm" / "tests" / "fixtures"
BANK = json.loads((ROOT / "crates" / "core" / "data" / "itembank.json").read_text())
BLANK = "___"


def base_cases():
    """(context, candidates) for every published base item, rendered with a
    minimal copy of the template rules."""
    cases = []
    for tpl in BANK["templates"]:
        s = next(x for x in BANK["sets"] if x["id"] == tpl["set"])
        targets = [p["target"] for p in s["pairs"]]
        for p in s["pairs"]:
            fact = tpl["fact"]
            bg = p["background"]
            if "{a:background}" in fact:
                art = "an" if bg[0].lower() in "aeiou" else "a"
                fact = fact.replace("{a:background}", f"{art} {bg}")
            fact = fact.replace("{background}", bg)
            query = tpl["query"].replace("{entity}", p["entity"])
            cases.append((f"{p['entity']} {fact}. {query}", targets))
    return cases


def extra_cases():
    capitals = ["Paris", "Santiago", "Beijing", "Helsinki", "Jakarta", "Warsaw"]
    return [
        ("Sebastian lives in France, Rowan lives in Indonesia, and Daniel lives in Chile. "
         "The capital of Sebastian's country is ___", capitals),
        ("Jake works as a florist and Jack writes poetry. For his job, Jake sells ___",
         ["flowers", "glasses", "bread", "meat", "fish", "paintings"]),
        ("The capital of Poland is ___", capitals),
        ("Rowan lives in Finland. The capital of Rowan's country is ___ indeed.", capitals),
    ]


def corpus():
    lines = [c for c, _ in base_cases() + extra_cases()]
    for s in BANK["sets"]:
        for p in s["pairs"]:
            lines.append(f"{p['background']} {p['target']}")
    lines += BANK["fillers"] + BANK["names"] + BANK.get("aliases", [])
    return lines


def wordpiece_tokenizer(lines):
    tok = Tokenizer(models.WordPiece(unk_token="[UNK]", max_input_chars_per_word=100))
    tok.normalizer = normalizers.BertNormalizer(lowercase=True)
    tok.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tok.decoder = decoders.WordPiece()
    trainer = trainers.WordPieceTrainer(
        vocab_size=160, special_tokens=["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    )
    tok.train_from_iterator(lines, trainer)
    return tok


def bytelevel_tokenizer(lines, specials, size):
    tok = Tokenizer(models.BPE())
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=size,
        special_tokens=specials,
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(lines, trainer)
    return tok


def perturb(model, seed):
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in model.named_parameters():
            noise = torch.randn(p.shape, generator=g)
            if "LayerNorm" in name or name.split(".")[-2].startswith("ln_"):
                if name.endswith("weight"):
                    p.copy_(1.0 + 0.1 * noise)
                else:
                    p.copy_(0.1 * noise)
            else:
                p.copy_(0.3 * noise)
    model.eval()
    return model


def enc(tok, text):
    return tok.encode(text, add_special_tokens=False).ids


def variants(tok, cand):
    out = []
    for text in (" " + cand, cand):
        ids = enc(tok, text)
        if ids and ids not in out:
            out.append(ids)
    return out


def split_masked(context):
    left, right = context.split(BLANK)
    left = left.rstrip()
    cut = left.rfind(". ")
    if cut < 0:
        return "", left, right
    return left[: cut + 1], left[cut + 2 :], right


def masked_scores(model, tok, kind, context, candidates):
    a, b, tail = split_masked(context)
    vocab = tok.get_vocab()
    if kind == "bert":
        cls, sep, mask = vocab["[CLS]"], vocab["[SEP]"], vocab["[MASK]"]
    else:
        cls, sep, mask = vocab["<s>"], vocab["</s>"], vocab["<mask>"]
    a_ids, b_ids, t_ids = enc(tok, a), enc(tok, b), enc(tok, tail)
    results = []
    for cand in candidates:
        best = None
        for ids in variants(tok, cand):
            k = len(ids)
            if kind == "bert":
                if a_ids:
                    first = [cls] + a_ids + [sep]
                else:
                    first = [cls]
                second = b_ids + [mask] * k + t_ids + [sep]
                types = [0] * len(first) + [1 if a_ids else 0] * len(second)
                start = len(first) + len(b_ids)
            else:
                first = [cls] + a_ids + [sep, sep] if a_ids else [cls]
                second = b_ids + [mask] * k + t_ids + [sep]
                types = [0] * (len(first) + len(second))
                start = len(first) + len(b_ids)
            input_ids = torch.tensor([first + second])
            with torch.no_grad():
                logits = model(
                    input_ids=input_ids,
                    token_type_ids=torch.tensor([types]),
                    attention_mask=torch.ones_like(input_ids),
                ).logits[0].double()
            lp = torch.log_softmax(logits, dim=-1)
            score = sum(lp[start + j, t].item() for j, t in enumerate(ids))
            if best is None or score > best[0]:
                best = (score, k)
        results.append({"candidate": cand, "log_prob": best[0], "n_subtokens": best[1]})
    return results


def causal_scores(model, tok, context, candidates):
    prefix = context.split(BLANK)[0].rstrip()
    bos = tok.get_vocab()["<|endoftext|>"]
    p_ids = [bos] + enc(tok, prefix)
    results = []
    for cand in candidates:
        best = None
        for ids in variants(tok, cand):
            input_ids = torch.tensor([p_ids + ids])
            with torch.no_grad():
                logits = model(input_ids=input_ids).logits[0].double()
            lp = torch.log_softmax(logits, dim=-1)
            score = sum(lp[len(p_ids) - 1 + j, t].item() for j, t in enumerate(ids))
            if best is None or score > best[0]:
                best = (score, len(ids))
        results.append({"candidate": cand, "log_prob": best[0], "n_subtokens": best[1]})
    return results


def main():
    torch.manual_seed(0)
    lines = corpus()
    cases = base_cases() + extra_cases()
    reference = {}

    wp = wordpiece_tokenizer(lines)
    bert_cfg = BertConfig(
        vocab_size=wp.get_vocab_size(), hidden_size=32, num_hidden_layers=2, num_attention_heads=4,
        intermediate_size=64, max_position_embeddings=128, type_vocab_size=2, pad_token_id=0,
    )
    bert = perturb(BertForMaskedLM(bert_cfg), 1)

    rb_tok = bytelevel_tokenizer(lines, ["<s>", "<pad>", "</s>", "<unk>", "<mask>"], 300)
    rb_cfg = RobertaConfig(
        vocab_size=rb_tok.get_vocab_size(), hidden_size=32, num_hidden_layers=2, num_attention_heads=4,
        intermediate_size=64, max_position_embeddings=130, type_vocab_size=1,
        pad_token_id=1, bos_token_id=0, eos_token_id=2,
    )
    roberta = perturb(RobertaForMaskedLM(rb_cfg), 2)

    gp_tok = bytelevel_tokenizer(lines, ["<|endoftext|>"], 300)
    gp_cfg = GPT2Config(
        vocab_size=gp_tok.get_vocab_size(), n_positions=128, n_embd=32, n_layer=2, n_head=4,
        bos_token_id=0, eos_token_id=0,
    )
    gpt2 = perturb(GPT2LMHeadModel(gp_cfg), 3)

    for name, model, tok in [("tiny-bert", bert, wp), ("tiny-roberta", roberta, rb_tok), ("tiny-gpt2", gpt2, gp_tok)]:
        d = OUT / name
        d.mkdir(parents=True, exist_ok=True)
        model.save_pretrained(d, safe_serialization=True)
        tok.save(str(d / "tokenizer.json"))
        entries = []
        for context, cands in cases:
            if name == "tiny-gpt2":
                scores = causal_scores(model, tok, context, cands)
            else:
                scores = masked_scores(model, tok, "bert" if name == "tiny-bert" else "roberta", context, cands)
            assert all(math.isfinite(s["log_prob"]) for s in scores)
            entries.append({"context": context, "scores": scores})
        reference[name] = entries

    (OUT / "reference.json").write_text(json.dumps(reference, indent=1) + "\n")
    for name, entries in reference.items():
        multi = sum(1 for e in entries for s in e["scores"] if s["n_subtokens"] > 1)
        print(f"{name}: {len(entries)} contexts, {multi} multi-piece candidate scores")


if __name__ == "__main__":
    main()
