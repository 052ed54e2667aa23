import logging
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexforge.synthetic import make_corpus, sentence
from lexforge.tokenizer import (
    CONT, SPECIALS, UNK, TokenizerConfig, Vocabulary, encode, fragmentation_report,
    normalize, train_wordpiece,
)


def _vocab(*tokens):
    return Vocabulary(list(SPECIALS) + list(tokens))


# --- independent reference trainer: full recount every iteration -----------

def reference_wordpiece(texts, vocab_size, min_frequency=2, seed_terms=()):
    counts = Counter(w for t in texts for w in t.split())
    tokens = list(SPECIALS) + list(seed_terms)
    chars = Counter()
    for w, c in counts.items():
        for k, ch in enumerate(w):
            chars[ch if k == 0 else "##" + ch] += c
    alpha = sorted((s for s in chars if chars[s] >= min_frequency and s not in tokens),
                   key=lambda s: (-chars[s], s))
    tokens += alpha
    ok = set(alpha) | set(seed_terms)
    words = {w: [w[0]] + ["##" + ch for ch in w[1:]] for w in counts}
    words = {w: s for w, s in words.items() if all(x in ok for x in s)}
    while len(tokens) < vocab_size:
        pc, tc = Counter(), Counter()
        for w, syms in words.items():
            for s in syms:
                tc[s] += counts[w]
            for p in zip(syms, syms[1:]):
                pc[p] += counts[w]
        if not pc:
            break
        a, b = min(pc, key=lambda p: (-pc[p] / (tc[p[0]] * tc[p[1]]), p))
        ab = a + b[2:]
        for w, syms in words.items():
            out, i = [], 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                    out.append(ab)
                    i += 2
                else:
                    out.append(syms[i])
                    i += 1
            words[w] = out
        if ab not in tokens:
            tokens.append(ab)
    return tokens


def test_matches_reference_trainer_on_small_corpus():
    rng = random.Random(4)
    texts = [" ".join(sentence(rng, 5, 5).split()) for _ in range(10)]  # 50 words
    assert sum(len(t.split()) for t in texts) == 50
    cfg = TokenizerConfig(vocab_size=120, min_frequency=2)
    ours = train_wordpiece(texts, cfg)
    ref = reference_wordpiece(texts, 120, 2)
    assert set(ours.tokens) == set(ref)
    assert ours.tokens == ref


def test_matches_reference_with_seed_terms():
    rng = random.Random(8)
    texts = [sentence(rng) for _ in range(30)]
    seeds = ("tereke", "karar")
    ours = train_wordpiece(texts, TokenizerConfig(vocab_size=150, seed_terms=seeds))
    assert set(ours.tokens) == set(reference_wordpiece(texts, 150, 2, seeds))


def test_single_word_corpus_round_trip():
    v = train_wordpiece(["karar"] * 20, TokenizerConfig(vocab_size=10))
    assert "karar" in v or all(t in v for t in ["k", "##a", "##r"])
    toks = encode(v, "karar")
    assert UNK not in toks
    assert "".join(t[len(CONT):] if t.startswith(CONT) else t for t in toks) == "karar"


def test_short_vocabulary_warns(caplog):
    with caplog.at_level(logging.WARNING):
        v = train_wordpiece(["karar"] * 20, TokenizerConfig(vocab_size=100))
    assert len(v) < 100
    assert "too small" in caplog.text


def test_seed_term_atomic_regardless_of_frequency():
    v = train_wordpiece(make_corpus(20, seed=1), TokenizerConfig(vocab_size=300, seed_terms=("tereke",)))
    assert v.index["tereke"] == len(SPECIALS)
    assert encode(v, "tereke") == ["tereke"]


def test_seed_terms_normalized_and_validated():
    assert TokenizerConfig(vocab_size=50, seed_terms=(" a ", "a", "")).seed_terms == ("a",)
    with pytest.raises(ValueError):
        TokenizerConfig(vocab_size=50, seed_terms=("iki kelime",))
    with pytest.raises(ValueError):
        TokenizerConfig(vocab_size=50, seed_terms=("##ek",))
    with pytest.raises(ValueError):
        TokenizerConfig(vocab_size=6, seed_terms=("a", "b"))


def test_exact_size_and_layout():
    v = train_wordpiece(make_corpus(60, seed=2), TokenizerConfig(vocab_size=400))
    assert len(v) == 400
    assert tuple(v.tokens[:5]) == SPECIALS
    assert len(set(v.tokens)) == 400


def test_deterministic():
    docs = make_corpus(30, seed=3)
    cfg = TokenizerConfig(vocab_size=250)
    assert train_wordpiece(docs, cfg) == train_wordpiece(list(reversed(docs)), cfg)


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        train_wordpiece([], TokenizerConfig(vocab_size=50))


def test_three_complete_tokens():
    v = _vocab("İçtihadı", "Birleştirme", "Kararı", "İ", "##ç")
    assert encode(v, "İçtihadı Birleştirme Kararı") == ["İçtihadı", "Birleştirme", "Kararı"]


def test_empty_and_unknown():
    v = _vocab("a", "##b")
    assert encode(v, "") == []
    assert encode(v, "   ") == []
    assert encode(v, "xyz") == [UNK]
    assert encode(v, "ab ac") == ["a", "##b", UNK]


def test_overlong_word_is_unk():
    v = Vocabulary(list(SPECIALS) + ["a", "##a"], max_word_chars=5)
    assert encode(v, "aaaaaa") == [UNK]
    assert encode(v, "aaaaa") == ["a", "##a", "##a", "##a", "##a"]


def test_normalization_nfc_case_preserved():
    decomposed = "I\u0307"  # I + combining dot above; NFC gives U+0130
    v = _vocab("\u0130")
    assert encode(v, decomposed) == ["\u0130"]
    assert normalize("  Dava\t\nKARAR ") == "Dava KARAR"


def test_vocabulary_validation():
    with pytest.raises(ValueError):
        Vocabulary(["a"] + list(SPECIALS))
    with pytest.raises(ValueError):
        _vocab("a", "a")
    with pytest.raises(ValueError):
        _vocab("a b")


def test_save_load_round_trip(tmp_path):
    v = train_wordpiece(make_corpus(20, seed=5), TokenizerConfig(vocab_size=200))
    p = tmp_path / "vocab.txt"
    v.save(p)
    assert p.read_text(encoding="utf-8").splitlines() == v.tokens
    assert Vocabulary.load(p) == v


@pytest.fixture(scope="module")
def trained():
    return train_wordpiece(make_corpus(80, seed=6), TokenizerConfig(vocab_size=600))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_lossless_decode(trained, seed):
    text = sentence(random.Random(seed))
    words = normalize(text).split()
    pieces = trained.encode_words(text)
    for w, ps in zip(words, pieces):
        if ps == [UNK]:
            continue
        assert "".join(p[len(CONT):] if p.startswith(CONT) else p for p in ps) == w


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_adding_whole_word_never_increases_count(trained, seed):
    rng = random.Random(seed)
    line = sentence(rng)
    words = line.split()
    w = rng.choice(words)
    if w in trained:
        return
    # greedy longest-match only changes words that begin with w
    others_ok = all(x == w or not x.startswith(w) for x in words)
    bigger = Vocabulary(trained.tokens + [w])
    before, after = len(encode(trained, line)), len(encode(bigger, line))
    if others_ok:
        assert after <= before
    assert encode(bigger, w) == [w]


def test_fragmentation_identity():
    v = _vocab("karar", "dava")
    r = fragmentation_report(v, ["karar", "dava", "", "karar"])
    assert r.avg_subwords_per_line == 1.0
    assert r.total_lines == 3


def test_fragmentation_arithmetic():
    v = _vocab("a", "##a")
    r = fragmentation_report(v, ["aaaaaa", "aa aa"])
    assert (r.total_subwords, r.avg_subwords_per_line) == (10, 5.0)
    assert r.avg_subwords_per_word == pytest.approx(10 / 3)


def test_fragmentation_matches_recount(trained):
    rng = random.Random(12)
    lines = [sentence(rng) + (" qqq" if i % 7 == 0 else "") for i in range(100)]
    per_line = []
    r = fragmentation_report(trained, lines, per_line)
    recount = [len(encode(trained, line)) for line in lines]
    assert per_line == recount
    assert r.total_subwords == sum(recount)
    assert r.total_words == sum(len(line.split()) for line in lines)
    assert r.unk_words == sum(1 for line in lines for w in line.split() if encode(trained, w) == [UNK])
    assert r.to_json()["avg_subwords_per_line"] == pytest.approx(sum(recount) / 100)


def test_fragmentation_needs_lines():
    with pytest.raises(ValueError):
        fragmentation_report(_vocab("a"), ["", "  "])
