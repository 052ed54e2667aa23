"""Cased WordPiece vocabulary training, encoding and fragmentation statistics."""

from __future__ import annotations

import heapq
import logging
import os
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import Document

logger = logging.getLogger(__name__)

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)
CONT = "##"


def normalize(text: str) -> str:
    """NFC, whitespace collapsed, case preserved."""
    return " ".join(unicodedata.normalize("NFC", text).split())


def split_words(text: str) -> list[str]:
    return unicodedata.normalize("NFC", text).split()


class Vocabulary:
    """Ordered subword inventory; line number in ``vocab.txt`` is the id."""

    def __init__(self, tokens: Sequence[str], max_word_chars: int = 100):
        tokens = list(tokens)
        if tuple(tokens[:len(SPECIALS)]) != SPECIALS:
            raise ValueError(f"vocabulary must start with {SPECIALS}")
        index = {}
        for i, tok in enumerate(tokens):
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"invalid token at id {i}: {tok!r}")
            if tok in index:
                raise ValueError(f"duplicate token {tok!r} at ids {index[tok]} and {i}")
            index[tok] = i
        self.tokens = tokens
        self.index = index
        self.max_word_chars = max_word_chars
        self._max_len = max((len(t) for t in tokens), default=1)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    def special_ids(self) -> set[int]:
        return {self.index[s] for s in SPECIALS}

    @classmethod
    def load(cls, path: str | os.PathLike, **kw) -> Vocabulary:
        with open(path, encoding="utf-8") as fh:
            return cls([line.rstrip("\n") for line in fh if line.rstrip("\n")], **kw)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self.tokens:
                fh.write(tok + "\n")

    def encode_word(self, word: str) -> list[str]:
        if len(word) > self.max_word_chars:
            return [UNK]
        pieces = []
        start = 0
        while start < len(word):
            end = min(len(word), start + self._max_len)
            piece = None
            while end > start:
                cand = word[start:end] if start == 0 else CONT + word[start:end]
                if cand in self.index:
                    piece = cand
                    break
                end -= 1
            if piece is None:
                return [UNK]
            pieces.append(piece)
            start = end
        return pieces

    def encode_words(self, text: str) -> list[list[str]]:
        """Subwords grouped per whitespace-delimited word."""
        return [self.encode_word(w) for w in split_words(text)]


def encode(v: Vocabulary, text: str) -> list[str]:
    """Greedy longest-match-first WordPiece; an unmatched word becomes [UNK]."""
    return [p for word in v.encode_words(text) for p in word]


@dataclass(frozen=True)
class TokenizerConfig:
    vocab_size: int = 48_000
    min_frequency: int = 2
    seed_terms: tuple[str, ...] = ()
    max_word_chars: int = 100

    def __post_init__(self):
        seeds = tuple(dict.fromkeys(normalize(t) for t in self.seed_terms if normalize(t)))
        for t in seeds:
            if " " in t:
                raise ValueError(f"seed term must be a single word: {t!r}")
            if t.startswith(CONT):
                raise ValueError(f"seed term may not start with {CONT!r}: {t!r}")
        object.__setattr__(self, "seed_terms", seeds)
        if self.vocab_size <= len(SPECIALS) + len(seeds):
            raise ValueError("vocab_size must exceed specials + seed terms")
        if self.min_frequency < 1:
            raise ValueError("min_frequency must be >= 1")


def count_words(texts: Iterable[str], max_word_chars: int = 100) -> Counter:
    counts: Counter = Counter()
    for text in texts:
        counts.update(w for w in split_words(text) if len(w) <= max_word_chars)
    return counts


def _initial_split(word: str) -> list[str]:
    return [word[0]] + [CONT + ch for ch in word[1:]]


def _join(a: str, b: str) -> str:
    return a + b[len(CONT):]


@dataclass
class _MergeState:
    words: list[list[str]]
    freqs: list[int]
    pair_counts: Counter = field(default_factory=Counter)
    tok_counts: Counter = field(default_factory=Counter)
    where: dict = field(default_factory=dict)
    pairs_of: dict = field(default_factory=dict)

    def add_word(self, i: int, sign: int) -> set:
        syms, f = self.words[i], self.freqs[i] * sign
        touched = set()
        for s in syms:
            self.tok_counts[s] += f
        for p in zip(syms, syms[1:]):
            self.pair_counts[p] += f
            touched.add(p)
            if sign > 0:
                self.where.setdefault(p, set()).add(i)
                self.pairs_of.setdefault(p[0], set()).add(p)
                self.pairs_of.setdefault(p[1], set()).add(p)
            elif self.pair_counts[p] <= 0:
                del self.pair_counts[p]
                self.where.pop(p, None)
                self.pairs_of.get(p[0], set()).discard(p)
                self.pairs_of.get(p[1], set()).discard(p)
        if sign < 0:
            for p in touched:
                if p in self.where:
                    self.where[p].discard(i)
        return touched

    def score(self, p) -> float:
        return self.pair_counts[p] / (self.tok_counts[p[0]] * self.tok_counts[p[1]])


def _merge_symbols(syms: list[str], a: str, b: str, ab: str) -> list[str]:
    out = []
    i = 0
    while i < len(syms):
        if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
            out.append(ab)
            i += 2
        else:
            out.append(syms[i])
            i += 1
    return out


def learn_merges(word_counts: dict[str, int], budget: int, taken: set[str]) -> list[str]:
    """New tokens from WordPiece merges, best ``count(ab) / (count(a) count(b))`` first.

    Ties break on the lexicographically smallest pair. A merge whose result is
    already in ``taken`` is applied but does not consume budget.
    """
    words = sorted(word_counts)
    state = _MergeState([_initial_split(w) for w in words], [word_counts[w] for w in words])
    for i in range(len(words)):
        state.add_word(i, +1)
    heap = [(-state.score(p), p) for p in state.pair_counts]
    heapq.heapify(heap)
    learned: list[str] = []
    while heap and len(learned) < budget:
        neg, p = heapq.heappop(heap)
        if state.pair_counts.get(p, 0) <= 0 or -neg != state.score(p):
            continue
        a, b = p
        ab = _join(a, b)
        touched = set()
        for i in sorted(state.where.get(p, ())):
            touched |= state.add_word(i, -1)
            state.words[i] = _merge_symbols(state.words[i], a, b, ab)
            touched |= state.add_word(i, +1)
        for tok in (a, b, ab):
            touched |= state.pairs_of.get(tok, set())
        for q in touched:
            if state.pair_counts.get(q, 0) > 0:
                heapq.heappush(heap, (-state.score(q), q))
        if ab not in taken:
            taken.add(ab)
            learned.append(ab)
    return learned


def _alphabet(word_counts: dict[str, int], min_frequency: int) -> Counter:
    chars: Counter = Counter()
    for w, c in word_counts.items():
        for sym in _initial_split(w):
            chars[sym] += c
    return Counter({s: c for s, c in chars.items() if c >= min_frequency})


def train_wordpiece(corpus: Iterable[Document | str], cfg: TokenizerConfig) -> Vocabulary:
    """Train a vocabulary of ``cfg.vocab_size`` entries.

    Layout: specials, seed terms, observed characters (most frequent first),
    then learned merges. If the corpus cannot fill the budget the vocabulary
    is returned short and a warning is logged.
    """
    texts = (d.text if isinstance(d, Document) else d for d in corpus)
    word_counts = count_words(texts, cfg.max_word_chars)
    if not word_counts:
        raise ValueError("cannot train a tokenizer on an empty corpus")

    tokens = list(SPECIALS) + list(cfg.seed_terms)
    taken = set(tokens)
    budget = cfg.vocab_size - len(tokens)

    alpha = _alphabet(word_counts, cfg.min_frequency)
    ranked = sorted((s for s in alpha if s not in taken), key=lambda s: (-alpha[s], s))
    if len(ranked) > budget:
        logger.warning("alphabet of %d symbols truncated to budget %d", len(ranked), budget)
        ranked = ranked[:budget]
    tokens += ranked
    taken.update(ranked)
    allowed = set(ranked) | set(cfg.seed_terms)
    trainable = {w: c for w, c in word_counts.items()
                 if all(s in allowed for s in _initial_split(w))}

    tokens += learn_merges(trainable, cfg.vocab_size - len(tokens), taken)
    if len(tokens) < cfg.vocab_size:
        logger.warning("corpus too small to fill vocabulary: %d of %d entries",
                       len(tokens), cfg.vocab_size)
    return Vocabulary(tokens, max_word_chars=cfg.max_word_chars)


@dataclass(frozen=True)
class FragmentationReport:
    total_lines: int
    total_words: int
    total_subwords: int
    unk_words: int = 0

    @property
    def avg_subwords_per_line(self) -> float:
        return self.total_subwords / self.total_lines

    @property
    def avg_subwords_per_word(self) -> float:
        return self.total_subwords / self.total_words if self.total_words else 0.0

    def to_json(self) -> dict:
        return {
            "avg_subwords_per_line": self.avg_subwords_per_line,
            "avg_subwords_per_word": self.avg_subwords_per_word,
            "total_lines": self.total_lines,
            "total_words": self.total_words,
            "total_subwords": self.total_subwords,
            "unk_words": self.unk_words,
        }


def fragmentation_report(v: Vocabulary, lines: Iterable[str],
                         per_line: list[int] | None = None) -> FragmentationReport:
    """Subword counts over every non-empty line.

    ``per_line``, if given, receives each line's subword count.
    """
    n_lines = n_words = n_sub = n_unk = 0
    for line in lines:
        words = v.encode_words(line)
        if not words:
            continue
        count = sum(len(w) for w in words)
        n_lines += 1
        n_words += len(words)
        n_sub += count
        n_unk += sum(1 for w in words if w == [UNK])
        if per_line is not None:
            per_line.append(count)
    if n_lines == 0:
        raise ValueError("fragmentation_report needs at least one non-empty line")
    return FragmentationReport(n_lines, n_words, n_sub, n_unk)
