"""Hybrid MLM example generation.

Each example draws one masking paradigm (whole word, token span, word span
or keyword) and selects ``round(mlm_prob * maskable)`` positions. Selected
positions are corrupted with the 80/10/10 mask/random/keep rule and carry
their original id as label; all others are labeled ``IGNORE_INDEX``.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from ._hashing import derive_seed
from ._parallel import ordered_map
from .corpus import Document
from .tokenizer import CLS, MASK, SEP, SPECIALS, Vocabulary, normalize, split_words

IGNORE_INDEX = -100

WHOLE_WORD = "whole_word"
TOKEN_SPAN = "token_span"
WORD_SPAN = "word_span"
KEYWORD = "keyword"
STRATEGIES = (WHOLE_WORD, TOKEN_SPAN, WORD_SPAN, KEYWORD)

ACT_MASK, ACT_RANDOM, ACT_KEEP = "mask", "random", "keep"
ACTIONS = (ACT_MASK, ACT_RANDOM, ACT_KEEP)


def _default_weights():
    return {WHOLE_WORD: 0.20, TOKEN_SPAN: 0.20, WORD_SPAN: 0.30, KEYWORD: 0.30}


def _default_replace():
    return {ACT_MASK: 0.8, ACT_RANDOM: 0.1, ACT_KEEP: 0.1}


@dataclass(frozen=True)
class MaskingConfig:
    mlm_prob: float = 0.25
    strategy_weights: dict = field(default_factory=_default_weights)
    replace_probs: dict = field(default_factory=_default_replace)
    span_len_p: float = 0.2
    span_len_max: int = 10
    seed: int = 42

    def __post_init__(self):
        if not 0 < self.mlm_prob < 1:
            raise ValueError("mlm_prob must be in (0, 1)")
        if set(self.strategy_weights) != set(STRATEGIES):
            raise ValueError(f"strategy_weights must have keys {STRATEGIES}")
        if set(self.replace_probs) != set(ACTIONS):
            raise ValueError(f"replace_probs must have keys {ACTIONS}")
        for name, probs in (("strategy_weights", self.strategy_weights),
                            ("replace_probs", self.replace_probs)):
            if any(p < 0 for p in probs.values()):
                raise ValueError(f"{name} must be non-negative")
            if not math.isclose(math.fsum(probs.values()), 1.0, abs_tol=1e-9):
                raise ValueError(f"{name} must sum to 1.0")
        if not 0 < self.span_len_p <= 1:
            raise ValueError("span_len_p must be in (0, 1]")
        if self.span_len_max < 1:
            raise ValueError("span_len_max must be >= 1")


class KeywordIndex:
    """Word-level trie over normalized multi-word terms."""

    _END = object()

    def __init__(self, terms: Iterable[str] = ()):
        self.root: dict = {}
        self.terms: set[str] = set()
        for t in terms:
            self.add(t)

    def add(self, term: str) -> None:
        words = normalize(term).split()
        if not words:
            raise ValueError("empty keyword term")
        node = self.root
        for w in words:
            node = node.setdefault(w, {})
        node[self._END] = True
        self.terms.add(" ".join(words))

    def __len__(self):
        return len(self.terms)

    @classmethod
    def load(cls, path) -> KeywordIndex:
        with open(path, encoding="utf-8") as fh:
            return cls(line for line in fh if line.strip())


def match_keywords(words: Sequence[str], idx: KeywordIndex) -> list[tuple[int, int]]:
    """Greedy left-to-right, longest-match, non-overlapping word spans ``[start, end)``."""
    spans = []
    i = 0
    while i < len(words):
        node, best = idx.root, None
        j = i
        while j < len(words) and words[j] in node:
            node = node[words[j]]
            j += 1
            if KeywordIndex._END in node:
                best = j
        if best is None:
            i += 1
        else:
            spans.append((i, best))
            i = best
    return spans


@dataclass
class MaskedExample:
    input_ids: list[int]
    labels: list[int]
    word_boundaries: list[bool]
    strategy: str
    actions: list[str] = field(default_factory=list)
    maskable: int = 0
    budget: int = 0
    overshoot: int = 0

    def to_json(self) -> dict:
        return {"input_ids": self.input_ids, "labels": self.labels, "strategy": self.strategy}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


def budget_for(maskable: int, mlm_prob: float) -> int:
    # half-to-even keeps the expected corrupted fraction unbiased across lengths
    return max(1, round(mlm_prob * maskable))


def sample_span_length(rng: random.Random, p: float, cap: int) -> int:
    """Geometric length on {1, 2, ...} with success probability p, clipped at cap."""
    if p >= 1:
        return 1
    u = rng.random()
    return min(cap, 1 + int(math.log1p(-u) / math.log1p(-p)))


class _Selector:
    def __init__(self, maskable: list[int], word_ids: Sequence[int | None], budget: int,
                 rng: random.Random):
        self.maskable = maskable
        self.rng = rng
        self.budget = budget
        self.selected: set[int] = set()
        self.words: dict[int, list[int]] = {}
        for pos in maskable:
            self.words.setdefault(word_ids[pos], []).append(pos)
        self.word_order = sorted(self.words)
        self.position_of = {w: i for i, w in enumerate(self.word_order)}

    @property
    def remaining(self) -> int:
        return self.budget - len(self.selected)

    def fresh(self, positions) -> list[int]:
        return [p for p in positions if p not in self.selected]

    def word_units(self, words) -> list[int]:
        return [p for w in words for p in self.fresh(self.words.get(w, ()))]

    def whole_words(self) -> None:
        order = list(self.word_order)
        self.rng.shuffle(order)
        for w in order:
            if self.remaining <= 0:
                return
            new = self.fresh(self.words[w])
            if new and len(new) <= self.remaining:
                self.selected.update(new)
        if self.remaining > 0:
            for w in order:
                new = self.fresh(self.words[w])
                if new:
                    self.selected.update(new)
                    return

    def token_spans(self, p: float, cap: int) -> None:
        index_of = {pos: i for i, pos in enumerate(self.maskable)}
        while self.remaining > 0:
            free = self.fresh(self.maskable)
            if not free:
                return
            length = min(sample_span_length(self.rng, p, cap), self.remaining)
            start = self.rng.choice(free)
            i = index_of[start]
            span = [start]
            while len(span) < length and i + 1 < len(self.maskable):
                nxt = self.maskable[i + 1]
                if nxt != self.maskable[i] + 1 or nxt in self.selected:
                    break
                span.append(nxt)
                i += 1
            self.selected.update(span)

    def word_spans(self, p: float, cap: int) -> None:
        while self.remaining > 0:
            cands = [w for w in self.word_order if self.fresh(self.words[w])]
            if not cands:
                return
            k = self.rng.randrange(len(cands))
            length = sample_span_length(self.rng, p, cap)
            j = self.position_of[cands[k]]
            run = self.word_order[j:j + length]
            while run and len(self.word_units(run)) > self.remaining:
                run.pop()
            if run:
                self.selected.update(self.word_units(run))
                continue
            fitting = [w for w in cands if len(self.word_units([w])) <= self.remaining]
            if fitting:
                self.selected.update(self.word_units([self.rng.choice(fitting)]))
            else:
                self.selected.update(self.word_units([cands[k]]))
                return

    def keywords(self, spans: Sequence[tuple[int, int]]) -> None:
        units = [self.word_units(range(s, e)) for s, e in spans]
        units = [u for u in units if u]
        self.rng.shuffle(units)
        for u in units:
            if self.remaining <= 0:
                break
            new = self.fresh(u)
            if new and len(new) <= self.remaining:
                self.selected.update(new)
        if self.remaining > 0:
            self.whole_words()


def mask_sequence(input_ids: Sequence[int], word_ids: Sequence[int | None],
                  keyword_spans: Sequence[tuple[int, int]], cfg: MaskingConfig,
                  rng: random.Random, *, mask_id: int, random_ids: Sequence[int],
                  special_ids: frozenset[int] | set[int] = frozenset()) -> MaskedExample:
    """Mask one sequence.

    ``word_ids[i]`` is the word index of position i, or None for special
    positions; ``keyword_spans`` are half-open ranges in the same word index
    space. ``random_ids`` is the pool for random replacement.
    """
    if len(word_ids) != len(input_ids):
        raise ValueError("word_ids must align with input_ids")
    maskable = [i for i, (tid, w) in enumerate(zip(input_ids, word_ids))
                if w is not None and tid not in special_ids]
    if not maskable:
        raise ValueError("sequence has no maskable tokens")

    names = list(STRATEGIES)
    strategy = rng.choices(names, weights=[cfg.strategy_weights[s] for s in names])[0]
    budget = budget_for(len(maskable), cfg.mlm_prob)
    sel = _Selector(maskable, word_ids, budget, rng)
    if strategy == WHOLE_WORD:
        sel.whole_words()
    elif strategy == TOKEN_SPAN:
        sel.token_spans(cfg.span_len_p, cfg.span_len_max)
    elif strategy == WORD_SPAN:
        sel.word_spans(cfg.span_len_p, cfg.span_len_max)
    else:
        sel.keywords(keyword_spans)

    ids = list(input_ids)
    labels = [IGNORE_INDEX] * len(ids)
    p_mask = cfg.replace_probs[ACT_MASK]
    p_rand = p_mask + cfg.replace_probs[ACT_RANDOM]
    actions = []
    for pos in sorted(sel.selected):
        labels[pos] = input_ids[pos]
        u = rng.random()
        if u < p_mask:
            ids[pos] = mask_id
            actions.append(ACT_MASK)
        elif u < p_rand:
            ids[pos] = rng.choice(random_ids)
            actions.append(ACT_RANDOM)
        else:
            actions.append(ACT_KEEP)

    boundaries = [w is not None and (i == 0 or word_ids[i - 1] != w)
                  for i, w in enumerate(word_ids)]
    return MaskedExample(ids, labels, boundaries, strategy, actions, len(maskable), budget,
                         max(0, len(sel.selected) - budget))


@dataclass(frozen=True)
class _Window:
    ordinal: int
    input_ids: tuple[int, ...]
    word_ids: tuple[int | None, ...]
    keyword_spans: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class _Job:
    window: _Window
    cfg: MaskingConfig
    mask_id: int
    random_ids: tuple[int, ...]
    special_ids: frozenset[int]


def _run_job(job: _Job) -> MaskedExample:
    w = job.window
    rng = random.Random(derive_seed(job.cfg.seed, "mask", w.ordinal))
    return mask_sequence(w.input_ids, w.word_ids, w.keyword_spans, job.cfg, rng,
                         mask_id=job.mask_id, random_ids=job.random_ids,
                         special_ids=job.special_ids)


def document_windows(docs: Iterable[Document], vocab: Vocabulary, idx: KeywordIndex | None,
                     max_len: int = 512) -> Iterator[_Window]:
    """Encode documents and cut them into ``[CLS] ... [SEP]`` windows."""
    if max_len < 3:
        raise ValueError("max_len must leave room for [CLS] and [SEP]")
    cls_id, sep_id = vocab.index[CLS], vocab.index[SEP]
    width = max_len - 2
    ordinal = 0
    for doc in docs:
        words = split_words(doc.text)
        ids: list[int] = []
        wids: list[int] = []
        for wi, pieces in enumerate(vocab.encode_words(doc.text)):
            for piece in pieces:
                ids.append(vocab.index[piece])
                wids.append(wi)
        spans = tuple(match_keywords(words, idx)) if idx is not None else ()
        for start in range(0, len(ids), width):
            chunk_ids = ids[start:start + width]
            chunk_wids = wids[start:start + width]
            lo, hi = chunk_wids[0], chunk_wids[-1] + 1
            local = tuple((s, e) for s, e in spans if s < hi and e > lo)
            yield _Window(ordinal, (cls_id, *chunk_ids, sep_id), (None, *chunk_wids, None), local)
            ordinal += 1


def build_dataset(docs: Iterable[Document], vocab: Vocabulary, idx: KeywordIndex | None,
                  cfg: MaskingConfig, max_len: int = 512, threads: int = 1) -> list[MaskedExample]:
    """Masked examples for every window, identical for any ``threads``."""
    special = frozenset(vocab.index[s] for s in SPECIALS)
    pool = tuple(i for i in range(len(vocab)) if i not in special)
    if not pool:
        raise ValueError("vocabulary has no non-special tokens")
    jobs = [_Job(w, cfg, vocab.index[MASK], pool, special)
            for w in document_windows(docs, vocab, idx, max_len)]
    return ordered_map(_run_job, jobs, threads=threads, chunksize=256)


def masking_summary(examples: Iterable[MaskedExample], cfg: MaskingConfig) -> dict:
    strategies: Counter = Counter()
    actions: Counter = Counter()
    maskable = corrupted = overshoot = n = 0
    for ex in examples:
        n += 1
        strategies[ex.strategy] += 1
        actions.update(ex.actions)
        maskable += ex.maskable
        corrupted += len(ex.actions)
        overshoot += ex.overshoot
    return {
        "examples": n,
        "strategy_counts": {s: strategies[s] for s in STRATEGIES},
        "action_counts": {a: actions[a] for a in ACTIONS},
        "maskable_tokens": maskable,
        "corrupted_tokens": corrupted,
        "corrupted_fraction": corrupted / maskable if maskable else 0.0,
        "overshoot_tokens": overshoot,
        "strategy_sampling": "per_example",
        "seed": cfg.seed,
        "config": {
            "mlm_prob": cfg.mlm_prob,
            "strategy_weights": dict(cfg.strategy_weights),
            "replace_probs": dict(cfg.replace_probs),
            "span_len_p": cfg.span_len_p,
            "span_len_max": cfg.span_len_max,
        },
    }
