"""Fill-mask benchmark scoring: Top-k accuracy with percentile-bootstrap CIs."""

from __future__ import annotations

import json
import os
import unicodedata
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import SCHEMA_VERSION

PLACEHOLDER = "[MASK]"


class ClozeError(ValueError):
    pass


@dataclass(frozen=True)
class ClozeItem:
    id: str
    text: str
    answer: str
    subdomain: str | None = None

    def __post_init__(self):
        if self.text.count(PLACEHOLDER) != 1:
            raise ClozeError(f"item {self.id!r}: text must contain exactly one {PLACEHOLDER}")
        if not self.answer.strip():
            raise ClozeError(f"item {self.id!r}: empty answer")


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    candidates: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.candidates:
            raise ClozeError(f"prediction {self.id!r}: no candidates")
        probs = [p for _, p in self.candidates]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ClozeError(f"prediction {self.id!r}: probability outside [0, 1]")
        if any(b > a for a, b in zip(probs, probs[1:])):
            raise ClozeError(f"prediction {self.id!r}: probabilities must be non-increasing")


def load_items(path: str | os.PathLike) -> list[ClozeItem]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                o = json.loads(line)
                out.append(ClozeItem(str(o["id"]), o["text"], o["answer"], o.get("subdomain")))
    return out


def load_predictions(path: str | os.PathLike) -> list[PredictionRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                o = json.loads(line)
                cands = tuple((str(t), float(p)) for t, p in o["candidates"])
                out.append(PredictionRecord(str(o["id"]), cands))
    return out


def normalize_term(term: str, case_fold: bool = False) -> str:
    t = unicodedata.normalize("NFC", term).strip()
    return t.casefold() if case_fold else t


def _pair(items: Sequence[ClozeItem], preds: Sequence[PredictionRecord]) -> list[PredictionRecord]:
    by_id: dict[str, PredictionRecord] = {}
    for p in preds:
        if p.id in by_id:
            raise ClozeError(f"duplicate prediction id {p.id!r}")
        by_id[p.id] = p
    item_ids = [it.id for it in items]
    if len(set(item_ids)) != len(item_ids):
        raise ClozeError("duplicate item ids")
    missing = [i for i in item_ids if i not in by_id]
    if missing:
        raise ClozeError(f"{len(missing)} items lack predictions, e.g. {missing[0]!r}")
    extra = set(by_id) - set(item_ids)
    if extra:
        raise ClozeError(f"{len(extra)} predictions have no item, e.g. {sorted(extra)[0]!r}")
    return [by_id[i] for i in item_ids]


def score_topk(items: Sequence[ClozeItem], preds: Sequence[PredictionRecord], k: int,
               case_fold: bool = False) -> tuple[float, list[int]]:
    """Accuracy and per-item 0/1 flags: gold among the first k candidates."""
    if k < 1:
        raise ValueError("k must be >= 1")
    paired = _pair(items, preds)
    flags = []
    for item, pred in zip(items, paired):
        gold = normalize_term(item.answer, case_fold)
        top = {normalize_term(t, case_fold) for t, _ in pred.candidates[:k]}
        flags.append(int(gold in top))
    return (sum(flags) / len(flags) if flags else 0.0), flags


def bootstrap_ci(flags: Sequence[int], resamples: int = 10_000, level: float = 0.95,
                 seed: int = 7) -> tuple[float, float]:
    """Percentile bootstrap interval of the mean of 0/1 flags."""
    # sorted so the interval depends on the multiset of flags, not their order
    x = np.sort(np.asarray(flags, dtype=np.float64))
    if x.size == 0:
        raise ValueError("bootstrap_ci needs at least one flag")
    if resamples < 1000:
        raise ValueError("resamples must be >= 1000")
    rng = np.random.default_rng(seed)
    means = np.empty(resamples)
    block = max(1, 2_000_000 // x.size)
    for start in range(0, resamples, block):
        m = min(block, resamples - start)
        idx = rng.integers(0, x.size, size=(m, x.size))
        means[start:start + m] = x[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)


@dataclass(frozen=True)
class ClozeConfig:
    resamples: int = 10_000
    level: float = 0.95
    seed: int = 7
    case_fold: bool = False


@dataclass
class ClozeReport:
    n: int
    top1: float
    top3: float
    ci_top1: tuple[float, float]
    ci_top3: tuple[float, float]
    per_subdomain: dict
    items: list[dict]
    config: ClozeConfig

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "top1": self.top1,
            "top3": self.top3,
            "ci_top1": list(self.ci_top1),
            "ci_top3": list(self.ci_top3),
            "per_subdomain": self.per_subdomain,
            "items": self.items,
            "seed": self.config.seed,
            "config": {"resamples": self.config.resamples, "level": self.config.level,
                       "case_fold": self.config.case_fold, "method": "percentile"},
        }


def evaluate_cloze(items: Sequence[ClozeItem], preds: Iterable[PredictionRecord],
                   cfg: ClozeConfig = ClozeConfig()) -> ClozeReport:
    preds = list(preds)
    if not items:
        raise ClozeError("no cloze items")
    top1, f1 = score_topk(items, preds, 1, cfg.case_fold)
    top3, f3 = score_topk(items, preds, 3, cfg.case_fold)
    ci1 = bootstrap_ci(f1, cfg.resamples, cfg.level, cfg.seed)
    ci3 = bootstrap_ci(f3, cfg.resamples, cfg.level, cfg.seed)
    groups = defaultdict(lambda: [0, 0, 0])
    for it, a, b in zip(items, f1, f3):
        g = groups[it.subdomain if it.subdomain is not None else ""]
        g[0] += 1
        g[1] += a
        g[2] += b
    per_sub = {k: {"n": n, "top1": c1 / n, "top3": c3 / n}
               for k, (n, c1, c3) in sorted(groups.items())}
    rows = sorted(({"id": it.id, "top1": a, "top3": b} for it, a, b in zip(items, f1, f3)),
                  key=lambda r: r["id"])
    return ClozeReport(len(items), top1, top3, ci1, ci3, per_sub, rows, cfg)
