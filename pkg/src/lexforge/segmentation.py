"""Sliding windows and BIO segmentation metrics for court-decision structure.

All metrics work on word-level tag sequences. Per-document results are
kept as integer counts and summed, so aggregation is order independent.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import SCHEMA_VERSION

SEGMENTS = ("header", "formal", "claim", "defense", "reasoning", "ruling", "footer", "dissent")
OUTSIDE = "O"


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class WindowConfig:
    size: int = 512
    stride: int = 256

    def __post_init__(self):
        if not 0 < self.stride <= self.size:
            raise ValueError(f"need 0 < stride <= size, got size={self.size} stride={self.stride}")


@dataclass(frozen=True)
class Window:
    start: int
    tokens: list

    @property
    def end(self) -> int:
        return self.start + len(self.tokens)


def window_starts(n: int, cfg: WindowConfig) -> list[int]:
    if n <= 0:
        raise SegmentationError("cannot window an empty token list")
    count = 1 if n <= cfg.size else math.ceil((n - cfg.size) / cfg.stride) + 1
    return [k * cfg.stride for k in range(count)]


def window_split(tokens: Sequence, cfg: WindowConfig = WindowConfig()) -> list[Window]:
    """Windows at 0, stride, 2*stride, ... until the last one reaches the end."""
    return [Window(s, list(tokens[s:s + cfg.size])) for s in window_starts(len(tokens), cfg)]


def merge_window_predictions(windows: Sequence[tuple[int, Sequence[str]]], length: int) -> list[str]:
    """Merge per-window tags, each token taking the window where it sits farthest from an edge.

    ``windows`` holds ``(start, tags)`` pairs. Ties go to the earlier window.
    """
    best: list[tuple[int, int] | None] = [None] * length  # (edge distance, window idx)
    for w, (start, tags) in enumerate(windows):
        end = start + len(tags)
        if start < 0 or end > length or not tags:
            raise SegmentationError(f"window {w} [{start}, {end}) does not fit document of {length}")
        for pos in range(start, end):
            d = min(pos - start, end - 1 - pos)
            cur = best[pos]
            if cur is None or d > cur[0]:
                best[pos] = (d, w)
    out = []
    for pos, b in enumerate(best):
        if b is None:
            raise SegmentationError(f"token {pos} not covered by any window")
        start, tags = windows[b[1]]
        out.append(tags[pos - start])
    return out


@dataclass(frozen=True)
class TagSequence:
    doc_id: str
    tokens: tuple
    tags: tuple

    def __post_init__(self):
        if len(self.tags) != len(self.tokens):
            raise SegmentationError(
                f"{self.doc_id}: {len(self.tags)} tags for {len(self.tokens)} tokens")
        for t in self.tags:
            parse_tag(t)

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "tokens": list(self.tokens), "tags": list(self.tags)}


@dataclass(frozen=True, order=True)
class Span:
    label: str
    start: int
    end: int


def parse_tag(tag: str) -> tuple[str, str | None]:
    if tag == OUTSIDE:
        return OUTSIDE, None
    if len(tag) > 2 and tag[:2] in ("B-", "I-"):
        return tag[0], tag[2:]
    raise SegmentationError(f"invalid BIO tag {tag!r}")


def bio_violations(tags: Sequence[str]) -> list[int]:
    """Positions of I-x not preceded by B-x or I-x of the same type."""
    bad = []
    prev = None
    for i, t in enumerate(tags):
        kind, label = parse_tag(t)
        if kind == "I" and prev != label:
            bad.append(i)
        prev = label
    return bad


def repair(tags: Sequence[str]) -> tuple[list[str], int]:
    """Convert orphan I-x tags to B-x; returns (tags, repair count)."""
    out = list(tags)
    bad = bio_violations(tags)
    for i in bad:
        out[i] = "B-" + out[i][2:]
    return out, len(bad)


def extract_spans(tags: Sequence[str]) -> list[Span]:
    """Maximal B-x I-x* runs after repairing orphan I tags."""
    tags, _ = repair(tags)
    spans = []
    cur = None
    for i, t in enumerate(tags):
        kind, label = parse_tag(t)
        if kind == "I":
            continue
        if cur is not None:
            spans.append(Span(cur[0], cur[1], i))
            cur = None
        if kind == "B":
            cur = (label, i)
    if cur is not None:
        spans.append(Span(cur[0], cur[1], len(tags)))
    return spans


def _check(gold: Sequence[str], pred: Sequence[str]) -> None:
    if len(gold) != len(pred):
        raise SegmentationError(f"length mismatch: gold {len(gold)} vs pred {len(pred)}")


def _boundary_events(spans: Iterable[Span]) -> dict[tuple[str, str], list[int]]:
    events: dict[tuple[str, str], list[int]] = {}
    for s in spans:
        events.setdefault((s.label, "start"), []).append(s.start)
        events.setdefault((s.label, "end"), []).append(s.end)
    return {k: sorted(v) for k, v in events.items()}


def doc_pass(gold: Sequence[str], pred: Sequence[str], tolerance: int = 0) -> bool:
    """Whole-document boundary check.

    Strict (tolerance 0): the span lists are identical. Tolerant: per label,
    span starts and ends pair one-to-one with predictions within
    ``tolerance`` tokens.
    """
    _check(gold, pred)
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    g, p = extract_spans(gold), extract_spans(pred)
    if tolerance == 0:
        return g == p
    ge, pe = _boundary_events(g), _boundary_events(p)
    if ge.keys() != pe.keys():
        return False
    for key, gpos in ge.items():
        ppos = pe[key]
        # sorted-order pairing is an optimal matching for a 1-D distance threshold
        if len(gpos) != len(ppos) or any(abs(a - b) > tolerance for a, b in zip(gpos, ppos)):
            return False
    return True


def _prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def _b_tags(tags: Sequence[str]) -> list[tuple[int, str]]:
    return [(s.start, s.label) for s in extract_spans(tags)]


@dataclass
class SegCounts:
    """Additive per-document counts behind every metric."""

    docs: int = 0
    strict_pass: int = 0
    tol_pass: int = 0
    gold_b: Counter = field(default_factory=Counter)
    pred_b: Counter = field(default_factory=Counter)
    tp_b: Counter = field(default_factory=Counter)
    pos_only_tp: int = 0
    span_gold: int = 0
    span_pred: int = 0
    span_tp: int = 0
    col_gold: Counter = field(default_factory=Counter)
    col_pred: Counter = field(default_factory=Counter)
    col_tp: Counter = field(default_factory=Counter)
    repairs_gold: int = 0
    repairs_pred: int = 0

    def __add__(self, other: SegCounts) -> SegCounts:
        out = SegCounts()
        for name in self.__dataclass_fields__:
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out


def document_counts(gold: Sequence[str], pred: Sequence[str], tolerance: int = 5) -> SegCounts:
    _check(gold, pred)
    c = SegCounts(docs=1)
    c.strict_pass = int(doc_pass(gold, pred, 0))
    c.tol_pass = int(doc_pass(gold, pred, tolerance))
    gb, pb = _b_tags(gold), _b_tags(pred)
    c.gold_b.update(lbl for _, lbl in gb)
    c.pred_b.update(lbl for _, lbl in pb)
    c.tp_b.update(lbl for _, lbl in set(gb) & set(pb))
    c.pos_only_tp = len({i for i, _ in gb} & {i for i, _ in pb})
    gs, ps = set(extract_spans(gold)), set(extract_spans(pred))
    c.span_gold, c.span_pred, c.span_tp = len(gs), len(ps), len(gs & ps)
    for g, p in zip(gold, pred):
        gl, pl = parse_tag(g)[1], parse_tag(p)[1]
        if gl is not None:
            c.col_gold[gl] += 1
        if pl is not None:
            c.col_pred[pl] += 1
        if gl is not None and gl == pl:
            c.col_tp[gl] += 1
    c.repairs_gold = len(bio_violations(gold))
    c.repairs_pred = len(bio_violations(pred))
    return c


def boundary_metrics(gold: Sequence[str], pred: Sequence[str]) -> dict:
    return _boundary_from_counts(document_counts(gold, pred, 0))


def _boundary_from_counts(c: SegCounts) -> dict:
    labels = sorted(set(c.gold_b) | set(c.pred_b))
    per_label = {}
    for lbl in labels:
        p, r, f = _prf(c.tp_b[lbl], c.pred_b[lbl], c.gold_b[lbl])
        per_label[f"B-{lbl}"] = {"precision": p, "recall": r, "f1": f,
                                 "support": c.gold_b[lbl], "predicted": c.pred_b[lbl]}
    n_gold, n_pred, tp = sum(c.gold_b.values()), sum(c.pred_b.values()), sum(c.tp_b.values())
    mp, mr, mf = _prf(tp, n_pred, n_gold)
    bnd_acc = tp / n_gold if n_gold else (1.0 if n_pred == 0 else 0.0)
    pos_acc = c.pos_only_tp / n_gold if n_gold else (1.0 if n_pred == 0 else 0.0)
    return {"bnd_acc": bnd_acc, "bnd_acc_position_only": pos_acc,
            "bnd_precision": mp, "bnd_recall": mr, "bnd_f1": mf, "per_label": per_label}


def span_exact_f1(gold: Sequence[str], pred: Sequence[str]) -> float:
    c = document_counts(gold, pred, 0)
    if not (c.span_gold or c.span_pred):
        return 1.0
    return _prf(c.span_tp, c.span_pred, c.span_gold)[2]


def _collapsed_from_counts(c: SegCounts) -> dict:
    classes = sorted(set(c.col_gold) | set(c.col_pred))
    per = {}
    for x in classes:
        p, r, f = _prf(c.col_tp[x], c.col_pred[x], c.col_gold[x])
        per[x] = {"precision": p, "recall": r, "f1": f, "support": c.col_gold[x]}
    if not classes:
        return {"macro_f1": 1.0, "weighted_f1": 1.0, "per_segment": {}}
    macro = sum(v["f1"] for v in per.values()) / len(per)
    support = sum(c.col_gold.values())
    weighted = (sum(v["f1"] * v["support"] for v in per.values()) / support) if support else 0.0
    return {"macro_f1": macro, "weighted_f1": weighted, "per_segment": per}


def collapsed_f1(gold: Sequence[str], pred: Sequence[str], averaging: str = "macro") -> tuple[float, dict]:
    """Token-level F1 after mapping B-x and I-x to x; O is not a class.

    Classes are those present in gold or prediction.
    """
    if averaging not in ("macro", "weighted"):
        raise ValueError("averaging must be 'macro' or 'weighted'")
    res = _collapsed_from_counts(document_counts(gold, pred, 0))
    per = {k: v["f1"] for k, v in res["per_segment"].items()}
    return res[f"{averaging}_f1"], per


@dataclass
class SegReport:
    doc_pass: float
    tol_pass: float
    bnd_acc: float
    bnd_f1: float
    span_exact_f1: float
    collapsed_macro_f1: float
    collapsed_weighted_f1: float
    boundary: dict
    collapsed: dict
    counts: SegCounts
    tolerance: int

    def to_json(self) -> dict:
        c = self.counts
        return {
            "schema_version": SCHEMA_VERSION,
            "docs": c.docs,
            "doc_pass": self.doc_pass,
            "tol_pass": self.tol_pass,
            "bnd_acc": self.bnd_acc,
            "bnd_f1": self.bnd_f1,
            "span_exact_f1": self.span_exact_f1,
            "collapsed_macro_f1": self.collapsed_macro_f1,
            "collapsed_weighted_f1": self.collapsed_weighted_f1,
            "boundary": self.boundary,
            "collapsed_per_segment": self.collapsed["per_segment"],
            "doc_pass_count": c.strict_pass,
            "tol_pass_count": c.tol_pass,
            "repairs": {"gold": c.repairs_gold, "pred": c.repairs_pred},
            "tolerance": self.tolerance,
            "meta": {
                "granularity": "word",
                "bnd_acc": "exact-position, same-label recall of gold B tags",
                "tol_pass": "per-label span starts/ends within +/-tolerance, one-to-one",
                "strict_doc_pass": "identical span lists (label, start, end)",
                "orphan_i_repair": "I-x without preceding x becomes B-x",
            },
        }


def report_from_counts(c: SegCounts, tolerance: int) -> SegReport:
    bnd = _boundary_from_counts(c)
    col = _collapsed_from_counts(c)
    n = c.docs
    return SegReport(
        doc_pass=c.strict_pass / n if n else 0.0,
        tol_pass=c.tol_pass / n if n else 0.0,
        bnd_acc=bnd["bnd_acc"],
        bnd_f1=bnd["bnd_f1"],
        span_exact_f1=_prf(c.span_tp, c.span_pred, c.span_gold)[2]
        if (c.span_gold or c.span_pred) else 1.0,
        collapsed_macro_f1=col["macro_f1"],
        collapsed_weighted_f1=col["weighted_f1"],
        boundary=bnd,
        collapsed=col,
        counts=c,
        tolerance=tolerance,
    )


def evaluate_segmentation(gold: Iterable[TagSequence], pred: Iterable[TagSequence],
                          tolerance: int = 5) -> SegReport:
    g = {}
    for s in gold:
        if s.doc_id in g:
            raise SegmentationError(f"duplicate gold doc_id {s.doc_id!r}")
        g[s.doc_id] = s
    p = {}
    for s in pred:
        if s.doc_id in p:
            raise SegmentationError(f"duplicate pred doc_id {s.doc_id!r}")
        p[s.doc_id] = s
    if g.keys() != p.keys():
        missing = sorted(g.keys() - p.keys())
        extra = sorted(p.keys() - g.keys())
        raise SegmentationError(f"doc_id mismatch: missing {missing[:3]}, extra {extra[:3]}")
    total = SegCounts()
    for doc_id in sorted(g):
        total = total + document_counts(g[doc_id].tags, p[doc_id].tags, tolerance)
    return report_from_counts(total, tolerance)


def load_tag_sequences(path: str | os.PathLike) -> list[TagSequence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            o = json.loads(line)
            try:
                out.append(TagSequence(str(o["doc_id"]), tuple(o["tokens"]), tuple(o["tags"])))
            except KeyError as exc:
                raise SegmentationError(f"{path}:{lineno}: missing key {exc}") from exc
    return out
