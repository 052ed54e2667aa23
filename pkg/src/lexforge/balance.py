"""Sub-domain rebalancing to per-group byte targets.

Down-sampling keeps a document iff a seeded hash of its id falls below the
keep ratio, so decisions are streaming and order independent. Over-sampling
duplicates documents verbatim, suffixing ``#k`` to each copy's id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from ._hashing import unit_hash
from .corpus import CorpusStats, Document, group_key

KEEP = "keep"
DOWNSAMPLE = "downsample"
OVERSAMPLE = "oversample"


class BalanceError(ValueError):
    pass


@dataclass(frozen=True)
class GroupAction:
    kind: str
    ratio: float = 1.0  # keep_ratio for downsample, multiplier for oversample

    def __post_init__(self):
        if self.kind == DOWNSAMPLE and not 0 < self.ratio <= 1:
            raise ValueError(f"keep_ratio must be in (0, 1], got {self.ratio}")
        if self.kind == OVERSAMPLE and self.ratio < 1:
            raise ValueError(f"multiplier must be >= 1, got {self.ratio}")
        if self.kind not in (KEEP, DOWNSAMPLE, OVERSAMPLE):
            raise ValueError(f"unknown action {self.kind!r}")

    def to_json(self) -> dict:
        if self.kind == DOWNSAMPLE:
            return {"action": self.kind, "keep_ratio": self.ratio}
        if self.kind == OVERSAMPLE:
            return {"action": self.kind, "multiplier": self.ratio}
        return {"action": self.kind}


@dataclass(frozen=True)
class BalancePlan:
    actions: Mapping[str, GroupAction]
    seed: int = 42

    def action_for(self, key: str) -> GroupAction:
        return self.actions.get(key, GroupAction(KEEP))

    def to_json(self) -> dict:
        return {"seed": self.seed,
                "groups": {k: a.to_json() for k, a in sorted(self.actions.items())}}


def plan_balance(stats: CorpusStats, targets: Mapping[str, float], seed: int = 42) -> BalancePlan:
    """Ratio of target to current bytes per group; untargeted groups are kept."""
    current = {k: s.byte_size for k, s in stats.by_key().items()}
    actions: dict[str, GroupAction] = {}
    for key in current:
        actions[key] = GroupAction(KEEP)
    for key, target in targets.items():
        if key not in current:
            raise BalanceError(f"target for unknown group {key!r}")
        if target < 0:
            raise BalanceError(f"negative target for {key!r}")
        cur = current[key]
        if cur == 0:
            if target:
                raise BalanceError(f"group {key!r} has zero bytes but target {target}")
            continue
        ratio = target / cur
        if ratio < 1:
            if ratio == 0:
                raise BalanceError(f"zero target for non-empty group {key!r}; drop it upstream")
            actions[key] = GroupAction(DOWNSAMPLE, ratio)
        elif ratio > 1:
            actions[key] = GroupAction(OVERSAMPLE, ratio)
    return BalancePlan(actions, seed)


def _selected(doc_id: str, seed: int, ratio: float, salt: str = "keep") -> bool:
    return unit_hash(f"{salt}\x00{doc_id}", seed) < ratio


def apply_balance(corpus: Iterable[Document], plan: BalancePlan) -> Iterator[Document]:
    for doc in corpus:
        action = plan.action_for(group_key(doc.group))
        if action.kind == KEEP:
            yield doc
        elif action.kind == DOWNSAMPLE:
            if _selected(doc.id, plan.seed, action.ratio):
                yield doc
        else:
            whole = math.floor(action.ratio)
            frac = action.ratio - whole
            copies = whole + (1 if frac > 0 and _selected(doc.id, plan.seed, frac, "extra") else 0)
            for k in range(copies):
                yield Document(f"{doc.id}#{k}", doc.field, doc.content, doc.topic, doc.text)
