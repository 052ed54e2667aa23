"""Near-duplicate removal with MinHash signatures and LSH banding.

Documents are shingled into character n-grams of normalized text, each
shingle is hashed to 64 bits, and ``num_perm`` universal hash functions
``(a*x + b) mod p`` with ``p = 2**61 - 1`` simulate random permutations.
Candidate pairs come from LSH band collisions and are accepted when the
signature-estimated Jaccard similarity reaches the threshold.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from . import SCHEMA_VERSION
from ._hashing import U64_MAX
from ._kernels import gram_hashes, minhash_minima
from ._parallel import ordered_map
from .corpus import Document

logger = logging.getLogger(__name__)

MERSENNE_61 = (1 << 61) - 1
_P = np.uint64(MERSENNE_61)
_LO31 = np.uint64((1 << 31) - 1)
_LO30 = np.uint64((1 << 30) - 1)

_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class DedupConfig:
    num_perm: int = 256
    threshold: float = 0.90
    shingle_n: int = 5
    seed: int = 42
    exact_verify: bool = False

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.num_perm < 16:
            raise ValueError(f"num_perm must be >= 16, got {self.num_perm}")
        if self.shingle_n < 1:
            raise ValueError(f"shingle_n must be >= 1, got {self.shingle_n}")


@dataclass(frozen=True)
class ShingleSet:
    shingles: frozenset[int]
    n: int

    def __len__(self):
        return len(self.shingles)


@dataclass(frozen=True, eq=False)
class MinHashSignature:
    minima: np.ndarray
    num_perm: int
    seed: int

    def __eq__(self, other):
        if not isinstance(other, MinHashSignature):
            return NotImplemented
        return (self.num_perm == other.num_perm and self.seed == other.seed
                and np.array_equal(self.minima, other.minima))

    def __hash__(self):
        return hash((self.num_perm, self.seed, self.minima.tobytes()))


def normalize_text(text: str) -> str:
    return _WS.sub(" ", text.lower()).strip()


_U64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return x ^ (x >> 31)


def gram_hash(gram: str) -> int:
    """64-bit hash of one n-gram (FNV-style fold over code points, splitmix finish)."""
    h = len(gram)
    for ch in gram:
        h = ((h ^ ord(ch)) * 0x100000001B3) & _U64
    return _splitmix64(h)


def shingle_array(text: str, n: int) -> np.ndarray:
    """Sorted distinct n-gram hashes of the normalized text."""
    if n < 1:
        raise ValueError("shingle width must be >= 1")
    cps = np.frombuffer(normalize_text(text).encode("utf-32-le"), dtype=np.uint32)
    return np.unique(gram_hashes(cps, n))


def shingle(text: str, n: int) -> ShingleSet:
    """Hash every distinct character n-gram of the normalized text."""
    return ShingleSet(frozenset(int(h) for h in shingle_array(text, n)), n)


@lru_cache(maxsize=32)
def permutation_params(num_perm: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    a = rng.integers(1, MERSENNE_61, size=num_perm, dtype=np.uint64)
    b = rng.integers(0, MERSENNE_61, size=num_perm, dtype=np.uint64)
    a.flags.writeable = False
    b.flags.writeable = False
    return a, b


def _reduce61(x: np.ndarray) -> np.ndarray:
    x = (x & _P) + (x >> np.uint64(61))
    x = (x & _P) + (x >> np.uint64(61))
    return np.where(x >= _P, x - _P, x)


def _mulmod61(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact ``a * x mod (2**61 - 1)`` for a, x < 2**61 without overflow."""
    a1, a0 = a >> np.uint64(31), a & _LO31
    x1, x0 = x >> np.uint64(31), x & _LO31
    hi = (a1 * x1) << np.uint64(1)            # 2**62 == 2 (mod p)
    mid = a1 * x0 + a0 * x1
    mid = (mid >> np.uint64(30)) + ((mid & _LO30) << np.uint64(31))
    return _reduce61(hi + mid + a0 * x0)


def apply_permutations(hashes: np.ndarray, num_perm: int, seed: int) -> np.ndarray:
    """Permuted values, shape (len(hashes), num_perm); vectorized reference for the kernel."""
    a, b = permutation_params(num_perm, seed)
    x = _reduce61(hashes.astype(np.uint64))[:, None]
    return _reduce61(_mulmod61(a[None, :], x) + b[None, :])


def _minima(hashes: np.ndarray, num_perm: int, seed: int) -> np.ndarray:
    if hashes.size == 0:
        return np.full(num_perm, U64_MAX, dtype=np.uint64)
    a, b = permutation_params(num_perm, seed)
    return minhash_minima(hashes, a, b)


def minhash_signature(s: ShingleSet | np.ndarray, cfg: DedupConfig) -> MinHashSignature:
    """Permutation minima; an empty set maps to the all-max signature."""
    if isinstance(s, ShingleSet):
        hashes = np.fromiter(sorted(s.shingles), dtype=np.uint64, count=len(s.shingles))
    else:
        hashes = np.asarray(s, dtype=np.uint64)
    return MinHashSignature(_minima(hashes, cfg.num_perm, cfg.seed), cfg.num_perm, cfg.seed)


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    if a.num_perm != b.num_perm or a.seed != b.seed:
        raise ValueError("signatures are not comparable (num_perm/seed differ)")
    return float(np.count_nonzero(a.minima == b.minima)) / a.num_perm


def exact_jaccard(a: ShingleSet, b: ShingleSet) -> float:
    if not a.shingles and not b.shingles:
        return 1.0
    return len(a.shingles & b.shingles) / len(a.shingles | b.shingles)


def _array_jaccard(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0 and b.size == 0:
        return 1.0
    inter = np.intersect1d(a, b, assume_unique=True).size
    return inter / (a.size + b.size - inter)


def _collision_prob(s: np.ndarray, bands: int, rows: int) -> np.ndarray:
    return 1.0 - (1.0 - s ** rows) ** bands


def choose_bands(num_perm: int, threshold: float,
                 fp_weight: float = 0.5, fn_weight: float = 0.5) -> tuple[int, int]:
    """Pick (bands, rows) with bands*rows == num_perm minimizing weighted FP+FN area."""
    best = None
    for rows in range(1, num_perm + 1):
        if num_perm % rows:
            continue
        bands = num_perm // rows
        lo = np.linspace(0.0, threshold, 1001)
        hi = np.linspace(threshold, 1.0, 1001)
        fp = np.trapezoid(_collision_prob(lo, bands, rows), lo)
        fn = np.trapezoid(1.0 - _collision_prob(hi, bands, rows), hi)
        err = fp_weight * fp + fn_weight * fn
        if best is None or err < best[0]:
            best = (err, bands, rows)
    return best[1], best[2]


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if rj < ri:
            ri, rj = rj, ri
        self.parent[rj] = ri
        return True


@dataclass
class Cluster:
    retained: str
    removed: list[str]


@dataclass
class DedupReport:
    clusters: list[Cluster]
    docs_in: int
    docs_kept: int
    docs_removed: int
    config: DedupConfig
    bands: int
    rows: int
    candidate_pairs: int = 0
    verified_pairs: int = 0
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "docs_in": self.docs_in,
            "docs_kept": self.docs_kept,
            "docs_removed": self.docs_removed,
            "num_clusters": len(self.clusters),
            "clusters": [{"retained": c.retained, "removed": c.removed} for c in self.clusters],
            "config": {
                "num_perm": self.config.num_perm,
                "threshold": self.config.threshold,
                "shingle_n": self.config.shingle_n,
                "exact_verify": self.config.exact_verify,
            },
            "seed": self.config.seed,
            "lsh": {"bands": self.bands, "rows": self.rows},
            "candidate_pairs": self.candidate_pairs,
            "verified_pairs": self.verified_pairs,
        }


def _doc_features(args):
    text, cfg = args
    s = shingle_array(text, cfg.shingle_n)
    return s, _minima(s, cfg.num_perm, cfg.seed)


def dedup_corpus(corpus: Iterable[Document], cfg: DedupConfig,
                 threads: int = 1) -> tuple[list[Document], DedupReport]:
    """Remove near duplicates, keeping the lexicographically smallest id per cluster.

    Kept documents are returned in input order. The report does not depend on
    input order or ``threads``.
    """
    docs = list(corpus)
    # canonical order makes union-find and candidate counting order-independent
    order = sorted(range(len(docs)), key=lambda i: docs[i].id)
    docs_sorted = [docs[i] for i in order]
    feats = ordered_map(_doc_features, [(d.text, cfg) for d in docs_sorted], threads=threads)
    shingles = [f[0] for f in feats]
    sigs = np.stack([f[1] for f in feats]) if feats else np.zeros((0, cfg.num_perm), np.uint64)

    bands, rows = choose_bands(cfg.num_perm, cfg.threshold)
    uf = UnionFind(len(docs_sorted))
    candidates = verified = 0
    for band in range(bands):
        buckets: dict[bytes, list[int]] = {}
        block = np.ascontiguousarray(sigs[:, band * rows:(band + 1) * rows])
        for i in range(len(docs_sorted)):
            if shingles[i].size == 0:
                continue
            buckets.setdefault(block[i].tobytes(), []).append(i)
        for members in buckets.values():
            for x in range(len(members)):
                for y in range(x + 1, len(members)):
                    i, j = members[x], members[y]
                    if uf.find(i) == uf.find(j):
                        continue
                    candidates += 1
                    if cfg.exact_verify:
                        sim = _array_jaccard(shingles[i], shingles[j])
                    else:
                        sim = float(np.count_nonzero(sigs[i] == sigs[j])) / cfg.num_perm
                    if sim >= cfg.threshold:
                        verified += 1
                        uf.union(i, j)

    members_of: dict[int, list[int]] = {}
    for i in range(len(docs_sorted)):
        members_of.setdefault(uf.find(i), []).append(i)
    clusters = []
    removed_ids: set[str] = set()
    for root in sorted(members_of):
        idx = members_of[root]
        if len(idx) < 2:
            continue
        ids = sorted(docs_sorted[i].id for i in idx)
        clusters.append(Cluster(ids[0], ids[1:]))
        removed_ids.update(ids[1:])
    clusters.sort(key=lambda c: c.retained)

    kept = [d for d in docs if d.id not in removed_ids]
    report = DedupReport(clusters, len(docs), len(kept), len(removed_ids), cfg, bands, rows,
                         candidates, verified)
    logger.info("dedup: %d in, %d kept, %d removed in %d clusters (b=%d, r=%d)",
                report.docs_in, report.docs_kept, report.docs_removed, len(clusters), bands, rows)
    return kept, report
