"""Vocabulary overlap analysis and embedding-matrix transfer.

Shared tokens (exact string match) copy their old embedding row; tokens new
to the vocabulary get the column-wise mean of the old matrix.

EMB1 file layout: ``b"EMB1"``, rows (u32 LE), dims (u32 LE), then
rows*dims float32 LE values in row-major order.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from . import SCHEMA_VERSION
from .tokenizer import SPECIALS, Vocabulary

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class OverlapReport:
    old_size: int
    new_size: int
    shared: tuple[tuple[int, int], ...]  # (new_id, old_id), sorted by new_id
    new_only: tuple[int, ...]

    @property
    def shared_count(self) -> int:
        return len(self.shared)

    @property
    def overlap_percent(self) -> float:
        return 100.0 * self.shared_count / self.new_size if self.new_size else 0.0

    def to_json(self, include_pairs: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "old_size": self.old_size,
            "new_size": self.new_size,
            "shared_count": self.shared_count,
            "new_only_count": len(self.new_only),
            "overlap_percent": round(self.overlap_percent, 4),
            "overlap_percent_display": f"{self.overlap_percent:.1f}%",
        }
        if include_pairs:
            out["shared"] = [list(p) for p in self.shared]
            out["new_only"] = list(self.new_only)
        return out


def overlap_analysis(old_vocab: Vocabulary, new_vocab: Vocabulary) -> OverlapReport:
    shared, new_only = [], []
    for new_id, tok in enumerate(new_vocab.tokens):
        old_id = old_vocab.index.get(tok)
        if old_id is None:
            new_only.append(new_id)
        else:
            shared.append((new_id, old_id))
    return OverlapReport(len(old_vocab), len(new_vocab), tuple(shared), tuple(new_only))


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    values: np.ndarray  # float32, shape (rows, dims)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        return isinstance(other, EmbeddingMatrix) and np.array_equal(self.values, other.values)


def read_emb1(path: str | os.PathLike) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated EMB1 header")
        magic, rows, dims = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != rows * dims:
        raise ValueError(f"{path}: expected {rows * dims} values, found {data.size}")
    return EmbeddingMatrix(data.reshape(rows, dims).astype(np.float32))


def write_emb1(m: EmbeddingMatrix, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, m.rows, m.dims))
        fh.write(np.ascontiguousarray(m.values, dtype="<f4").tobytes())


def read_tsv(path: str | os.PathLike) -> EmbeddingMatrix:
    return EmbeddingMatrix(np.loadtxt(path, delimiter="\t", dtype=np.float32, ndmin=2))


def write_tsv(m: EmbeddingMatrix, path: str | os.PathLike) -> None:
    # repr-exact float32 text so TSV -> EMB1 round-trips bit-for-bit
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in m.values:
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")


def apply_transfer(report: OverlapReport, old_matrix: EmbeddingMatrix,
                   exclude_special_rows: bool = False,
                   old_vocab: Vocabulary | None = None) -> EmbeddingMatrix:
    """Copy shared rows; fill new-only rows with the old matrix's column mean.

    With ``exclude_special_rows`` the mean skips rows of the old vocabulary's
    special tokens (``old_vocab`` is then required).
    """
    if old_matrix.rows != report.old_size:
        raise ValueError(f"old matrix has {old_matrix.rows} rows, vocabulary has {report.old_size}")
    old = old_matrix.values
    if not np.all(np.isfinite(old)):
        raise ValueError("old embedding matrix contains non-finite values")
    source = old
    if exclude_special_rows:
        if old_vocab is None:
            raise ValueError("exclude_special_rows needs the old vocabulary")
        special = [old_vocab.index[s] for s in SPECIALS if s in old_vocab.index]
        source = np.delete(old, special, axis=0)
    mean = source.astype(np.float64).mean(axis=0).astype(np.float32)

    out = np.empty((report.new_size, old_matrix.dims), dtype=np.float32)
    if report.shared:
        new_ids, old_ids = map(list, zip(*report.shared))
        out[new_ids] = old[old_ids]
    if report.new_only:
        out[list(report.new_only)] = mean
    return EmbeddingMatrix(out)
