"""Deterministic synthetic legal-domain fixtures for tests and demos.

Nothing here is real legal text; words are drawn from a small Turkish
legal lexicon with agglutinative suffixes so tokenizer and masking stages
see realistic word shapes.
"""

from __future__ import annotations

import random

from .corpus import Document
from .segmentation import SEGMENTS

ROOTS = [
    "karar", "dava", "mahkeme", "tereke", "miras", "borç", "alacak", "sözleşme", "tazminat",
    "hüküm", "temyiz", "istinaf", "davacı", "davalı", "vekil", "tanık", "bilirkişi", "icra",
    "iflas", "ceza", "suç", "sanık", "müdafi", "savcı", "kanun", "madde", "fıkra", "yönetmelik",
    "ihtiyati", "tedbir", "haciz", "rehin", "ipotek", "kira", "tahliye", "velayet", "nafaka",
    "boşanma", "tapu", "kadastro", "zilyetlik", "mülkiyet", "irtifak", "şufa", "vasiyet",
    "muris", "mirasçı", "tenkis", "müteselsil", "borçluluk", "kefalet", "temerrüt", "faiz",
    "içtihat", "birleştirme", "Yargıtay", "Danıştay", "Anayasa", "gerekçe", "usul", "esas",
]
SUFFIXES = ["", "", "", "ın", "in", "un", "ün", "a", "e", "ı", "i", "da", "de", "dan", "den",
            "lar", "ler", "ları", "leri", "ların", "lerin", "ına", "ine", "sı", "si", "dır", "dir"]
FUNCTION = ["ve", "ile", "bu", "olarak", "göre", "ancak", "için", "de", "ki", "olan", "gibi"]
GROUPS = [
    ("İÇTİHAT", "Yargıtay", "KARAR"),
    ("İÇTİHAT", "Danıştay", "KARAR"),
    ("İÇTİHAT", "İstinaf", "KARAR"),
    ("MEVZUAT", "Mevzuat", "KANUN"),
    ("HUKUK", "TBB", "MAKALE"),
    ("HUKUK DIŞI", "Vikipedi", None),
]


def word(rng: random.Random) -> str:
    if rng.random() < 0.25:
        return rng.choice(FUNCTION)
    return rng.choice(ROOTS) + rng.choice(SUFFIXES)


def sentence(rng: random.Random, lo: int = 6, hi: int = 14) -> str:
    return " ".join(word(rng) for _ in range(rng.randint(lo, hi)))


def paragraph(rng: random.Random, lines: int) -> str:
    return "\n".join(sentence(rng) for _ in range(lines))


def random_text(rng: random.Random, n_chars: int) -> str:
    """Random-word text of at least n_chars characters."""
    parts: list[str] = []
    size = 0
    while size < n_chars:
        w = word(rng) + str(rng.randrange(10_000))
        parts.append(w)
        size += len(w) + 1
    return " ".join(parts)


def perturb(rng: random.Random, text: str, edits: int) -> str:
    chars = list(text)
    for _ in range(edits):
        i = rng.randrange(len(chars))
        chars[i] = rng.choice("abcçdefgğhıijklmnoöprsştuüvyz")
    return "".join(chars)


def make_corpus(n_docs: int, seed: int = 0, lines: tuple[int, int] = (3, 8)) -> list[Document]:
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        fld, content, topic = GROUPS[i % len(GROUPS)]
        docs.append(Document(f"doc{i:06d}", fld, content, topic,
                             paragraph(rng, rng.randint(*lines))))
    return docs


def make_dedup_fixture(n_docs: int = 1000, n_clusters: int = 50, cluster_size: int = 4,
                       doc_chars: int = 1500, edits: int = 2, seed: int = 0):
    """Corpus with planted near-duplicate clusters.

    Returns ``(docs, clusters)`` where clusters is a list of id lists.
    Cluster members are 1-character-edit variants of one template; all
    other documents are independent random texts.
    """
    rng = random.Random(seed)
    docs: list[Document] = []
    clusters: list[list[str]] = []
    k = 0
    for c in range(n_clusters):
        template = random_text(rng, doc_chars)
        ids = []
        for _ in range(cluster_size):
            doc_id = f"d{k:05d}"
            k += 1
            docs.append(Document(doc_id, "İÇTİHAT", "Yargıtay", "KARAR",
                                 perturb(rng, template, edits)))
            ids.append(doc_id)
        clusters.append(ids)
    while len(docs) < n_docs:
        docs.append(Document(f"d{k:05d}", "İÇTİHAT", "Yargıtay", "KARAR", random_text(rng, doc_chars)))
        k += 1
    rng.shuffle(docs)
    return docs, clusters


def random_bio(rng: random.Random, n: int, labels=SEGMENTS, p_outside: float = 0.1,
               mean_len: int = 6) -> list[str]:
    """Valid BIO sequence of length n made of random segments and O runs."""
    tags: list[str] = []
    while len(tags) < n:
        run = max(1, int(rng.expovariate(1 / mean_len)))
        if rng.random() < p_outside:
            tags += ["O"] * run
        else:
            lbl = rng.choice(labels)
            tags += ["B-" + lbl] + ["I-" + lbl] * (run - 1)
    return tags[:n]


def corrupt_bio(rng: random.Random, tags: list[str], rate: float = 0.05,
                labels=SEGMENTS) -> list[str]:
    """Randomly flip tags, possibly producing invalid BIO."""
    out = list(tags)
    for i in range(len(out)):
        if rng.random() < rate:
            r = rng.random()
            if r < 0.4:
                out[i] = "B-" + rng.choice(labels)
            elif r < 0.8:
                out[i] = "I-" + rng.choice(labels)
            else:
                out[i] = "O"
    return out


def shift_boundary(tags: list[str], which: int, delta: int) -> list[str]:
    """Move the start of the ``which``-th span (not the first) by delta tokens."""
    from .segmentation import extract_spans

    spans = extract_spans(tags)
    s = spans[which]
    prev = spans[which - 1]
    if prev.end != s.start:
        raise ValueError("spans must be adjacent")
    new_start = s.start + delta
    if not prev.start < new_start < s.end:
        raise ValueError("shift leaves a span empty")
    out = list(tags)
    for i in range(prev.start, s.end):
        if i < new_start:
            out[i] = ("B-" if i == prev.start else "I-") + prev.label
        else:
            out[i] = ("B-" if i == new_start else "I-") + s.label
    return out
