import json
import random
import sys

import pytest

from lexforge.corpus import Document, write_corpus


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(name, records):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write((r if isinstance(r, str) else json.dumps(r, ensure_ascii=False)) + "\n")
        return path
    return _write


@pytest.fixture
def group_docs():
    """Ten documents spread over several field/content groups."""
    rows = [
        ("MEVZUAT", "Mevzuat", "KANUN", "Madde 1 bu kanun"),
        ("İÇTİHAT", "Yargıtay", "KARAR", "davanın reddine karar verildi"),
        ("İÇTİHAT", "Yargıtay", "KARAR", "temyiz itirazlarının reddi"),
        ("İÇTİHAT", "Yargıtay", "KARAR", "hükmün bozulmasına"),
        ("İÇTİHAT", "Danıştay", "KARAR", "iptal davası"),
        ("İÇTİHAT", "Danıştay", "KARAR", "yürütmenin durdurulması"),
        ("HUKUK", "Sözlük", None, "tereke: mirasın bütünü"),
        ("HUKUK DIŞI", "Vikipedi", None, "İstanbul bir şehirdir"),
        ("HUKUK DIŞI", "Vikipedi", None, "Ankara başkenttir"),
        ("İÇTİHAT", "AYM", "BİREYSEL", "hak ihlali"),
    ]
    return [Document(f"t{i}", f, c, t, x) for i, (f, c, t, x) in enumerate(rows)]


@pytest.fixture
def corpus_file(tmp_path, group_docs):
    path = tmp_path / "corpus.jsonl"
    write_corpus(group_docs, path)
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
