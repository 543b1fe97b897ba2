import pytest

from multifacet.synthetic import topic_corpus, topic_embeddings

from _support import write_corpus, write_embeddings

TRAIN_FLAGS = ["--k", "2", "--enc-layers", "1", "--dec-layers", "1", "--heads", "2",
               "--ff-dim", "16", "--min-count", "0", "--max-len", "12", "--seed", "4"]


@pytest.fixture(scope="session")
def toy_files(tmp_path_factory):
    """Embeddings and a two-topic corpus on disk, plus the topic word lists."""
    root = tmp_path_factory.mktemp("toy")
    table, topics = topic_embeddings(words_per_topic=6, dim=8, seed=0)
    corpus = topic_corpus(topics, sentences_per_topic=20, doc_len=5, max_words=5, seed=0)
    emb, cor = root / "emb.txt", root / "corpus.txt"
    write_embeddings(table, emb)
    write_corpus(corpus, cor)
    return {"root": root, "embeddings": str(emb), "corpus": str(cor), "topics": topics,
            "table": table}


@pytest.fixture(scope="session")
def trained(toy_files):
    """Output directory of one small ``train`` run."""
    from multifacet.cli import main
    out = toy_files["root"] / "run"
    argv = ["train", "--corpus", toy_files["corpus"], "--embeddings", toy_files["embeddings"],
            "--out", str(out)] + TRAIN_FLAGS
    assert main(argv) == 0
    return out


_VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
