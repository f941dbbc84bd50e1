import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from rege_bench.lexicon import default_au_aliases, default_lexicon  # noqa: E402
from rege_bench.records import SampleRecord, write_records  # noqa: E402

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        prev = _criteria.get(n)
        if prev is None or prev[0] == "PASS":
            _criteria[n] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, title = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}")


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def aliases():
    return default_au_aliases()


@pytest.fixture(scope="session")
def synonyms(lexicon):
    return {k: list(v) for k, v in lexicon.synonyms.items()}


def make_records(task, n, seed, lexicon, aliases):
    rng = random.Random(seed)
    syn = {k: list(v) for k, v in lexicon.synonyms.items()}
    out = []
    while len(out) < n:
        if task == "emotion":
            text = oracles.random_emotion_text(rng, syn)
        else:
            text = oracles.random_au_text(rng, dict(aliases.entries), dict(aliases.unevaluated))
        if not text:
            continue
        out.append(SampleRecord(f"{task}-{len(out):04d}", task, "Describe the face.", text))
    return out


@pytest.fixture(scope="session")
def record_files(tmp_path_factory, lexicon, aliases):
    """403-record reference files for both tasks, keyed by task."""
    root = tmp_path_factory.mktemp("records")
    paths = {}
    for i, task in enumerate(("emotion", "au")):
        p = root / f"{task}.jsonl"
        write_records(make_records(task, 403, 100 + i, lexicon, aliases), p)
        paths[task] = p
    return paths
