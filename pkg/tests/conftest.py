import json
from importlib import resources

import numpy as np
import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from seq2vec import _backend
from seq2vec.corpus import build_vocabulary, split_nep

# criterion number -> [title, [(outcome, detail), ...]]
_ACCEPTANCE: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion implemented by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            _ACCEPTANCE.setdefault(n, [title, []])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        detail = dict(item.user_properties).get("measured", "")
        _ACCEPTANCE[mark.args[0]][1].append((status, detail))


def _combine(runs):
    statuses = {s for s, _ in runs}
    if not runs:
        return "NOT RUN"
    if "FAIL" in statuses:
        return "FAIL"
    return "SKIP" if statuses == {"SKIP"} else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, runs = _ACCEPTANCE[n]
        line = f"criterion {n}: {_combine(runs):7s} {title}"
        details = "; ".join(d for _, d in runs if d)
        if details:
            line += f"  [{details}]"
        terminalreporter.write_line(line)


@pytest.fixture
def measured(record_property):
    """Attach the measured value to the acceptance summary line."""

    def _record(text: str) -> None:
        record_property("measured", text)
        print(text)

    return _record


@pytest.fixture(params=_backend.available())
def kernels(request):
    return _backend.get_kernels(request.param)


@pytest.fixture
def tiny_corpus():
    seqs = [["a", "b", "c", "a", "b"], ["b", "c", "d"], ["a", "b"], ["c", "d", "a", "b", "c"], ["d", "a"]] * 20
    vocab = build_vocabulary(seqs)
    return vocab, split_nep(seqs, vocab)


def _load_schemas():
    root = resources.files("seq2vec") / "schemas"
    return {f.name: json.loads(f.read_text()) for f in root.iterdir() if f.name.endswith(".schema.json")}


@pytest.fixture(scope="session")
def validate():
    """Return validate(name, instance), raising on schema violations."""
    schemas = _load_schemas()
    registry = Registry().with_resources((n, Resource.from_contents(s)) for n, s in schemas.items())

    def check(name, instance):
        Draft202012Validator(schemas[name], registry=registry).validate(instance)

    return check
