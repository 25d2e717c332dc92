#!/usr/bin/env python3
"""Writes the task bundles under tests/fixtures/tasks and tests/fixtures/corpus.

Highlight spans and cursors are given as marker substrings and converted to
byte offsets here, so editing a fixture never means recounting by hand.
"""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
PYTEST = ["python3", "-m", "pytest", "-q", "-rA", "-p", "no:cacheprovider", "{test_file}"]

CONNECT_CODE = '''"""Connection helpers."""

import socket


def connect(host, port):
    sock = socket.create_connection((host, port))
    return sock


def close(sock):
    sock.close()
'''

CONNECT_TESTS = '''import socket

import solution


class FakeSocket:
    def close(self):
        pass


def record_calls(monkeypatch):
    calls = []

    def fake(address, timeout=None):
        calls.append((address, timeout))
        return FakeSocket()

    monkeypatch.setattr(socket, "create_connection", fake)
    return calls


def test_connect_default_timeout(monkeypatch):
    calls = record_calls(monkeypatch)
    solution.connect("example.org", 80)
    assert calls == [(("example.org", 80), 10)]


def test_connect_explicit_timeout(monkeypatch):
    calls = record_calls(monkeypatch)
    solution.connect("example.org", 80, timeout=2.5)
    assert calls == [(("example.org", 80), 2.5)]
'''

CALC_CODE = '''"""Tiny calculator."""


class Calculator:
    def add(self, a, b):
        return sum((a, b))

    def subtract(self, a, b):
        return a + b

    def multiply(self, a, b):
        return a * b
'''

CALC_TESTS = '''from solution import Calculator


def test_calculator_add():
    assert Calculator().add(2, 3) == 5


def test_calculator_subtract():
    calc = Calculator()
    assert calc.subtract(5, 3) == 2


def test_calculator_multiply():
    assert Calculator().multiply(4, 3) == 12
'''

RENAME_CODE = '''def avg(values):
    return sum(values) / len(values)


def summarize(values):
    return {"mean": avg(values), "count": len(values)}
'''

RENAME_TESTS = '''import solution


def test_mean():
    assert solution.mean([1, 2, 3]) == 2


def test_summarize():
    assert solution.summarize([2, 4]) == {"mean": 3, "count": 2}


def test_old_name_removed():
    assert not hasattr(solution, "avg")
'''

LOGGING_CODE = '''import logging

logger = logging.getLogger(__name__)


def process(items):
    total = 0
    for item in items:
        total += item
    return total
'''

LOGGING_TESTS = '''import logging

from solution import process


def test_process_sums():
    assert process([1, 2, 3]) == 6


def test_process_logs_count(caplog):
    caplog.set_level(logging.INFO)
    process([1, 2, 3])
    assert "processing 3 items" in caplog.text
'''

CLAMP_CODE = '''def clamp(value, low, high):
    return max(low, min(value, high))
'''

CLAMP_TESTS = '''import pytest

from solution import clamp


def test_clamp_inside():
    assert clamp(2, 0, 5) == 2


def test_clamp_above():
    assert clamp(9, 0, 5) == 5


def test_clamp_rejects_inverted_range():
    with pytest.raises(ValueError):
        clamp(1, 5, 0)
'''

SPIN_CODE = '''def countdown(n):
    steps = []
    while n > 0:
        steps.append(n)
        n -= 1
    return steps
'''

SPIN_TESTS = '''from solution import countdown


def test_countdown():
    assert countdown(3) == [3, 2, 1]
'''

SENTINEL_CODE = '''SENTINEL = "sentinel.txt"
'''

SENTINEL_TESTS = '''import os
import time

from solution import SENTINEL


def test_directory_starts_clean():
    assert not os.path.exists(SENTINEL)
    with open(SENTINEL, "w") as f:
        f.write(str(os.getpid()))
    time.sleep(0.5)
    with open(SENTINEL) as f:
        assert f.read() == str(os.getpid())
'''


def span(code, start_marker, end_marker):
    start = code.index(start_marker)
    end = code.index(end_marker, start) + len(end_marker)
    return {"start": start, "end": end}


def task(id_, instruction, code, tests, highlight=None, cursor=None):
    doc = {
        "id": id_,
        "instruction": instruction,
        "instruction_language": "en",
        "code_language": "python",
        "original_code": code,
        "test_suite": tests,
        "test_command": PYTEST,
    }
    if highlight is not None:
        doc["highlight"] = span(code, *highlight)
    if cursor is not None:
        doc["cursor"] = code.index(cursor[0]) + cursor[1]
    return doc


CONNECT_INSTRUCTION = ("Add a `timeout` parameter to `connect()` that defaults to 10 seconds "
                       "and pass it on to `socket.create_connection`.")
CALC_INSTRUCTION = "`subtract` returns the wrong result. Fix it so that it returns `a` minus `b`."
RENAME_INSTRUCTION = "Rename the function `avg` to `mean` everywhere in this module."
LOGGING_INSTRUCTION = ('At the start of `process`, log "processing N items" at INFO level with the '
                       "module logger, where N is the number of items.")
CLAMP_INSTRUCTION = "Make `clamp` raise ValueError when `low` is greater than `high`."


def connect_task(id_):
    return task(id_, CONNECT_INSTRUCTION, CONNECT_CODE, CONNECT_TESTS,
                highlight=("def connect(", "return sock\n"), cursor=("def connect(host, port", 22))


def calc_task(id_):
    return task(id_, CALC_INSTRUCTION, CALC_CODE, CALC_TESTS,
                highlight=("    def subtract", "return a + b\n"), cursor=("return a + b", 0))


CORPUS = [
    connect_task("first_try"),
    calc_task("fix_on_2"),
    task("never_fixes", RENAME_INSTRUCTION, RENAME_CODE, RENAME_TESTS,
         highlight=("def avg(", "len(values)\n"), cursor=("def avg", 4)),
    task("add_logging", LOGGING_INSTRUCTION, LOGGING_CODE, LOGGING_TESTS,
         highlight=("def process(", "return total\n"), cursor=("    total = 0", 0)),
    task("clamp_range", CLAMP_INSTRUCTION, CLAMP_CODE, CLAMP_TESTS,
         highlight=("def clamp(", "high))\n"), cursor=("    return max", 0)),
]

TASKS = [
    calc_task("calc"),
    connect_task("connect"),
    task("spin", "Make `countdown` return the steps from n down to 1.", SPIN_CODE, SPIN_TESTS,
         highlight=("def countdown", "return steps\n")),
    task("sentinel", "Keep the sentinel file name unchanged.", SENTINEL_CODE, SENTINEL_TESTS),
    task("plain", CLAMP_INSTRUCTION, CLAMP_CODE, CLAMP_TESTS),
]


def write(directory, tasks):
    directory.mkdir(parents=True, exist_ok=True)
    for t in tasks:
        path = directory / (t["id"] + ".task.json")
        path.write_text(json.dumps(t, indent=2, ensure_ascii=False) + "\n")


def main():
    write(ROOT / "corpus", CORPUS)
    write(ROOT / "tasks", TASKS)


if __name__ == "__main__":
    main()
