"""Shared fixtures: mock-backend subprocess management and dataset files.

The mock runs in a separate process (its own interpreter and event loop) so
service timing is not skewed by the test process; logs and the test process
share Linux's system-wide monotonic clock, so timestamps are comparable.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time
import urllib.error
import urllib.request
from pathlib import Path

import pytest


class MockProcess:
    """Handle to a `joulebench mock` subprocess."""

    def __init__(self, *, capacity=100, duration=0.2, tokens=16, idle_power=100.0,
                 peak_power=300.0, fault_every=None):
        self.capacity = capacity
        self.duration = duration
        self.tokens = tokens
        self.idle_power = idle_power
        self.peak_power = peak_power
        cmd = [
            sys.executable, "-m", "joulebench.cli", "mock",
            "--port", "0",
            "--capacity", str(capacity),
            "--duration", str(duration),
            "--tokens", str(tokens),
            "--idle-power", str(idle_power),
            "--peak-power", str(peak_power),
        ]
        if fault_every is not None:
            cmd += ["--fault-every", str(fault_every)]
        self.proc = subprocess.Popen(cmd, stdout=subprocess.PIPE, text=True)
        banner = self.proc.stdout.readline()
        assert "serving on" in banner, f"unexpected mock banner: {banner!r}"
        self.url = banner.split()[3]
        self._wait_ready()

    def _wait_ready(self, timeout=10.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            try:
                urllib.request.urlopen(self.url + "/health", timeout=0.5)
                return
            except (urllib.error.URLError, OSError):
                time.sleep(0.05)
        raise RuntimeError(f"mock at {self.url} never became healthy")

    def control(self, path):
        with urllib.request.urlopen(self.url + path, timeout=5.0) as resp:
            return json.loads(resp.read())

    def inflight_log(self):
        return self.control("/control/inflight_log")

    def reset(self):
        req = urllib.request.Request(self.url + "/control/reset", data=b"", method="POST")
        urllib.request.urlopen(req, timeout=5.0)

    def stop(self):
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


@pytest.fixture
def mock_factory():
    """Spawn mocks with arbitrary configs; all are torn down after the test."""
    spawned: list[MockProcess] = []

    def spawn(**kwargs) -> MockProcess:
        mock = MockProcess(**kwargs)
        spawned.append(mock)
        return mock

    yield spawn
    for mock in spawned:
        mock.stop()


@pytest.fixture(scope="session")
def shared_mock():
    """One default mock (capacity 100, d=0.2 s) for cheap read-only tests."""
    mock = MockProcess()
    yield mock
    mock.stop()


def write_hellaswag(path: Path, count: int) -> Path:
    with open(path, "w") as fh:
        for i in range(count):
            record = {
                "ind": i,
                "activity_label": "Testing",
                "ctx": f"A person sets up benchmark number {i} and then",
                "endings": ["finishes it.", "starts over.", "gives up.", "naps."],
            }
            fh.write(json.dumps(record) + "\n")
    return path


@pytest.fixture
def hellaswag_file(tmp_path):
    def make(count: int, name="prompts.jsonl") -> Path:
        return write_hellaswag(tmp_path / name, count)

    return make
