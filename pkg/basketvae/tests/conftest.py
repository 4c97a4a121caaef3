"""Fixtures: interchange files produced by the primary toolkit CLI."""

import subprocess
import sys

import pytest


def run_nbrkit(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "nbrkit", *args], capture_output=True, text=True
    )


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    """500-user synthetic corpus with full and validation vector exports."""
    root = tmp_path_factory.mktemp("interchange")
    steps = [
        (
            "ingest", "--synthetic", "--seed", "42", "--n-users", "500",
            "--n-items", "260", "--baskets-per-user", "4", "8",
            "--basket-size", "3", "8", "--out-dir", str(root),
        ),
        (
            "export-vectors", "--corpus", str(root / "corpus.ndjson"),
            "--vocab", str(root / "vocab.json"), "--within-decay", "0.9",
            "--group-decay", "0.7", "--groups", "3", "--out-dir", str(root),
            "--out-file", "vectors_full.ndjson",
        ),
        (
            "export-vectors", "--corpus", str(root / "corpus.ndjson"),
            "--vocab", str(root / "vocab.json"), "--within-decay", "0.9",
            "--group-decay", "0.7", "--groups", "3", "--validation-split",
            "--out-dir", str(root), "--out-file", "vectors_val.ndjson",
        ),
    ]
    for step in steps:
        result = run_nbrkit(*step)
        assert result.returncode == 0, result.stderr
    return root


@pytest.fixture(scope="session")
def small_data_dir(tmp_path_factory):
    """Tiny corpus for fast training-behavior tests."""
    root = tmp_path_factory.mktemp("small")
    steps = [
        (
            "ingest", "--synthetic", "--seed", "9", "--n-users", "120",
            "--n-items", "80", "--baskets-per-user", "4", "7",
            "--basket-size", "3", "6", "--out-dir", str(root),
        ),
        (
            "export-vectors", "--corpus", str(root / "corpus.ndjson"),
            "--vocab", str(root / "vocab.json"), "--within-decay", "0.9",
            "--group-decay", "0.7", "--groups", "3", "--out-dir", str(root),
            "--out-file", "vectors_full.ndjson",
        ),
        (
            "export-vectors", "--corpus", str(root / "corpus.ndjson"),
            "--vocab", str(root / "vocab.json"), "--within-decay", "0.9",
            "--group-decay", "0.7", "--groups", "3", "--validation-split",
            "--out-dir", str(root), "--out-file", "vectors_val.ndjson",
        ),
    ]
    for step in steps:
        result = run_nbrkit(*step)
        assert result.returncode == 0, result.stderr
    return root
