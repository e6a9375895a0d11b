import os
from pathlib import Path

import numpy as np
import pytest

from uqcheck import Dataset, LogUniform, SynthSpec, generate_calibrated, load_dataset

QM9_ENV = "UQCHECK_QM9_CSV"


def qm9_csv_path() -> Path:
    override = os.environ.get(QM9_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent.parent / "data" / "qm9_test.csv"


@pytest.fixture(scope="session")
def qm9() -> Dataset:
    """The public QM9 validation export (M=13885), if present locally."""
    path = qm9_csv_path()
    if not path.exists():
        pytest.skip(
            f"QM9 validation export not found at {path}; "
            f"see README for the conversion recipe (or set {QM9_ENV})"
        )
    d = load_dataset(path, {"R": "R", "V": "V", "uV": "uV"}, features=("X1", "X2"))
    if d.size != 13885:
        pytest.skip(f"file at {path} has {d.size} usable rows, expected the 13885-row export")
    return d


@pytest.fixture
def calibrated_10k() -> Dataset:
    return generate_calibrated(SynthSpec(10_000, LogUniform(0.01, 0.1), seed=7))


@pytest.fixture
def write_table(tmp_path):
    """Write rows as a delimited file and return its path."""

    def _write(header, rows, name="table.csv", delimiter=","):
        path = tmp_path / name
        lines = [delimiter.join(header)]
        for row in rows:
            lines.append(delimiter.join(str(c) for c in row))
        path.write_text("\n".join(lines) + "\n")
        return path

    return _write


def assert_estimates_equal(a, b):
    """Bit-exact equality of two estimates, field by field."""
    assert a.value == b.value
    assert a.interval.low == b.interval.low
    assert a.interval.high == b.interval.high
    assert a.interval.level == b.interval.level
    assert a.interval.method == b.interval.method
    assert a.target == b.target
    assert a.valid == b.valid


def rng_samples(seed, count, size):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(size) for _ in range(count)]
