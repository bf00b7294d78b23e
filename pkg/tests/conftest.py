import csv
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


def read_table(name):
    """Score block of a published results table: (row names, strategies, scores)."""
    with (DATA / name).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    strategies = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    scores = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return names, strategies, scores


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def table2():
    return read_table("table2.tsv")


@pytest.fixture(scope="session")
def table3():
    return read_table("table3.tsv")
