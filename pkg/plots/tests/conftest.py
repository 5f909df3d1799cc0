"""Shared helpers: shipped artifact paths and synthetic CSV writers."""

import csv
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


def write_trajectory_csv(path, players=("d1", "tau", "a"), rows=3, drop=None):
    """Hand-rolled trajectory file with deterministic made-up values.

    drop removes one named column (header and cells) to exercise the
    schema errors.
    """
    header = ["t"]
    for p in players:
        header += [f"x_{p}", f"y_{p}"]
    for p in players:
        header += [f"ux_{p}", f"uy_{p}"]
    header.append("terminated")

    table = []
    for k in range(rows):
        row = [0.05 * k]
        row += [0.1 * k + 0.01 * j for j in range(4 * len(players))]
        row.append(int(k == rows - 1))
        table.append([repr(float(v)) for v in row])

    if drop is not None:
        j = header.index(drop)
        header.pop(j)
        for row in table:
            row.pop(j)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(table)
    return str(path)
