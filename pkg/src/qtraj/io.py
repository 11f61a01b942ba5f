"""CSV artifacts.

Floats are written with 17 significant digits, enough for every double to
read back bit-for-bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .fisher import FisherSeries, MHChain
from .sme import TrajectoryRecord

TRAJECTORY_HEADER = ["t", "x", "y", "z", "dW", "dY", "Y"]
FISHER_HEADER = ["t", "I", "stderr", "n_ensemble"]
CHAIN_HEADER = ["step", "value", "accepted"]
QFI_HEADER = ["t", "qfi"]

FLOAT = "%.17g"


def write_columns(path, header, columns, formats=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    fmt = formats or [FLOAT] * len(header)
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=",".join(header), comments="")
    return path


def read_columns(path, expected_header=None):
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if expected_header is not None and header[: len(expected_header)] != list(expected_header):
        raise ValueError(f"{path}: expected header {expected_header}, got {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, {name: data[:, i] for i, name in enumerate(header)}


def write_trajectory(path, record: TrajectoryRecord, loglik=None):
    header = list(TRAJECTORY_HEADER)
    columns = [record.times, *record.bloch.T, record.dW, record.dY, record.Y]
    if loglik is not None:
        header.append("l")
        columns.append(loglik)
    return write_columns(path, header, columns)


def read_trajectory(path):
    """Returns ``(record, loglik)``; ``loglik`` is None when the file has no ``l`` column."""
    _, cols = read_columns(path, TRAJECTORY_HEADER)
    record = TrajectoryRecord(
        times=cols["t"],
        bloch=np.column_stack([cols["x"], cols["y"], cols["z"]]),
        dW=cols["dW"],
        dY=cols["dY"],
        Y=cols["Y"],
    )
    return record, cols.get("l")


def write_fisher(path, series: FisherSeries):
    stderr = series.stderr if series.stderr is not None else np.full(len(series), np.nan)
    return write_columns(
        path,
        FISHER_HEADER,
        [series.times, series.information, stderr, np.full(len(series), series.n_ensemble)],
        [FLOAT, FLOAT, FLOAT, "%d"],
    )


def read_fisher(path) -> FisherSeries:
    _, cols = read_columns(path, FISHER_HEADER)
    n = cols["n_ensemble"]
    return FisherSeries(
        times=cols["t"],
        information=cols["I"],
        n_ensemble=int(n[0]) if len(n) else 0,
        stderr=cols["stderr"],
    )


def write_chain(path, chain: MHChain):
    steps = np.arange(len(chain.samples))
    return write_columns(
        path, CHAIN_HEADER, [steps, chain.samples, chain.accepted], ["%d", FLOAT, "%d"]
    )


def read_chain(path):
    """Returns ``(samples, accepted)``."""
    _, cols = read_columns(path, CHAIN_HEADER)
    return cols["value"], cols["accepted"].astype(bool)


def write_qfi(path, times, values):
    return write_columns(path, QFI_HEADER, [times, values])


def read_qfi(path):
    _, cols = read_columns(path, QFI_HEADER)
    return cols["t"], cols["qfi"]
