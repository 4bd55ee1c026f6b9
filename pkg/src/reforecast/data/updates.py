"""Forecast-update extraction and the UpdateSeries container.

An update is the revision between two consecutive issues for one delivery
time. With horizon length m, each update sequence holds m - 2 steps: the
delivery window runs from the publication hour itself through the second-to-
last shared horizon, which drops the stale farthest horizon and keeps the
sequence aligned with what both issues actually share.
"""

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import (
    EmptyFile,
    InconsistentHorizonCount,
    InvalidConfig,
    MissingColumn,
    NonNumericCell,
    TooFewSequences,
)
from .trajectory import HOUR

UPDATES_CSV_HEADER = ["sequence", "step", "area", "value"]


@dataclass
class UpdateSeries:
    """values[i, q, r]: update published at issue i+1 for delivery step q.

    Column q of row i concerns absolute delivery hour (publication hour + q),
    i.e. ``horizon_offset`` = 0: the first column revises the forecast for
    the publication hour itself.
    """

    values: np.ndarray
    area_ids: list
    horizon_offset: int = 0
    issue_times: np.ndarray = None  # publication hour of each row

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise InvalidConfig(f"updates must be (n', m', d), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidConfig("updates contain non-finite values")
        if len(self.area_ids) != self.values.shape[2]:
            raise InvalidConfig("area_ids length does not match the area axis")
        if self.issue_times is not None:
            self.issue_times = np.asarray(self.issue_times, dtype="datetime64[h]")
            if self.issue_times.shape != (self.values.shape[0],):
                raise InvalidConfig("issue_times length does not match rows")

    @property
    def n_sequences(self):
        return self.values.shape[0]

    @property
    def m_prime(self):
        return self.values.shape[1]

    @property
    def n_areas(self):
        return self.values.shape[2]

    def flatten(self):
        """(n', m'*d) view, horizon-major then area."""
        return self.values.reshape(self.n_sequences, self.m_prime * self.n_areas)

    def slice_rows(self, i0, i1):
        return UpdateSeries(
            values=self.values[i0:i1].copy(),
            area_ids=list(self.area_ids),
            horizon_offset=self.horizon_offset,
            issue_times=None if self.issue_times is None else self.issue_times[i0:i1].copy(),
        )


def extract_updates(traj):
    """Difference consecutive forecast issues per shared delivery time.

    Output row i (published at issue i+1): values[i, q, r] =
    P[i+1, q, r] - P[i, q+1, r] for q = 0..m-3, shape (n-1, m-2, d).
    Pairs of issues that straddle a gap in the hourly grid are dropped, not
    interpolated.
    """
    if traj.n_issues < 2:
        raise TooFewSequences(f"need at least 2 issues, got {traj.n_issues}")
    newer = traj.values[1:, :-2, :]
    older = traj.values[:-1, 1:-1, :]
    values = newer - older
    pub_times = traj.issue_times[1:]
    spacing = np.diff(traj.issue_times) / HOUR
    keep = spacing == 1
    if not np.all(keep):
        values = values[keep]
        pub_times = pub_times[keep]
    if values.shape[0] == 0:
        raise TooFewSequences("no consecutive issue pairs after gap removal")
    return UpdateSeries(
        values=values,
        area_ids=list(traj.area_ids),
        horizon_offset=0,
        issue_times=pub_times,
    )


def write_updates_csv(updates, path):
    """Long-format CSV: sequence,step,area,value with full float precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(UPDATES_CSV_HEADER)
        for i in range(updates.n_sequences):
            for q in range(updates.m_prime):
                for ai, area in enumerate(updates.area_ids):
                    writer.writerow([i, q, area, repr(float(updates.values[i, q, ai]))])


def load_updates_csv(path):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyFile(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if header != UPDATES_CSV_HEADER:
        raise MissingColumn(f"{path}: expected header {UPDATES_CSV_HEADER}, got {header}")
    body = rows[1:]
    if not body:
        raise EmptyFile(f"{path} has a header but no data rows")
    records = {}
    for row in body:
        if len(row) != 4:
            raise InconsistentHorizonCount(f"{path}: ragged row with {len(row)} cells")
        try:
            i, q = int(row[0]), int(row[1])
            v = float(row[3])
        except ValueError:
            raise NonNumericCell(f"{path}: bad cell in row {row!r}")
        records[(i, q, row[2].strip())] = v
    area_ids = sorted({a for _, _, a in records})
    n = max(i for i, _, _ in records) + 1
    m = max(q for _, q, _ in records) + 1
    values = np.full((n, m, len(area_ids)), np.nan)
    for (i, q, a), v in records.items():
        values[i, q, area_ids.index(a)] = v
    if np.isnan(values).any():
        raise InconsistentHorizonCount(f"{path}: missing (sequence, step, area) cells")
    return UpdateSeries(values=values, area_ids=area_ids, horizon_offset=0)
