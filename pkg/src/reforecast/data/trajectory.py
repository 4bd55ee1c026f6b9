"""Forecast-trajectory and pseudo-observation containers plus CSV ingestion.

Trajectory CSV layout: header ``issue_time,area,h0,h1,...,h{m-1}``, one row
per (issue hour, area), ISO-8601 timestamps, ``.`` decimal separator.
Pseudo-observation CSV layout: ``time,area,value``. Readers reject files
whose header does not match the schema map.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    EmptyFile,
    InconsistentHorizonCount,
    InvalidConfig,
    MissingColumn,
    NonNumericCell,
)

log = logging.getLogger(__name__)

DEFAULT_TRAJECTORY_SCHEMA = {"issue_time": "issue_time", "area": "area", "horizon_prefix": "h"}
DEFAULT_OBS_SCHEMA = {"time": "time", "area": "area", "value": "value"}

HOUR = np.timedelta64(1, "h")


@dataclass
class ForecastTrajectory:
    """values[t, k, r]: forecast issued at hour t for horizon step k, area r (MW).

    Horizon step 0 is the measurement anchor: the value issued at t for
    delivery at t itself is treated as an observation.
    """

    values: np.ndarray
    start_time: np.datetime64
    area_ids: list
    issue_times: np.ndarray = None
    p_max: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise InvalidConfig(f"trajectory values must be (n, m, d), got {self.values.shape}")
        n, m, d = self.values.shape
        if n < 2 or m < 3 or d < 1:
            raise InvalidConfig(f"need n >= 2, m >= 3, d >= 1, got ({n}, {m}, {d})")
        if not np.all(np.isfinite(self.values)):
            raise InvalidConfig("trajectory contains non-finite values")
        if len(self.area_ids) != d:
            raise InvalidConfig("area_ids length does not match the area axis")
        self.start_time = np.datetime64(self.start_time, "h")
        if self.issue_times is None:
            self.issue_times = self.start_time + np.arange(n) * HOUR
        else:
            self.issue_times = np.asarray(self.issue_times, dtype="datetime64[h]")
            if self.issue_times.shape != (n,):
                raise InvalidConfig("issue_times length does not match the issue axis")
        if self.p_max is not None:
            self.p_max = np.broadcast_to(
                np.asarray(self.p_max, dtype=np.float64), (d,)
            ).copy()

    @property
    def n_issues(self):
        return self.values.shape[0]

    @property
    def horizon(self):
        return self.values.shape[1]

    @property
    def n_areas(self):
        return self.values.shape[2]

    def bound_violation_count(self):
        """Cells outside [0, p_max]; reported, never rejected."""
        bad = self.values < 0.0
        if self.p_max is not None:
            bad |= self.values > self.p_max[None, None, :]
        return int(bad.sum())

    def observations(self):
        """Own observation series: the horizon-0 anchor of each issue."""
        return PseudoObservations(
            values=self.values[:, 0, :].copy(),
            start_time=self.start_time,
            area_ids=list(self.area_ids),
        )

    def slice_issues(self, t0, t1):
        return ForecastTrajectory(
            values=self.values[t0:t1].copy(),
            start_time=self.issue_times[t0],
            area_ids=list(self.area_ids),
            issue_times=self.issue_times[t0:t1].copy(),
            p_max=None if self.p_max is None else self.p_max.copy(),
        )


@dataclass
class PseudoObservations:
    """Realized (or simulated) values per absolute hour and area, in MW."""

    values: np.ndarray
    start_time: np.datetime64
    area_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InvalidConfig(f"observations must be (time, area), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidConfig("observations contain non-finite values")
        self.start_time = np.datetime64(self.start_time, "h")

    @property
    def length(self):
        return self.values.shape[0]


def _read_rows(path):
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise
    if not rows:
        raise EmptyFile(f"{path} is empty")
    return rows


def _parse_time(cell, path):
    try:
        return np.datetime64(cell, "h")
    except ValueError:
        raise NonNumericCell(f"{path}: bad timestamp {cell!r}")


def _parse_float(cell, path):
    try:
        return float(cell)
    except ValueError:
        raise NonNumericCell(f"{path}: bad numeric cell {cell!r}")


def load_trajectories(path, schema=None, p_max=None):
    """Read a trajectory CSV into a dense (n, m, d) ForecastTrajectory.

    Rows are sorted by issue time; issue hours where any area is missing are
    dropped and reported (via logging and the returned ``gap_count``
    attribute) rather than interpolated.
    """
    schema = {**DEFAULT_TRAJECTORY_SCHEMA, **(schema or {})}
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    for key in ("issue_time", "area"):
        if schema[key] not in header:
            raise MissingColumn(f"{path}: missing column {schema[key]!r}")
    it_col = header.index(schema["issue_time"])
    area_col = header.index(schema["area"])
    prefix = schema["horizon_prefix"]
    horizon_cols = [i for i, h in enumerate(header) if h.startswith(prefix) and h[len(prefix):].isdigit()]
    if not horizon_cols:
        raise MissingColumn(f"{path}: no horizon columns with prefix {prefix!r}")
    expected = [f"{prefix}{k}" for k in range(len(horizon_cols))]
    actual = [header[i] for i in horizon_cols]
    if actual != expected:
        raise MissingColumn(f"{path}: horizon columns must be {expected[0]}..{expected[-1]} in order")
    m = len(horizon_cols)
    if m < 3:
        raise InconsistentHorizonCount(f"{path}: need at least 3 horizon columns, got {m}")

    body = rows[1:]
    if not body:
        raise EmptyFile(f"{path} has a header but no data rows")

    records = {}
    areas = set()
    for row in body:
        if len(row) != len(header):
            raise InconsistentHorizonCount(
                f"{path}: row with {len(row)} cells, expected {len(header)}"
            )
        t = _parse_time(row[it_col], path)
        area = row[area_col].strip()
        areas.add(area)
        vals = [_parse_float(row[i], path) for i in horizon_cols]
        records[(t, area)] = vals

    area_ids = sorted(areas)
    times = sorted({t for t, _ in records})
    complete, dropped = [], 0
    for t in times:
        if all((t, a) in records for a in area_ids):
            complete.append(t)
        else:
            dropped += 1
    if len(complete) < 2:
        raise EmptyFile(f"{path}: fewer than two complete issue hours")
    values = np.empty((len(complete), m, len(area_ids)))
    for ti, t in enumerate(complete):
        for ai, a in enumerate(area_ids):
            values[ti, :, ai] = records[(t, a)]
    issue_times = np.array(complete, dtype="datetime64[h]")

    # gaps: missing hours inside the issue grid break update chains
    steps = np.diff(issue_times) / HOUR
    gap_count = int((steps > 1).sum()) + dropped
    if gap_count:
        log.warning("%s: %d issue-hour gaps detected", path, gap_count)

    traj = ForecastTrajectory(
        values=values,
        start_time=issue_times[0],
        area_ids=area_ids,
        issue_times=issue_times,
        p_max=p_max,
    )
    traj.gap_count = gap_count
    nviol = traj.bound_violation_count()
    if nviol:
        log.warning("%s: %d cells outside [0, p_max]", path, nviol)
    return traj


def write_trajectory_csv(traj, path, schema=None):
    schema = {**DEFAULT_TRAJECTORY_SCHEMA, **(schema or {})}
    m = traj.horizon
    header = [schema["issue_time"], schema["area"]] + [
        f"{schema['horizon_prefix']}{k}" for k in range(m)
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for ti in range(traj.n_issues):
            stamp = str(traj.issue_times[ti])
            for ai, area in enumerate(traj.area_ids):
                writer.writerow(
                    [stamp, area] + [repr(float(v)) for v in traj.values[ti, :, ai]]
                )


def load_observations(path, schema=None):
    """Read a ``time,area,value`` CSV into dense (time, area) observations."""
    schema = {**DEFAULT_OBS_SCHEMA, **(schema or {})}
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    for key in ("time", "area", "value"):
        if schema[key] not in header:
            raise MissingColumn(f"{path}: missing column {schema[key]!r}")
    t_col, a_col, v_col = (header.index(schema[k]) for k in ("time", "area", "value"))
    body = rows[1:]
    if not body:
        raise EmptyFile(f"{path} has a header but no data rows")
    records = {}
    for row in body:
        if len(row) != len(header):
            raise InconsistentHorizonCount(f"{path}: ragged row with {len(row)} cells")
        t = _parse_time(row[t_col], path)
        records[(t, row[a_col].strip())] = _parse_float(row[v_col], path)
    area_ids = sorted({a for _, a in records})
    times = sorted({t for t, _ in records})
    start, end = times[0], times[-1]
    length = int((end - start) / HOUR) + 1
    values = np.full((length, len(area_ids)), np.nan)
    for (t, a), v in records.items():
        values[int((t - start) / HOUR), area_ids.index(a)] = v
    if np.isnan(values).any():
        raise InvalidConfig(f"{path}: observation grid has holes (every hour x area required)")
    return PseudoObservations(values=values, start_time=start, area_ids=area_ids)


def write_observations_csv(obs, path, schema=None):
    schema = {**DEFAULT_OBS_SCHEMA, **(schema or {})}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema["time"], schema["area"], schema["value"]])
        for ti in range(obs.length):
            stamp = str(obs.start_time + ti * HOUR)
            for ai, area in enumerate(obs.area_ids):
                writer.writerow([stamp, area, repr(float(obs.values[ti, ai]))])
