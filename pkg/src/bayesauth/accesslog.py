"""Access-control logs: parsing, hour-by-door discretisation, synthetic logs.

Log CSV
    Header ``timestamp,reader_id,user_id``; one access per line; timestamps
    in ISO-8601 local wall-clock time (``2009-03-02T08:15``). Time zones are
    not interpreted.

Cell layout
    A day's accesses become a count vector of degree ``24 * n_readers``;
    cell ``hour * n_readers + reader_index`` counts accesses in that hour at
    that reader. Readers are indexed in order of first appearance unless an
    explicit reader list is given.

Dataset file (version 1)
    Line 1: ``#bayesauth-dataset``. Line 2: a JSON object with ``version``,
    ``hours``, ``readers`` (index order), ``degree`` and ``rows``. Then one
    line per (user, day)::

        user_id,YYYY-MM-DD,cell:count cell:count ...

    with cells ascending. Rows are grouped by user (first appearance order)
    and sorted by day within a user.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .probcore import CountVector, sample_dirichlet_many

__all__ = [
    "AccessRecord",
    "ParsedLog",
    "DiscretizedDataset",
    "PopulationSpec",
    "DataError",
    "parse_log",
    "read_log",
    "serialize_log",
    "discretize",
    "generate_log",
    "save_dataset",
    "load_dataset",
    "office_base_measure",
]

log = logging.getLogger(__name__)

HOURS = 24
LOG_HEADER = ("timestamp", "reader_id", "user_id")
DATASET_MAGIC = "#bayesauth-dataset"
DATASET_VERSION = 1
MAX_REJECT_FRACTION = 0.5


class DataError(ValueError):
    """Input data is malformed or insufficient."""


@dataclass(frozen=True)
class AccessRecord:
    timestamp: dt.datetime
    reader_id: str
    user_id: str


@dataclass
class ParsedLog:
    records: list[AccessRecord]
    rejects: list[tuple[int, str, str]] = field(default_factory=list)  # (line, raw, reason)


def parse_log(source, schema=None, readers=None) -> ParsedLog:
    """Parse a log CSV from a text stream.

    ``schema`` maps ``timestamp``/``reader_id``/``user_id`` to column names
    (defaults to the canonical header) or to integer column positions for
    header-less input. Bad rows land in ``rejects``; if more than half of
    the rows are rejected the schema is assumed wrong and DataError raised.
    """
    try:
        text = source.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read log stream: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    allowed = set(readers) if readers is not None else None

    positional = schema is not None and all(isinstance(v, int) for v in schema.values())
    start = 0
    if positional:
        cols = [schema[k] for k in LOG_HEADER]
    else:
        if not rows:
            raise DataError("log has no header row")
        header = [h.strip() for h in rows[0]]
        names = dict(zip(LOG_HEADER, LOG_HEADER))
        if schema:
            names.update(schema)
        try:
            cols = [header.index(names[k]) for k in LOG_HEADER]
        except ValueError:
            raise DataError(f"header {header} lacks one of {list(names.values())}") from None
        start = 1

    records, rejects = [], []
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not c.strip() for c in row):
            continue
        raw = ",".join(row)
        try:
            ts_s, reader, user = (row[c].strip() for c in cols)
        except IndexError:
            rejects.append((lineno, raw, "too few columns"))
            continue
        try:
            ts = dt.datetime.fromisoformat(ts_s)
        except ValueError:
            rejects.append((lineno, raw, f"bad timestamp {ts_s!r}"))
            continue
        if not reader or not user:
            rejects.append((lineno, raw, "empty reader or user id"))
            continue
        if allowed is not None and reader not in allowed:
            rejects.append((lineno, raw, f"unknown reader {reader!r}"))
            continue
        records.append(AccessRecord(ts, reader, user))

    total = len(records) + len(rejects)
    if total and len(rejects) > MAX_REJECT_FRACTION * total:
        raise DataError(
            f"{len(rejects)} of {total} rows rejected; schema probably does not match"
        )
    if rejects:
        log.warning("rejected %d malformed row(s)", len(rejects))
    return ParsedLog(records, rejects)


def read_log(path, schema=None, readers=None) -> ParsedLog:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            return parse_log(fh, schema, readers)
    except FileNotFoundError:
        raise DataError(f"log file not found: {path}") from None


def _format_ts(ts: dt.datetime) -> str:
    if ts.second or ts.microsecond:
        return ts.isoformat()
    return ts.strftime("%Y-%m-%dT%H:%M")


def serialize_log(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_HEADER)
    for r in records:
        w.writerow([_format_ts(r.timestamp), r.reader_id, r.user_id])
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class DiscretizedDataset:
    """Per-(user, day) access counts over hour-by-reader cells.

    ``counts`` is a CSR matrix with one row per (user, day); ``users`` and
    ``days`` label the rows.
    """

    readers: tuple[str, ...]
    users: tuple[str, ...]
    days: tuple[dt.date, ...]
    counts: sparse.csr_matrix
    hours: int = HOURS

    def __post_init__(self):
        if self.counts.shape != (len(self.users), self.degree):
            raise ValueError("count matrix does not match row labels / layout")
        if len(self.days) != len(self.users):
            raise ValueError("users and days must label the same rows")

    @property
    def degree(self) -> int:
        return self.hours * len(self.readers)

    @property
    def n_rows(self) -> int:
        return len(self.users)

    def encode(self, hour: int, reader_index: int) -> int:
        if not (0 <= hour < self.hours and 0 <= reader_index < len(self.readers)):
            raise ValueError(f"cell ({hour}, {reader_index}) out of range")
        return hour * len(self.readers) + reader_index

    def decode(self, cell: int) -> tuple[int, int]:
        if not 0 <= cell < self.degree:
            raise ValueError(f"cell {cell} out of range")
        return divmod(cell, len(self.readers))

    def user_ids(self) -> list[str]:
        seen = dict.fromkeys(self.users)
        return list(seen)

    def rows_by_user(self) -> dict[str, np.ndarray]:
        out: dict[str, list[int]] = {}
        for i, u in enumerate(self.users):
            out.setdefault(u, []).append(i)
        return {u: np.array(v, dtype=np.int64) for u, v in out.items()}

    def day_vector(self, row: int) -> CountVector:
        return CountVector(self.counts[row].toarray().ravel().astype(float))

    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, DiscretizedDataset):
            return NotImplemented
        return (
            self.readers == other.readers
            and self.users == other.users
            and self.days == other.days
            and self.hours == other.hours
            and (self.counts != other.counts).nnz == 0
        )


def discretize(records, readers=None) -> DiscretizedDataset:
    """Count accesses per (hour, reader) for every user-day with any access."""
    records = list(records)
    if not records:
        raise DataError("cannot discretise an empty log")
    if readers is None:
        readers = list(dict.fromkeys(r.reader_id for r in records))
    reader_index = {r: i for i, r in enumerate(readers)}
    n_readers = len(readers)

    user_order: dict[str, int] = {}
    cells: dict[tuple[str, dt.date], dict[int, int]] = {}
    for rec in records:
        try:
            ri = reader_index[rec.reader_id]
        except KeyError:
            raise DataError(f"reader {rec.reader_id!r} not in the declared reader set") from None
        user_order.setdefault(rec.user_id, len(user_order))
        cell = rec.timestamp.hour * n_readers + ri
        day = cells.setdefault((rec.user_id, rec.timestamp.date()), {})
        day[cell] = day.get(cell, 0) + 1

    keys = sorted(cells, key=lambda k: (user_order[k[0]], k[1]))
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for key in keys:
        row = cells[key]
        for c in sorted(row):
            indices.append(c)
            data.append(row[c])
        indptr.append(len(indices))
    mat = sparse.csr_matrix(
        (np.array(data, dtype=np.int64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(keys), HOURS * n_readers),
    )
    return DiscretizedDataset(
        readers=tuple(readers),
        users=tuple(k[0] for k in keys),
        days=tuple(k[1] for k in keys),
        counts=mat,
    )


def save_dataset(dataset: DiscretizedDataset, path) -> None:
    Path(path).write_text(dumps_dataset(dataset), encoding="utf-8")


def dumps_dataset(dataset: DiscretizedDataset) -> str:
    header = {
        "version": DATASET_VERSION,
        "hours": dataset.hours,
        "readers": list(dataset.readers),
        "degree": dataset.degree,
        "rows": dataset.n_rows,
    }
    lines = [DATASET_MAGIC, json.dumps(header, sort_keys=True)]
    m = dataset.counts
    for i in range(dataset.n_rows):
        lo, hi = m.indptr[i], m.indptr[i + 1]
        order = np.argsort(m.indices[lo:hi], kind="stable")
        pairs = " ".join(f"{m.indices[lo + j]}:{m.data[lo + j]}" for j in order)
        lines.append(f"{_csv_field(dataset.users[i])},{dataset.days[i].isoformat()},{pairs}")
    return "\n".join(lines) + "\n"


def _csv_field(s: str) -> str:
    if "," in s or "\n" in s:
        raise DataError(f"user id {s!r} cannot be stored in a dataset file")
    return s


def load_dataset(path) -> DiscretizedDataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}") from None
    return loads_dataset(text)


def loads_dataset(text: str) -> DiscretizedDataset:
    lines = text.splitlines()
    if len(lines) < 2 or lines[0] != DATASET_MAGIC:
        raise DataError("not a bayesauth dataset file")
    try:
        header = json.loads(lines[1])
    except json.JSONDecodeError as exc:
        raise DataError(f"bad dataset header: {exc}") from exc
    if header.get("version") != DATASET_VERSION:
        raise DataError(f"unsupported dataset version {header.get('version')!r}")
    readers = tuple(header["readers"])
    hours = int(header["hours"])
    degree = hours * len(readers)
    if degree != header["degree"]:
        raise DataError("dataset header degree disagrees with hours * readers")
    users, days, indptr, indices, data = [], [], [0], [], []
    for ln, line in enumerate(lines[2:], start=3):
        try:
            user, day, pairs = line.split(",", 2)
            users.append(user)
            days.append(dt.date.fromisoformat(day))
            for tok in pairs.split():
                c, v = tok.split(":")
                indices.append(int(c))
                data.append(int(v))
        except ValueError as exc:
            raise DataError(f"line {ln}: {exc}") from exc
        indptr.append(len(indices))
    if len(users) != header["rows"]:
        raise DataError(f"header promises {header['rows']} rows, file has {len(users)}")
    if indices and (min(indices) < 0 or max(indices) >= degree):
        raise DataError("cell index outside the declared layout")
    mat = sparse.csr_matrix(
        (np.array(data, dtype=np.int64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(users), degree),
    )
    return DiscretizedDataset(readers, tuple(users), tuple(days), mat, hours)


def office_base_measure(n_readers: int, reader_skew: float = 1.0) -> np.ndarray:
    """Population-average cell probabilities for an office building.

    Hours follow a working-day profile (arrival, lunch and departure peaks,
    little night traffic); reader popularity decays as 1/(rank+1)**skew.
    """
    h = np.arange(HOURS)
    hour_w = (
        0.02
        + np.exp(-0.5 * ((h - 8.5) / 1.0) ** 2)
        + 0.6 * np.exp(-0.5 * ((h - 12.5) / 0.8) ** 2)
        + 0.5 * np.exp(-0.5 * ((h - 17.0) / 1.2) ** 2)
        + 0.3 * ((h >= 9) & (h <= 16))
    )
    reader_w = 1.0 / (np.arange(n_readers) + 1.0) ** reader_skew
    base = np.outer(hour_w / hour_w.sum(), reader_w / reader_w.sum()).ravel()
    return base / base.sum()


@dataclass(frozen=True)
class PopulationSpec:
    """Recipe for a synthetic building population.

    Users are split round-robin into ``n_groups`` departments. A department
    profile is drawn from Dirichlet(group_concentration * base) and each
    member's profile from Dirichlet(concentration * department profile).
    With one group the department profile is the base measure itself.
    ``profiles`` overrides all of this; ``shared_profile`` gives every user
    the same drawn profile (users are then indistinguishable). Each day a
    user makes Poisson(mean_daily_accesses) accesses.
    """

    n_users: int = 882
    n_readers: int = 55
    mean_daily_accesses: float = 2.3
    concentration: float = 30.0
    n_groups: int = 5
    group_concentration: float = 5.0
    reader_skew: float = 1.0
    shared_profile: bool = False
    profiles: np.ndarray | None = None
    start: dt.date = dt.date(2009, 3, 2)

    def __post_init__(self):
        if self.n_users < 1 or self.n_readers < 1:
            raise ValueError("need at least one user and one reader")
        if self.n_groups < 1:
            raise ValueError("n_groups must be >= 1")
        if not (self.concentration > 0 and self.group_concentration > 0):
            raise ValueError("concentrations must be positive")
        if not self.mean_daily_accesses > 0:
            raise ValueError("mean_daily_accesses must be positive")
        if self.profiles is not None:
            p = np.asarray(self.profiles, dtype=float)
            if p.shape != (self.n_users, HOURS * self.n_readers):
                raise ValueError("profiles must be (n_users, 24 * n_readers)")

    @property
    def degree(self) -> int:
        return HOURS * self.n_readers

    def reader_ids(self) -> list[str]:
        width = max(2, len(str(self.n_readers)))
        return [f"door-{i + 1:0{width}d}" for i in range(self.n_readers)]

    def user_ids(self) -> list[str]:
        width = max(4, len(str(self.n_users)))
        return [f"u{i + 1:0{width}d}" for i in range(self.n_users)]

    def draw_profiles(self, rng: np.random.Generator) -> np.ndarray:
        if self.profiles is not None:
            p = np.asarray(self.profiles, dtype=float)
            return p / p.sum(axis=1, keepdims=True)
        base = office_base_measure(self.n_readers, self.reader_skew)
        if self.n_groups == 1:
            centres = base[None, :]
        else:
            centres = sample_dirichlet_many(self.group_concentration * base, self.n_groups, rng)
        if self.shared_profile:
            one = sample_dirichlet_many(self.concentration * centres[0], 1, rng)
            return np.repeat(one, self.n_users, axis=0)
        group = np.arange(self.n_users) % self.n_groups
        return np.vstack(
            [sample_dirichlet_many(self.concentration * centres[g], 1, rng)[0] for g in group]
        )


def generate_log(profile: PopulationSpec, days: int, rng: np.random.Generator):
    """Simulate ``days`` days of accesses; returns records in time order."""
    if days < 1:
        raise ValueError("days must be >= 1")
    profiles = profile.draw_profiles(rng)
    readers = profile.reader_ids()
    users = profile.user_ids()
    n_readers = profile.n_readers
    k = profile.degree

    events = []  # (day, cell, minute, user index)
    for u in range(profile.n_users):
        per_day = rng.poisson(profile.mean_daily_accesses, size=days)
        total = int(per_day.sum())
        if total == 0:
            continue
        cdf = np.cumsum(profiles[u])
        cell = np.minimum(np.searchsorted(cdf, rng.random(total) * cdf[-1], side="right"), k - 1)
        minute = rng.integers(0, 60, size=total)
        day = np.repeat(np.arange(days), per_day)
        events.append(np.column_stack([day, cell, minute, np.full(total, u)]))
    if not events:
        return []
    ev = np.concatenate(events)
    hour = ev[:, 1] // n_readers
    order = np.lexsort((ev[:, 3], ev[:, 2], hour, ev[:, 0]))
    ev = ev[order]
    base = dt.datetime.combine(profile.start, dt.time())
    out = []
    for d, c, m, u in ev.tolist():
        h, r = divmod(c, n_readers)
        ts = base + dt.timedelta(days=d, hours=h, minutes=m)
        out.append(AccessRecord(ts, readers[r], users[u]))
    return out
