"""Event catalogues: construction, CSV/JSON round trips, domain splitting.

Times are real-valued days relative to a reference epoch; the epoch itself
is carried as metadata only and never enters any computation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Event",
    "Catalog",
    "TimeDomain",
    "CatalogReport",
    "CatalogFormatError",
    "load_catalog",
    "save_catalog",
    "split_domain",
    "validate",
]


class CatalogFormatError(ValueError):
    """Raised when a catalogue file cannot be parsed."""


@dataclass(frozen=True)
class Event:
    """One earthquake: occurrence time (days), magnitude, ordinal id."""

    time: float
    magnitude: float
    id: int


@dataclass(frozen=True)
class TimeDomain:
    """Model window [T1, T2] in days plus the minimum modelled magnitude."""

    t1: float
    t2: float
    m0: float

    def __post_init__(self):
        if not (self.t1 < self.t2):
            raise ValueError(f"require T1 < T2, got [{self.t1}, {self.t2}]")
        if not math.isfinite(self.m0):
            raise ValueError("M0 must be finite")

    @property
    def length(self) -> float:
        return self.t2 - self.t1


class Catalog:
    """Immutable, sorted sequence of events.

    Sorting is (time ascending, magnitude descending, id ascending) and is
    re-established on construction: a mainshock always precedes same-time
    aftershocks, so the strict-past history relation never sees the
    aftershock before its parent.
    """

    __slots__ = ("times", "mags", "ids", "reference_epoch")

    def __init__(self, times, mags, ids=None, reference_epoch: str = ""):
        times = np.asarray(times, dtype=float)
        mags = np.asarray(mags, dtype=float)
        if times.shape != mags.shape or times.ndim != 1:
            raise ValueError("times and magnitudes must be 1-d and equal length")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(mags))):
            raise ValueError("non-finite time or magnitude")
        if ids is None:
            ids = np.arange(times.size, dtype=np.int64)
        else:
            ids = np.asarray(ids, dtype=np.int64)
            if ids.shape != times.shape:
                raise ValueError("ids must match times in length")
            if np.unique(ids).size != ids.size:
                raise ValueError("event ids must be unique")
        order = np.lexsort((ids, -mags, times))
        self.times = times[order]
        self.mags = mags[order]
        self.ids = ids[order]
        for a in (self.times, self.mags, self.ids):
            a.setflags(write=False)
        self.reference_epoch = reference_epoch

    @classmethod
    def from_events(cls, events: Iterable[Event], reference_epoch: str = "") -> "Catalog":
        ev = list(events)
        return cls(
            [e.time for e in ev],
            [e.magnitude for e in ev],
            [e.id for e in ev],
            reference_epoch=reference_epoch,
        )

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i: int) -> Event:
        return Event(float(self.times[i]), float(self.mags[i]), int(self.ids[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __repr__(self) -> str:
        return f"Catalog(n={len(self)})"

    def filter_magnitude(self, m0: float) -> "Catalog":
        keep = self.mags >= m0
        return Catalog(self.times[keep], self.mags[keep], self.ids[keep],
                       reference_epoch=self.reference_epoch)

    def to_json(self) -> str:
        rows = [
            {"time": float(t), "magnitude": float(m), "id": int(i)}
            for t, m, i in zip(self.times, self.mags, self.ids)
        ]
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str, reference_epoch: str = "") -> "Catalog":
        rows = json.loads(text)
        return cls(
            [r["time"] for r in rows],
            [r["magnitude"] for r in rows],
            [r["id"] for r in rows],
            reference_epoch=reference_epoch,
        )


@dataclass(frozen=True)
class CatalogReport:
    """Read-only diagnostics for a catalogue against a model domain."""

    n_events: int
    t_min: float
    t_max: float
    mag_min: float
    mag_max: float
    n_below_m0: int
    n_duplicate_times: int


def load_catalog(
    path,
    time_col: str = "time",
    mag_col: str = "magnitude",
    id_col: str = "id",
    reference_epoch: str = "",
) -> Catalog:
    """Read a catalogue from CSV.

    Expected header ``time,magnitude[,id]`` (names remappable via the
    ``*_col`` arguments). Malformed rows raise ``CatalogFormatError``
    naming the 1-based line number.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CatalogFormatError(f"cannot read {path}: {exc}") from exc
    times, mags, ids = [], [], []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or time_col not in reader.fieldnames \
                or mag_col not in reader.fieldnames:
            raise CatalogFormatError(
                f"{path}: header must contain '{time_col}' and '{mag_col}'"
            )
        has_id = id_col in reader.fieldnames
        for row in reader:
            lineno = reader.line_num
            try:
                t = float(row[time_col])
                m = float(row[mag_col])
            except (TypeError, ValueError):
                raise CatalogFormatError(
                    f"{path}: malformed row at line {lineno}"
                ) from None
            if not (math.isfinite(t) and math.isfinite(m)):
                raise CatalogFormatError(
                    f"{path}: non-finite time or magnitude at line {lineno}"
                )
            times.append(t)
            mags.append(m)
            if has_id:
                try:
                    ids.append(int(row[id_col]))
                except (TypeError, ValueError):
                    raise CatalogFormatError(
                        f"{path}: malformed id at line {lineno}"
                    ) from None
    return Catalog(times, mags, ids if ids else None, reference_epoch=reference_epoch)


def save_catalog(cat: Catalog, path) -> None:
    """Write ``time,magnitude,id`` CSV with full float round-trip precision."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "magnitude", "id"])
        for t, m, i in zip(cat.times, cat.mags, cat.ids):
            writer.writerow([repr(float(t)), repr(float(m)), int(i)])


def split_domain(cat: Catalog, dom: TimeDomain) -> tuple[Catalog, Catalog]:
    """Partition into (history, modeled) against the model window.

    history: time < T1 and magnitude >= M0 (kept for its triggering
    contribution); modeled: T1 <= time <= T2 and magnitude >= M0 (both
    boundaries inclusive, so a mainshock seeded exactly on a boundary day
    is never dropped). Events after T2 are discarded: they have no causal
    impact on the window.
    """
    above = cat.mags >= dom.m0
    hist = above & (cat.times < dom.t1)
    model = above & (cat.times >= dom.t1) & (cat.times <= dom.t2)
    history = Catalog(cat.times[hist], cat.mags[hist], cat.ids[hist],
                      reference_epoch=cat.reference_epoch)
    modeled = Catalog(cat.times[model], cat.mags[model], cat.ids[model],
                      reference_epoch=cat.reference_epoch)
    return history, modeled


def validate(cat: Catalog, dom: TimeDomain) -> CatalogReport:
    """Summary counts; never mutates and never raises on odd content."""
    n = len(cat)
    if n == 0:
        return CatalogReport(0, math.nan, math.nan, math.nan, math.nan, 0, 0)
    return CatalogReport(
        n_events=n,
        t_min=float(cat.times.min()),
        t_max=float(cat.times.max()),
        mag_min=float(cat.mags.min()),
        mag_max=float(cat.mags.max()),
        n_below_m0=int(np.sum(cat.mags < dom.m0)),
        n_duplicate_times=int(n - np.unique(cat.times).size),
    )
