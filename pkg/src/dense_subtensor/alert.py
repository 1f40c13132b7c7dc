"""Sliding-window alerting on suddenly emerging dense subtensors.

Every increment is applied immediately and its undo is scheduled ``window``
ticks later, so the engine always holds the tensor of the last ``window``
ticks.  An expiry scheduled for time ``t + window`` is applied before the
first event stamped at or after that time.
"""

from __future__ import annotations

import heapq
import itertools
from collections.abc import Iterable
from dataclasses import dataclass, field

from .stream import DenseStream
from .tensor import SparseTensor


class StreamOrderError(ValueError):
    """An event arrived with an earlier timestamp than its predecessor."""


@dataclass(frozen=True)
class TimedEvent:
    time: int
    entry: tuple
    delta: float
    sign: int = 1


@dataclass(frozen=True)
class AlertRecord:
    time: int
    density: float
    slices: frozenset
    mass: float


class DenseAlert:
    def __init__(self, dims, window: int, *, check_gate: bool = False) -> None:
        if window <= 0:
            raise ValueError(f"window must be positive, got {window}")
        self.window = window
        self.engine = DenseStream(SparseTensor(dims), check_gate=check_gate)
        self.now: int | None = None
        self._expiry: list = []
        self._seq = itertools.count()

    @property
    def tensor(self) -> SparseTensor:
        return self.engine.tensor

    @property
    def density(self) -> float:
        return self.engine.density

    def _record(self, time: int) -> AlertRecord:
        sel = self.engine.selection
        return AlertRecord(time, sel.density, sel.slices, sel.mass)

    def expire(self, time: int) -> list[AlertRecord]:
        """Undo every increment whose window closed at or before ``time``."""
        out = []
        queue = self._expiry
        while queue and queue[0][0] <= time:
            _, _, entry, delta = heapq.heappop(queue)
            self.engine.decrement(entry, delta)
            out.append(self._record(time))
        return out

    def step(self, ev: TimedEvent) -> list[AlertRecord]:
        if self.now is not None and ev.time < self.now:
            raise StreamOrderError(f"event at time {ev.time} after time {self.now}")
        if ev.sign < 0:
            raise ValueError("the alert window only accepts increments")
        self.now = ev.time
        out = self.expire(ev.time)
        self.engine.increment(ev.entry, ev.delta)
        heapq.heappush(self._expiry, (ev.time + self.window, next(self._seq), ev.entry, ev.delta))
        out.append(self._record(ev.time))
        return out

    @property
    def window_size(self) -> int:
        """Number of increments currently inside the window."""
        return len(self._expiry)

    def window_events(self) -> list[tuple]:
        """``(expiry_time, entry, delta)`` for increments still in the window."""
        return [(t, e, d) for t, _, e, d in sorted(self._expiry)]


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


@dataclass(eq=False)
class _Group:
    peak: AlertRecord
    last_time: int


class TopK:
    """Collapse near-duplicate alert records and keep the densest groups.

    A record joins every still-open group (last seen within ``window``
    ticks) whose peak slice set it overlaps with Jaccard >= ``jaccard``;
    groups joined by the same record are merged.  A group keeps its peak
    record.
    """

    def __init__(self, k: int = 10, window: int = 1, jaccard: float = 0.5) -> None:
        self.k = k
        self.window = window
        self.threshold = jaccard
        self._open: list[_Group] = []
        self._closed: list[AlertRecord] = []
        self._last_slices = None
        self._last_group: _Group | None = None

    def add(self, rec: AlertRecord) -> None:
        still = []
        for g in self._open:
            if rec.time - g.last_time > self.window:
                self._closed.append(g.peak)
            else:
                still.append(g)
        self._open = still

        if rec.slices is self._last_slices and self._last_group in still:
            matched = [self._last_group]
        else:
            matched = [g for g in still if jaccard(rec.slices, g.peak.slices) >= self.threshold]

        if not matched:
            group = _Group(rec, rec.time)
            self._open.append(group)
        else:
            group = matched[0]
            for other in matched[1:]:
                if other.peak.density > group.peak.density:
                    group.peak = other.peak
                self._open.remove(other)
            if rec.density > group.peak.density:
                group.peak = rec
            group.last_time = rec.time
        self._last_slices = rec.slices
        self._last_group = group

    def groups(self) -> list[AlertRecord]:
        return self._closed + [g.peak for g in self._open]

    def top(self) -> list[AlertRecord]:
        ranked = sorted(self.groups(), key=lambda r: (-r.density, r.time))
        return ranked[: self.k]


@dataclass
class AlertRun:
    trace: list[tuple[int, float]]
    top: list[AlertRecord]
    peak_nnz: int
    records: int = 0
    peak_window: int = 0
    stats: dict = field(default_factory=dict)


def run_alert(
    events: Iterable[TimedEvent],
    dims,
    window: int,
    top_k: int = 10,
    *,
    dedup_jaccard: float = 0.5,
    on_step=None,
) -> AlertRun:
    """Feed a time-ordered stream through :class:`DenseAlert`.

    The trace holds one ``(time, density)`` pair per input event, taken after
    the event is applied.  ``on_step(alert, event)`` is called after each
    event (used for self-checks).
    """
    alert = DenseAlert(dims, window)
    top = TopK(top_k, window, dedup_jaccard)
    trace = []
    count = 0
    peak_window = 0
    for ev in events:
        for rec in alert.step(ev):
            top.add(rec)
            count += 1
        peak_window = max(peak_window, alert.window_size)
        trace.append((ev.time, alert.density))
        if on_step is not None:
            on_step(alert, ev)
    stats = alert.engine.stats
    return AlertRun(trace, top.top(), stats.peak_nnz, count, peak_window, vars(stats).copy())
