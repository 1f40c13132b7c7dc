"""Event files: one ``time,i_1,...,i_N,delta[,sign]`` CSV line per change.

An optional header comment fixes the shape::

    # order=3 dims=3,3,2 value=count

Other ``#`` lines and blank lines are ignored.  Coordinates are 1-based,
``delta`` is a positive magnitude and ``sign`` is ``+`` (default) or ``-``.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .alert import TimedEvent

_SIGNS = {"+": 1, "-": -1, "−": -1}
_HEADER = re.compile(r"^#\s*order\s*=")


class IngestError(ValueError):
    """Malformed or inconsistent event file; the message names the line."""


@dataclass(frozen=True)
class StreamFileHeader:
    order: int
    dims: tuple[int, ...]
    value: str = "count"

    def __post_init__(self) -> None:
        if self.order < 2:
            raise IngestError(f"order must be >= 2, got {self.order}")
        if len(self.dims) != self.order:
            raise IngestError(f"{len(self.dims)} dims given for order {self.order}")
        if any(d <= 0 for d in self.dims):
            raise IngestError(f"dims must be positive, got {self.dims}")

    def render(self) -> str:
        dims = ",".join(map(str, self.dims))
        return f"# order={self.order} dims={dims} value={self.value}"

    @classmethod
    def parse(cls, line: str) -> StreamFileHeader:
        fields = dict(tok.split("=", 1) for tok in line.lstrip("#").split() if "=" in tok)
        try:
            order = int(fields["order"])
            dims = tuple(int(d) for d in fields["dims"].split(","))
        except (KeyError, ValueError) as exc:
            raise IngestError(f"bad header {line.strip()!r}") from exc
        return cls(order, dims, fields.get("value", "count"))


@dataclass
class EventFile:
    header: StreamFileHeader
    events: list[TimedEvent]


def _parse_line(text: str, order: int | None) -> tuple[TimedEvent, int]:
    parts = [p.strip() for p in text.split(",")]
    sign = 1
    if parts[-1] in _SIGNS:
        sign = _SIGNS[parts.pop()]
    n = len(parts) - 2
    if n < 2:
        raise ValueError(f"expected time, >= 2 coordinates and a delta, got {len(parts)} fields")
    if order is not None and n != order:
        raise ValueError(f"expected {order} coordinates, got {n}")
    time = int(parts[0])
    coords = tuple(int(p) for p in parts[1:-1])
    delta = float(parts[-1])
    if any(i < 1 for i in coords):
        raise ValueError("coordinates are 1-based")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {parts[-1]}")
    return TimedEvent(time, coords, delta, sign), n


def parse_events(
    lines: Iterable[str],
    *,
    source: str = "<events>",
    order: int | None = None,
    dims: Sequence[int] | None = None,
    sort: bool = False,
) -> EventFile:
    """Parse event lines; explicit ``order``/``dims`` must agree with any header."""
    header = None
    events: list[TimedEvent] = []
    line_of: list[int] = []
    for lineno, raw in enumerate(lines, 1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            if _HEADER.match(text):
                if header is not None or events:
                    raise IngestError(f"{source}:{lineno}: header must come first and only once")
                header = StreamFileHeader.parse(text)
            continue
        want = order if order is not None else (header.order if header else None)
        if want is None and events:
            want = len(events[0].entry)
        try:
            ev, _ = _parse_line(text, want)
        except ValueError as exc:
            raise IngestError(f"{source}:{lineno}: {exc}") from None
        if events and ev.time < events[-1].time and not sort:
            raise IngestError(
                f"{source}:{lineno}: time {ev.time} is earlier than {events[-1].time}"
                " (use --sort to reorder)"
            )
        events.append(ev)
        line_of.append(lineno)

    if header is not None:
        if order is not None and order != header.order:
            raise IngestError(f"{source}: header order {header.order} conflicts with {order}")
        if dims is not None and tuple(dims) != header.dims:
            raise IngestError(f"{source}: header dims {header.dims} conflict with {tuple(dims)}")
    elif dims is not None:
        header = StreamFileHeader(len(dims), tuple(int(d) for d in dims))
    else:
        if not events:
            raise IngestError(f"{source}: no events and no header to fix the shape")
        n = len(events[0].entry)
        if order is not None and n != order:
            raise IngestError(f"{source}: events have {n} coordinates, expected {order}")
        inferred = tuple(max(ev.entry[k] for ev in events) for k in range(n))
        header = StreamFileHeader(n, inferred)

    for ev, lineno in zip(events, line_of):
        for k, (i, size) in enumerate(zip(ev.entry, header.dims), 1):
            if i > size:
                raise IngestError(f"{source}:{lineno}: coordinate {i} of mode {k} exceeds {size}")
    if sort:
        events.sort(key=lambda ev: ev.time)
    return EventFile(header, events)


def ingest(
    path: str | Path,
    *,
    order: int | None = None,
    dims: Sequence[int] | None = None,
    sort: bool = False,
) -> EventFile:
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        return parse_events(fh, source=str(path), order=order, dims=dims, sort=sort)


def format_event(ev: TimedEvent) -> str:
    delta = int(ev.delta) if float(ev.delta).is_integer() else repr(float(ev.delta))
    fields = [str(ev.time), *map(str, ev.entry), str(delta)]
    if ev.sign < 0:
        fields.append("-")
    return ",".join(fields)


def write_events(path: str | Path, header: StreamFileHeader, events: Iterable[TimedEvent]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(header.render() + "\n")
        for ev in events:
            fh.write(format_event(ev) + "\n")
