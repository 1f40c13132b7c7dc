"""Synthetic streams with injected lock-step blocks, and detection metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alert import AlertRecord, TimedEvent
from .tensor import SliceIndex


@dataclass(frozen=True)
class InjectionSpec:
    """Background stream plus ``num_blocks`` dense ``k x k x 1 x ... x 1`` blocks.

    Blocks span ``k`` coordinates of the first two modes and a single
    coordinate of every other mode; ``time_mode`` (1-based) carries the tick.
    Block side lengths are spread evenly over ``size_range``.
    """

    dims: tuple[int, ...] = (200, 200, 50, 5)
    num_blocks: int = 10
    size_range: tuple[int, int] = (3, 12)
    block_value: float = 1.0
    background_events: int = 50_000
    time_mode: int = 3

    def __post_init__(self) -> None:
        dims = self.dims
        if len(dims) < 3:
            raise ValueError("injection needs at least two block modes plus a time mode")
        if not 3 <= self.time_mode <= len(dims):
            raise ValueError(f"time_mode must lie in 3..{len(dims)}")
        lo, hi = self.size_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad size range {self.size_range}")
        if hi > min(dims[0], dims[1]):
            raise ValueError(f"block side {hi} exceeds dims {dims[:2]}")
        if self.num_blocks < 0 or self.background_events < 0:
            raise ValueError("counts must be non-negative")
        if self.block_value <= 0:
            raise ValueError("block value must be positive")

    @property
    def horizon(self) -> int:
        return self.dims[self.time_mode - 1]

    def block_sizes(self) -> list[int]:
        if not self.num_blocks:
            return []
        lo, hi = self.size_range
        return [int(k) for k in np.rint(np.linspace(lo, hi, self.num_blocks))]


@dataclass(frozen=True)
class InjectedBlock:
    block: int
    time: int
    size: tuple[int, ...]
    slices: frozenset
    value: float

    def to_json(self) -> dict:
        return {
            "block": self.block,
            "time": self.time,
            "size": list(self.size),
            "value": self.value,
            "slices": sorted([q.mode, q.coord] for q in self.slices),
        }

    @classmethod
    def from_json(cls, rec: dict) -> InjectedBlock:
        return cls(
            rec["block"],
            rec["time"],
            tuple(rec["size"]),
            frozenset(SliceIndex(m, c) for m, c in rec["slices"]),
            rec["value"],
        )


def generate_injected(spec: InjectionSpec, seed: int = 0):
    """Return ``(events, blocks)`` for a background stream with injected blocks.

    Background events pick every coordinate uniformly; the time-mode
    coordinate doubles as the event tick.  Each block is emitted as one
    contiguous burst at a uniformly random offset inside its tick.
    """
    rng = np.random.default_rng(seed)
    dims = spec.dims
    order = len(dims)
    tm = spec.time_mode - 1

    coords = np.column_stack([rng.integers(1, d + 1, spec.background_events) for d in dims])
    per_tick: dict[int, list] = {t: [] for t in range(1, spec.horizon + 1)}
    for row in coords.tolist():
        per_tick[row[tm]].append(tuple(row))
    for t in per_tick:
        rng.shuffle(per_tick[t])

    sizes = spec.block_sizes()
    replace_ticks = len(sizes) > spec.horizon
    ticks = rng.choice(np.arange(1, spec.horizon + 1), size=len(sizes), replace=replace_ticks)
    blocks = []
    bursts: dict[int, list] = {}
    for b, (k, tick) in enumerate(zip(sizes, ticks.tolist())):
        users = np.sort(rng.choice(np.arange(1, dims[0] + 1), size=k, replace=False)).tolist()
        items = np.sort(rng.choice(np.arange(1, dims[1] + 1), size=k, replace=False)).tolist()
        fixed = [int(rng.integers(1, d + 1)) for d in dims[2:]]
        fixed[tm - 2] = tick
        cells = [(u, i, *fixed) for u in users for i in items]
        slices = frozenset(
            [SliceIndex(1, u) for u in users]
            + [SliceIndex(2, i) for i in items]
            + [SliceIndex(n, c) for n, c in enumerate(fixed, 3)]
        )
        size = (k, k) + (1,) * (order - 2)
        blocks.append(InjectedBlock(b, tick, size, slices, spec.block_value))
        offset = int(rng.integers(0, len(per_tick[tick]) + 1))
        bursts.setdefault(tick, []).append((offset, cells))

    events = []
    for t in range(1, spec.horizon + 1):
        tick = [(c, 1.0) for c in per_tick[t]]
        # Later bursts first so earlier offsets stay valid.
        for offset, cells in sorted(bursts.get(t, []), key=lambda oc: -oc[0]):
            tick[offset:offset] = [(c, spec.block_value) for c in cells]
        events.extend(TimedEvent(t, c, v) for c, v in tick)
    return events, blocks


def is_detected(block: InjectedBlock, rec: AlertRecord, max_ratio: float = 10.0) -> bool:
    """Record covers at least half the block's slices and is not over 10x larger."""
    covered = len(block.slices & rec.slices)
    return 2 * covered >= len(block.slices) and len(rec.slices) <= max_ratio * len(block.slices)


def score_recall(alerts: list[AlertRecord], blocks: list[InjectedBlock]) -> float:
    if not blocks:
        return 0.0
    hit = sum(any(is_detected(b, r) for r in alerts) for b in blocks)
    return hit / len(blocks)


def powerlaw_stream(
    dims, n_events: int, exponent: float = 1.5, seed: int = 0, *, distinct: bool = True
) -> list[TimedEvent]:
    """Unit increments whose per-mode coordinates follow a Zipf-like law.

    With ``distinct=True`` every event creates a new non-zero entry, so the
    tensor holds exactly ``i`` non-zeros after ``i`` events.
    """
    rng = np.random.default_rng(seed)
    probs = []
    for d in dims:
        w = np.arange(1, d + 1, dtype=float) ** -exponent
        probs.append(w / w.sum())
    cells = 1
    for d in dims:
        cells *= d
    if distinct and n_events > cells:
        raise ValueError("more distinct events than tensor cells")
    seen = set()
    events = []
    batch = max(1024, n_events // 4)
    while len(events) < n_events:
        draw = np.column_stack([rng.choice(d, size=batch, p=p) + 1 for d, p in zip(dims, probs)])
        for row in map(tuple, draw.tolist()):
            if distinct:
                if row in seen:
                    continue
                seen.add(row)
            events.append(TimedEvent(len(events), row, 1.0))
            if len(events) == n_events:
                break
    return events


def event_auc(scores, labels) -> float:
    """Area under the ROC curve (Mann-Whitney statistic, ties count half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if not n_pos or not n_neg:
        raise ValueError("AUC needs both positive and negative labels")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
