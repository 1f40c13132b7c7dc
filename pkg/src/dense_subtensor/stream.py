"""Incremental maintenance of a D-ordering and a dense subtensor.

:class:`DenseStream` keeps three things consistent under entry increments,
decrements and slice additions/removals:

* ``ordering`` stays a D-ordering of the current tensor;
* ``selection`` always has density at least ``rho_opt / N``;
* ``selection.mass`` matches the tensor.

Each update re-peels only a window ``[lo, hi]`` of the ordering and reruns
the linear suffix scan only when the update can matter.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from .ordering import DOrdering, build_ordering, reorder_region
from .static import find_slices
from .tensor import TOL, DenseSelection, SliceIndex, SparseTensor, TensorError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReorderPlan:
    lo: int
    hi: int
    first: tuple  # earliest slice of the changed entry in the ordering
    region: tuple
    c_seed: float

    def __len__(self) -> int:
        return max(0, self.hi - self.lo + 1)


@dataclass
class StreamStats:
    increments: int = 0
    decrements: int = 0
    rescans: int = 0
    replacements: int = 0
    reordered: int = 0
    gate_violations: int = 0
    peak_nnz: int = 0


def _first_slice(st: DOrdering, entry) -> tuple[tuple, int]:
    pos = st.pos
    best = None
    best_pos = len(st.pi)
    for q in enumerate(entry, 1):
        p = pos[q]
        if p < best_pos:
            best, best_pos = q, p
    return best, best_pos


def _first_at_least(values: np.ndarray, start: int, threshold: float) -> int | None:
    """Smallest position ``>= start`` whose value is ``>= threshold``."""
    tail = values[start:]
    if not len(tail):
        return None
    mask = tail >= threshold
    k = int(mask.argmax())
    return start + k if mask[k] else None


def plan_increment(st: DOrdering, entry, delta: float) -> ReorderPlan:
    """Window to re-peel after ``entry`` grew by ``delta``.

    Reads the cached ``d_at`` of the ordering as it was before the update.
    """
    if not delta > 0:
        raise ValueError(f"increment must be positive, got {delta}")
    q_f, p = _first_slice(st, entry)
    stop = _first_at_least(st.d_at, p + 1, float(st.d_at[p]) + delta)
    hi = len(st.pi) - 1 if stop is None else stop - 1
    seed = float(st.c_at[p - 1]) if p > 0 else 0.0
    return ReorderPlan(p, hi, q_f, tuple(st.pi[p : hi + 1]), seed)


def plan_decrement(st: DOrdering, entry, delta: float) -> ReorderPlan:
    """Window to re-peel after ``entry`` shrank by ``delta``."""
    if not delta > 0:
        raise ValueError(f"decrement must be positive, got {delta}")
    q_f, p = _first_slice(st, entry)
    c_f = float(st.c_at[p])
    mask = st.d_at[: p + 1] > c_f - delta
    k = int(mask.argmax())
    lo = k if mask[k] else p
    stop = _first_at_least(st.d_at, p + 1, c_f)
    hi = len(st.pi) - 1 if stop is None else stop - 1
    seed = float(st.c_at[lo - 1]) if lo > 0 else 0.0
    return ReorderPlan(lo, hi, q_f, tuple(st.pi[lo : hi + 1]), seed)


@dataclass
class DenseStream:
    """Dense-subtensor state machine driven by single-entry changes.

    Args:
        tensor: Starting tensor; it is owned (and mutated) by the stream.
        check_gate: When True, every skipped rescan is double-checked by
            running the suffix scan anyway; disagreements are counted in
            ``stats.gate_violations``.
    """

    tensor: SparseTensor
    check_gate: bool = False
    ordering: DOrdering = field(init=False)
    selection: DenseSelection = field(init=False)
    stats: StreamStats = field(init=False, default_factory=StreamStats)

    def __post_init__(self) -> None:
        self.ordering = build_ordering(self.tensor)
        slices, mass = find_slices(self.ordering)
        self.selection = DenseSelection(slices, mass)
        self.stats.peak_nnz = self.tensor.nnz

    @classmethod
    def empty(cls, dims, **kwargs) -> DenseStream:
        return cls(SparseTensor(dims), **kwargs)

    @property
    def density(self) -> float:
        return self.selection.density

    def snapshot(self) -> DenseStream:
        return copy.deepcopy(self)

    def _rescan(self) -> None:
        slices, mass = find_slices(self.ordering)
        self.stats.rescans += 1
        if slices != self.selection.slices:
            self.stats.replacements += 1
            self.selection = DenseSelection(slices, mass)
        elif mass != self.selection.mass:
            self.selection = DenseSelection(self.selection.slices, mass)

    def increment(self, entry, delta: float) -> DenseSelection:
        entry = tuple(entry)
        if not delta > 0:
            raise ValueError(f"increment must be positive, got {delta}")
        self.tensor.apply_delta(entry, delta)
        plan = plan_increment(self.ordering, entry, delta)
        c_max = reorder_region(self.tensor, self.ordering, plan.lo, plan.hi)
        self.stats.increments += 1
        self.stats.reordered += len(plan)
        if self.tensor.nnz > self.stats.peak_nnz:
            self.stats.peak_nnz = self.tensor.nnz
        sel = self.selection
        if c_max >= sel.density:
            self._rescan()
        else:
            if sel.contains_entry(entry):
                self.selection = DenseSelection(sel.slices, sel.mass + delta)
            if self.check_gate:
                self._audit_gate()
        return self.selection

    def decrement(self, entry, delta: float) -> DenseSelection:
        entry = tuple(entry)
        if not delta > 0:
            raise ValueError(f"decrement must be positive, got {delta}")
        self.tensor.apply_delta(entry, -delta)
        plan = plan_decrement(self.ordering, entry, delta)
        reorder_region(self.tensor, self.ordering, plan.lo, plan.hi)
        self.stats.decrements += 1
        self.stats.reordered += len(plan)
        if self.selection.contains_entry(entry):
            self._rescan()
        return self.selection

    def apply(self, entry, delta: float, sign: int = 1) -> DenseSelection:
        if sign >= 0:
            return self.increment(entry, delta)
        return self.decrement(entry, delta)

    def _audit_gate(self) -> None:
        slices, mass = find_slices(self.ordering)
        best = mass / len(slices) if slices else 0.0
        if best > self.selection.density + TOL * max(1.0, best):
            self.stats.gate_violations += 1
            logger.debug("skipped rescan would have raised density to %g", best)

    def add_slice(self, mode: int) -> SliceIndex:
        """Grow ``mode`` by one coordinate; the new empty slice goes first."""
        q = self.tensor.add_slice(mode)
        self.ordering.insert_front(q)
        return q

    def remove_slice(self, q) -> None:
        """Empty a slice through decrements, then drop it from the universe."""
        q = SliceIndex(*q)
        if not self.tensor.has_slice(q):
            raise TensorError(f"slice {tuple(q)} is not in the tensor")
        for e in sorted(self.tensor.slice_entries.get(q, ())):
            self.decrement(e, self.tensor.entries[e])
        self.tensor.remove_slice(q)
        self.ordering.remove(q)
        if q in self.selection.slices:
            slices, mass = find_slices(self.ordering)
            self.selection = DenseSelection(slices, mass)
