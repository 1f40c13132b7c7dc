"""Sparse N-way tensor with slice-level access paths.

Coordinates are 1-based, matching the event-file convention.  A slice is
addressed by a :class:`SliceIndex` ``(mode, coord)``; plain ``(mode, coord)``
tuples compare and hash identically, so either works as a lookup key.
"""

from __future__ import annotations

import array
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TOL = 1e-9

Entry = tuple[int, ...]


class TensorError(ValueError):
    """Raised on malformed tensor updates (bad coordinates, negative values)."""


class SliceIndex(NamedTuple):
    mode: int
    coord: int

    def __str__(self) -> str:
        return f"({self.mode},{self.coord})"


@dataclass(frozen=True)
class DenseSelection:
    """A set of slice indices together with the mass of the subtensor it spans."""

    slices: frozenset
    mass: float

    @property
    def density(self) -> float:
        if not self.slices:
            return 0.0
        return self.mass / len(self.slices)

    def contains_entry(self, entry: Entry) -> bool:
        s = self.slices
        return all((n, i) in s for n, i in enumerate(entry, 1))

    def __len__(self) -> int:
        return len(self.slices)


def close(a: float, b: float, tol: float = TOL) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


class SlotIndex:
    """Numpy mirror of the entries, grouped by slice, for vectorized scans.

    Every entry owns a slot holding its coordinates and value; each slice
    keeps an append-only array of its slots.  An evicted entry leaves its slot
    behind with value 0 until enough dead slots pile up to trigger a rebuild.
    """

    def __init__(self, order: int) -> None:
        self.order = order
        self.coords = np.zeros((64, order), dtype=np.intp)
        self.vals = np.zeros(64)
        self.slot: dict[Entry, int] = {}
        self.entry_at: list = []
        self.by_slice: dict[tuple[int, int], array.array] = {}
        self.dead = 0

    def copy(self) -> SlotIndex:
        t = SlotIndex(self.order)
        t.coords = self.coords.copy()
        t.vals = self.vals.copy()
        t.slot = dict(self.slot)
        t.entry_at = list(self.entry_at)
        t.by_slice = {q: array.array("q", a) for q, a in self.by_slice.items()}
        t.dead = self.dead
        return t

    def add(self, entry: Entry, value: float, slices) -> None:
        s = len(self.entry_at)
        if s == len(self.vals):
            self.coords = np.concatenate((self.coords, np.zeros_like(self.coords)))
            self.vals = np.concatenate((self.vals, np.zeros_like(self.vals)))
        self.coords[s] = entry
        self.vals[s] = value
        self.slot[entry] = s
        self.entry_at.append(entry)
        by_slice = self.by_slice
        for q in slices:
            a = by_slice.get(q)
            if a is None:
                by_slice[q] = array.array("q", (s,))
            else:
                a.append(s)

    def set(self, entry: Entry, value: float) -> None:
        self.vals[self.slot[entry]] = value

    def evict(self, entry: Entry, entry_slices: dict) -> None:
        s = self.slot.pop(entry)
        self.vals[s] = 0.0
        self.entry_at[s] = None
        self.dead += 1
        if self.dead > 1024 and self.dead > len(self.slot):
            self.rebuild(entry_slices)

    def rebuild(self, entry_slices: dict) -> None:
        vals = self.vals
        slot = self.slot
        live = [(e, float(vals[slot[e]])) for e in slot]
        self.__init__(self.order)
        for e, v in live:
            self.add(e, v, entry_slices[e])

    def slots_of(self, q) -> np.ndarray:
        a = self.by_slice.get(q)
        return np.frombuffer(a, dtype=np.int64) if a else np.zeros(0, dtype=np.int64)


class SparseTensor:
    """Non-negative sparse tensor storing, per slice, its entries and their sum.

    Every stored entry is strictly positive; an entry that reaches zero is
    evicted together with any slice bookkeeping that becomes empty.
    """

    def __init__(self, dims: Sequence[int]) -> None:
        if len(dims) < 2:
            raise TensorError(f"order must be >= 2, got {len(dims)}")
        if any(int(d) < 0 for d in dims):
            raise TensorError(f"dims must be non-negative, got {tuple(dims)}")
        self.dims = [int(d) for d in dims]
        self.order = len(self.dims)
        self.modes = range(1, self.order + 1)
        self.entries: dict[Entry, float] = {}
        self.slice_entries: dict[tuple[int, int], set[Entry]] = {}
        self.slice_sums: dict[tuple[int, int], float] = {}
        # entry -> its N slice indices, cached for the peeling hot loops
        self.entry_slices: dict[Entry, tuple[SliceIndex, ...]] = {}
        self.slots = SlotIndex(self.order)
        self.total_mass = 0.0
        self.removed: set[SliceIndex] = set()

    @classmethod
    def from_entries(cls, dims: Sequence[int], entries) -> SparseTensor:
        """Build a tensor from a mapping or an iterable of ``(coords, value)``."""
        t = cls(dims)
        items = entries.items() if hasattr(entries, "items") else entries
        for coords, value in items:
            if value:
                t.apply_delta(tuple(coords), value)
        return t

    def copy(self) -> SparseTensor:
        t = SparseTensor(self.dims)
        t.entries = dict(self.entries)
        t.slice_entries = {q: set(es) for q, es in self.slice_entries.items()}
        t.slice_sums = dict(self.slice_sums)
        t.entry_slices = dict(self.entry_slices)
        t.slots = self.slots.copy()
        t.total_mass = self.total_mass
        t.removed = set(self.removed)
        return t

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        dims = "x".join(map(str, self.dims))
        return f"SparseTensor({dims}, nnz={self.nnz}, mass={self.total_mass:g})"

    # -- slice universe ---------------------------------------------------

    def universe(self) -> list[SliceIndex]:
        """All live slice indices, in (mode, coord) order."""
        return [
            q
            for n, size in enumerate(self.dims, 1)
            for i in range(1, size + 1)
            if (q := SliceIndex(n, i)) not in self.removed
        ]

    def num_slices(self) -> int:
        return sum(self.dims) - len(self.removed)

    def has_slice(self, q) -> bool:
        mode, coord = q
        return 1 <= mode <= self.order and 1 <= coord <= self.dims[mode - 1] and (
            (mode, coord) not in self.removed
        )

    def slices_of(self, entry: Entry) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.modes, entry))

    def add_slice(self, mode: int) -> SliceIndex:
        if not 1 <= mode <= self.order:
            raise TensorError(f"mode {mode} out of range 1..{self.order}")
        self.dims[mode - 1] += 1
        return SliceIndex(mode, self.dims[mode - 1])

    def remove_slice(self, q) -> None:
        """Drop an (already empty) slice from the universe."""
        if not self.has_slice(q):
            raise TensorError(f"slice {tuple(q)} is not in the tensor")
        if self.slice_entries.get(tuple(q)):
            raise TensorError(f"slice {tuple(q)} still holds entries")
        self.removed.add(SliceIndex(*q))

    # -- updates ------------------------------------------------------------

    def check_entry(self, entry: Entry) -> None:
        if len(entry) != self.order:
            raise TensorError(
                f"entry {entry} has {len(entry)} coordinates, tensor order is {self.order}"
            )
        for n, (i, size) in enumerate(zip(entry, self.dims), 1):
            if not 1 <= i <= size:
                raise TensorError(f"coordinate {i} of mode {n} outside 1..{size}")
            if self.removed and (n, i) in self.removed:
                raise TensorError(f"slice ({n},{i}) has been removed")

    def apply_delta(self, entry: Entry, delta: float) -> float:
        """Add ``delta`` (either sign) to an entry and return its new value."""
        entry = tuple(int(i) for i in entry)
        self.check_entry(entry)
        old = self.entries.get(entry, 0.0)
        new = old + delta
        tol = TOL * max(1.0, abs(old), abs(delta))
        if new < -tol:
            raise TensorError(
                f"decrement of {entry} by {-delta:g} overshoots its value {old:g}"
            )
        if new <= tol:
            if entry not in self.entries:
                return 0.0
            del self.entries[entry]
            self.slots.evict(entry, self.entry_slices)
            for q in self.entry_slices.pop(entry):
                members = self.slice_entries[q]
                members.discard(entry)
                if members:
                    self.slice_sums[q] -= old
                else:
                    del self.slice_entries[q]
                    del self.slice_sums[q]
            self.total_mass -= old
            if not self.entries:
                self.total_mass = 0.0
            return 0.0
        self.entries[entry] = new
        if old == 0.0:
            slices = tuple(SliceIndex(n, i) for n, i in enumerate(entry, 1))
            self.entry_slices[entry] = slices
            self.slots.add(entry, new, slices)
            for q in slices:
                members = self.slice_entries.get(q)
                if members is None:
                    self.slice_entries[q] = {entry}
                    self.slice_sums[q] = new
                else:
                    members.add(entry)
                    self.slice_sums[q] += new
        else:
            self.slots.set(entry, new)
            for q in self.entry_slices[entry]:
                self.slice_sums[q] += delta
        self.total_mass += delta
        return new

    # -- subtensor queries ------------------------------------------------

    def _restricted_entries(self, s) -> Iterator[Entry]:
        """Entries whose N slice indices all lie in ``s``."""
        # Every surviving entry shows up in the selected slices of any one mode,
        # so walk the mode with the fewest selected entries.
        by_mode: dict[int, list] = {}
        for q in s:
            by_mode.setdefault(q[0], []).append(q)
        if len(by_mode) < self.order:
            return
        best = min(
            by_mode.values(),
            key=lambda qs: sum(len(self.slice_entries.get(tuple(q), ())) for q in qs),
        )
        modes = self.modes
        for q in best:
            for e in self.slice_entries.get(tuple(q), ()):
                if all(x in s for x in zip(modes, e)):
                    yield e

    def mass_of(self, s: Iterable) -> float:
        s = _as_key_set(s)
        return sum(self.entries[e] for e in self._restricted_entries(s))

    def slice_sum_in(self, s: Iterable, q) -> float:
        s = _as_key_set(s)
        q = tuple(q)
        if q not in s:
            raise TensorError(f"slice {q} is not in the selection")
        modes = self.modes
        return sum(
            self.entries[e]
            for e in self.slice_entries.get(q, ())
            if all(x in s for x in zip(modes, e))
        )

    def density_of(self, s: Iterable) -> float:
        s = _as_key_set(s)
        if not s:
            raise TensorError("density of an empty selection is undefined")
        return self.mass_of(s) / len(s)

    def subtensor(self, s: Iterable) -> dict[Entry, float]:
        """Materialize the entries of the subtensor spanned by ``s``."""
        s = _as_key_set(s)
        return {e: self.entries[e] for e in self._restricted_entries(s)}

    def selection(self, s: Iterable) -> DenseSelection:
        s = frozenset(SliceIndex(*q) for q in s)
        return DenseSelection(s, self.mass_of(s))


def _as_key_set(s) -> frozenset | set:
    if isinstance(s, (set, frozenset)):
        return s
    return {tuple(q) for q in s}
