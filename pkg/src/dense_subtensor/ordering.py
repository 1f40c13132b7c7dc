"""D-orderings: peeling orders of the slice universe by minimum slice sum.

Positions are 0-based.  ``d_at[j]`` is the slice sum of ``pi[j]`` inside the
subtensor formed by positions ``j..end``; ``c_at[j]`` is the running maximum
of ``d_at[0..j]``.  Both are numpy arrays so that the O(|Q|) scans done by the
streaming planners stay vectorized.
"""

from __future__ import annotations

import functools
import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .tensor import TOL, SliceIndex, SparseTensor, close


class PeelHeap:
    """Min-heap over slices keyed by residual slice sum.

    Decrease-key is lazy: the new key is pushed and stale heap records are
    skipped on pop.  Ties pop in (mode, coord) order.
    """

    __slots__ = ("_heap", "_keys", "_items")

    def __init__(self, keys: dict | None = None) -> None:
        self._keys = dict(keys) if keys else {}
        # Equal-but-distinct key objects (plain tuples vs SliceIndex) may be
        # used for updates; pop always hands back the object first inserted.
        self._items = {q: q for q in self._keys}
        self._heap = [(k, q) for q, k in self._keys.items()]
        heapq.heapify(self._heap)

    def __len__(self) -> int:
        return len(self._keys)

    def __bool__(self) -> bool:
        return bool(self._keys)

    def __contains__(self, q) -> bool:
        return q in self._keys

    def key(self, q) -> float:
        return self._keys[q]

    def push(self, q, key: float) -> None:
        self._items.setdefault(q, q)
        self._keys[q] = key
        heapq.heappush(self._heap, (key, q))

    def decrease(self, q, amount: float) -> None:
        key = self._keys[q] - amount
        self._keys[q] = key
        heapq.heappush(self._heap, (key, q))

    def pop(self):
        heap, keys = self._heap, self._keys
        while heap:
            key, q = heapq.heappop(heap)
            if keys.get(q) == key:
                del keys[q]
                return self._items.pop(q), key
        raise IndexError("pop from empty PeelHeap")


@dataclass
class DOrdering:
    pi: list
    pos: dict
    d_at: np.ndarray
    c_at: np.ndarray

    def __len__(self) -> int:
        return len(self.pi)

    @property
    def d(self) -> dict:
        return dict(zip(self.pi, self.d_at.tolist()))

    @property
    def c(self) -> dict:
        return dict(zip(self.pi, self.c_at.tolist()))

    def d_of(self, q) -> float:
        return float(self.d_at[self.pos[q]])

    def c_of(self, q) -> float:
        return float(self.c_at[self.pos[q]])

    def copy(self) -> DOrdering:
        return DOrdering(list(self.pi), dict(self.pos), self.d_at.copy(), self.c_at.copy())

    def insert_front(self, q: SliceIndex) -> None:
        """Place a new zero-sum slice at position 0."""
        self.pi.insert(0, q)
        self.pos = {r: j for j, r in enumerate(self.pi)}
        self.d_at = np.insert(self.d_at, 0, 0.0)
        self.c_at = np.insert(self.c_at, 0, 0.0)

    def remove(self, q) -> None:
        j = self.pos.pop(q)
        del self.pi[j]
        for r in self.pi[j:]:
            self.pos[r] -= 1
        self.d_at = np.delete(self.d_at, j)
        self.c_at = np.maximum.accumulate(self.d_at) if len(self.d_at) else self.d_at.copy()


def build_ordering(tensor: SparseTensor) -> DOrdering:
    """Peel the whole universe, always removing the minimum-sum slice."""
    pi = tensor.universe()
    n = len(pi)
    st = DOrdering(pi, {q: j for j, q in enumerate(pi)}, np.zeros(n), np.zeros(n))
    reorder_region(tensor, st, 0, n - 1)
    return st


# Windows up to this many slices are peeled by linear scans instead of a heap.
_SCAN_MAX = 64
# Regions whose slices hold at least this many entries are filtered in numpy.
_VECTOR_MIN = 256


def _flat_ids(tensor: SparseTensor, slices) -> tuple[np.ndarray, np.ndarray]:
    """Offsets per mode and flat ids ``offset[mode] + coord`` of ``slices``."""
    dims = np.asarray(tensor.dims, dtype=np.intp)
    offset = np.concatenate(([0], np.cumsum(dims + 1)[:-1]))
    k = len(slices)
    mc = np.fromiter(itertools.chain.from_iterable(slices), dtype=np.intp, count=2 * k)
    mc = mc.reshape(k, 2)
    return offset, offset[mc[:, 0] - 1] + mc[:, 1]


def _suffix_members(tensor: SparseTensor, pi: list, lo: int, region: list) -> dict:
    """Entries of each region slice whose slices all sit at positions >= lo."""
    n = len(pi)
    # outside[f] is True for flat slice ids at positions < lo; mark whichever
    # side of lo is shorter.
    if lo <= n - lo:
        offset, ids = _flat_ids(tensor, pi[:lo])
        outside = np.zeros(int(offset[-1]) + tensor.dims[-1] + 1, dtype=bool)
        outside[ids] = True
    else:
        offset, ids = _flat_ids(tensor, pi[lo:])
        outside = np.ones(int(offset[-1]) + tensor.dims[-1] + 1, dtype=bool)
        outside[ids] = False
    slots = tensor.slots
    per_slice = [slots.slots_of(r) for r in region]
    s = np.concatenate(per_slice)
    group = np.repeat(np.arange(len(region)), [len(a) for a in per_slice])
    del per_slice  # release the buffer views so the slot arrays can grow again
    ok = (slots.vals[s] > 0) & ~outside[slots.coords[s] + offset].any(axis=1)
    entry_at = slots.entry_at
    members: dict = {r: [] for r in region}
    lists = list(members.values())
    for g, k in zip(group[ok].tolist(), s[ok].tolist()):
        lists[g].append(entry_at[k])
    return members


def reorder_region(tensor: SparseTensor, st: DOrdering, lo: int, hi: int) -> float:
    """Re-peel positions ``lo..hi`` (inclusive) in place.

    Candidates are restricted to the slices currently at those positions,
    while slice sums are taken in the subtensor of all slices at positions
    ``>= lo``.  Positions outside the window keep their slices; ``c_at`` is
    refreshed from ``lo`` to the end.  Returns ``c_at[hi]`` (the running max
    after the window), or the seed value when the window is empty.
    """
    n = len(st.pi)
    if lo < 0 or hi >= n:
        raise ValueError(f"region [{lo}, {hi}] outside positions 0..{n - 1}")
    c_seed = float(st.c_at[lo - 1]) if lo > 0 else 0.0
    if lo > hi:
        return c_seed

    pi, pos, d_at, c_at = st.pi, st.pos, st.d_at, st.c_at
    entries, slice_entries = tensor.entries, tensor.slice_entries
    entry_slices = tensor.entry_slices
    heappush, heappop = heapq.heappush, heapq.heappop
    region = pi[lo : hi + 1]

    # members: entries of each region slice that lie in the suffix from lo;
    # keys: their residual sums; alive: suffix entries not yet peeled away.
    empty: frozenset = frozenset()
    members = {}
    if lo <= 2 * len(region):
        # Short prefix: the entries outside the suffix are exactly those
        # touching a prefix slice, so set algebra does the filtering.
        dead = set().union(*[slice_entries.get(q, empty) for q in pi[:lo]]) if lo else empty
        for r in region:
            es = slice_entries.get(r, empty)
            members[r] = es - dead if dead and es else es
    elif sum(len(slice_entries.get(r, empty)) for r in region) >= _VECTOR_MIN:
        members = _suffix_members(tensor, pi, lo, region)
    else:
        outside = set(pi[:lo]).isdisjoint
        slices_of = entry_slices.__getitem__
        for r in region:
            es = slice_entries.get(r, empty)
            members[r] = list(itertools.compress(es, map(outside, map(slices_of, es))))
    getv = entries.__getitem__
    keys = {r: sum(map(getv, es), 0.0) for r, es in members.items()}
    alive = dict.fromkeys(itertools.chain.from_iterable(members.values()), True)

    pop_alive = alive.pop
    cmax = c_seed
    j = lo
    if len(keys) <= _SCAN_MAX:
        # Small windows: a linear argmin over (key, slice) pairs beats heap
        # churn and breaks ties exactly like the heap does.
        while keys:
            key, q = min(zip(keys.values(), keys))
            del keys[q]
            pi[j] = q
            pos[q] = j
            d_at[j] = key
            if key > cmax:
                cmax = key
            c_at[j] = cmax
            j += 1
            for e in members[q]:
                if pop_alive(e, False):
                    v = entries[e]
                    for x in entry_slices[e]:
                        k = keys.get(x)
                        if k is not None:
                            keys[x] = k - v
    else:
        heap = [(k, r) for r, k in keys.items()]
        heapq.heapify(heap)
        while keys:
            key, q = heappop(heap)
            if keys.get(q) != key:
                continue
            del keys[q]
            pi[j] = q
            pos[q] = j
            d_at[j] = key
            if key > cmax:
                cmax = key
            c_at[j] = cmax
            j += 1
            for e in members[q]:
                if pop_alive(e, False):
                    v = entries[e]
                    for x in entry_slices[e]:
                        k = keys.get(x)
                        if k is not None:
                            k -= v
                            keys[x] = k
                            heappush(heap, (k, x))

    if hi + 1 < n:
        tail = np.maximum.accumulate(d_at[hi + 1 :])
        np.maximum(tail, cmax, out=c_at[hi + 1 :])
    return cmax


@dataclass(frozen=True)
class Verification:
    ok: bool
    violation: str | None = None
    position: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def verify(tensor: SparseTensor, st: DOrdering, tol: float = TOL) -> Verification:
    """Check every D-ordering invariant of ``st`` against ``tensor`` from scratch."""
    pi, pos = st.pi, st.pos
    n = len(pi)
    if n != tensor.num_slices():
        return Verification(False, "ordering does not cover the slice universe")
    if len(st.d_at) != n or len(st.c_at) != n:
        return Verification(False, "d/c arrays do not match the ordering length")
    for j, q in enumerate(pi):
        if pos.get(q) != j:
            return Verification(False, f"pos[{q}] = {pos.get(q)} but pi[{j}] = {q}", j)
    if len(pos) != n:
        return Verification(False, "pos has stray keys")
    # pi is now known to be duplicate-free; with the right length it covers
    # the universe exactly when every member is a live slice.  Slices are
    # flattened to offset[mode] + coord to vectorize the checks.
    nnz = tensor.nnz
    order = tensor.order
    dims = np.asarray(tensor.dims, dtype=np.intp)
    offset = np.concatenate(([0], np.cumsum(dims + 1)[:-1]))
    pq = np.fromiter(itertools.chain.from_iterable(pi), dtype=np.intp, count=2 * n).reshape(n, 2)
    modes, coords_q = pq[:, 0], pq[:, 1]
    valid = (modes >= 1) & (modes <= order)
    valid[valid] &= (coords_q[valid] >= 1) & (coords_q[valid] <= dims[modes[valid] - 1])
    if not valid.all() or (tensor.removed and not tensor.removed.isdisjoint(pi)):
        j = int(np.argmin(valid)) if not valid.all() else next(
            j for j, q in enumerate(pi) if q in tensor.removed
        )
        return Verification(False, f"pi[{j}] = {pi[j]} is not a slice of the tensor", j)
    table = np.zeros(int(offset[-1] + dims[-1] + 1), dtype=np.intp)
    table[offset[modes - 1] + coords_q] = np.arange(n)

    # An entry lies in the suffix subtensor of q exactly when q is the entry's
    # earliest slice, so suffix slice sums group entries by their first slice.
    # cols[k, m] = position of the mode-m slice of entry k
    flat_coords = itertools.chain.from_iterable(tensor.entries)
    coords = np.fromiter(flat_coords, dtype=np.intp, count=nnz * order).reshape(nnz, order)
    cols = table[coords + offset]
    vals = np.fromiter(tensor.entries.values(), dtype=float, count=nnz)
    first = cols.min(axis=1) if nnz else np.zeros(0, dtype=np.intp)
    true_d = np.bincount(first, weights=vals, minlength=n).astype(float)
    true_c = np.maximum.accumulate(true_d) if n else true_d

    for name, got, want in (("d", st.d_at, true_d), ("c", st.c_at, true_c)):
        bad = np.abs(got - want) > tol * np.maximum(1.0, np.maximum(np.abs(got), np.abs(want)))
        if bad.any():
            j = int(bad.argmax())
            return Verification(
                False,
                f"{name} at position {j} ({pi[j]}) is {got[j]:g}, expected {want[j]:g}",
                j,
            )

    if n <= _DENSE_REPLAY_MAX:
        j = _dense_replay(n, cols, first, vals, tol)
    else:
        j = _heap_replay(tensor, st, first, tol)
    if j is not None:
        msg = f"position {j} ({pi[j]}) does not have the minimum residual sum"
        return Verification(False, msg, j)
    return Verification(True)


_DENSE_REPLAY_MAX = 1024


@functools.lru_cache(maxsize=8)
def _peeled_mask(n: int) -> np.ndarray:
    return np.triu(np.ones((n, n), dtype=bool), 1)


def _dense_replay(n, cols, first, vals, tol) -> int | None:
    """First position whose slice is not a minimum-residual slice, or None.

    ``res[r, j]`` is the residual sum of the slice at position ``r`` once
    positions ``< j`` are peeled: the mass of its entries whose first
    position is ``>= j``.
    """
    if n == 0:
        return None
    order = cols.shape[1]
    flat = cols.ravel() * n + np.repeat(first, order)
    res = np.bincount(flat, weights=np.repeat(vals, order), minlength=n * n)
    res = res.astype(float, copy=False).reshape(n, n)
    res = np.cumsum(res[:, ::-1], axis=1)[:, ::-1]
    res[_peeled_mask(n)] = np.inf  # slices already peeled at step j
    low = res.min(axis=0)
    mine = np.diagonal(res)
    bad = mine > low + tol * np.maximum(1.0, np.abs(low))
    return int(bad.argmax()) if bad.any() else None


def _heap_replay(tensor: SparseTensor, st: DOrdering, first, tol) -> int | None:
    pi = st.pi
    eslices = tensor.entry_slices
    first_of = dict(zip(tensor.entries, first.tolist()))
    cur = {q: tensor.slice_sums.get(q, 0.0) for q in pi}
    heap = [(v, q) for q, v in cur.items()]
    heapq.heapify(heap)
    for j, q in enumerate(pi):
        while heap and (heap[0][1] not in cur or cur[heap[0][1]] != heap[0][0]):
            heapq.heappop(heap)
        low = heap[0][0]
        if cur.pop(q) > low + tol * max(1.0, abs(low)):
            return j
        for e in tensor.slice_entries.get(q, ()):
            if first_of[e] != j:
                continue
            v = tensor.entries[e]
            for x in eslices[e]:
                if x in cur:
                    cur[x] -= v
                    heapq.heappush(heap, (cur[x], x))
    return None
