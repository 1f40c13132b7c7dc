"""Ground-truth engines used to check the fast paths.

Nothing here touches the peeling code: the densest subtensor is found by
exhaustive enumeration, and suffix sums are recomputed straight from the
definition via :meth:`SparseTensor.slice_sum_in`.
"""

from __future__ import annotations

import numpy as np

from .ordering import DOrdering
from .tensor import DenseSelection, SparseTensor

MAX_SLICES = 24


def _popcount(n_bits: int) -> np.ndarray:
    counts = np.zeros(1 << n_bits, dtype=np.int64)
    for i in range(n_bits):
        counts.reshape(-1, 2, 1 << i)[:, 1, :] += 1
    return counts


def brute_force_densest(
    tensor: SparseTensor, *, prune: bool = False, max_slices: int = MAX_SLICES
) -> DenseSelection:
    """Exact densest subtensor over every nonempty subset of slices.

    Subset masses come from a subset-sum (zeta) transform: each entry is
    dropped into the bitmask of its N slices, then every mask accumulates the
    mass of all masks it contains.

    With ``prune=True`` only slices holding at least one entry are
    enumerated; dropping an empty slice from any selection never lowers its
    density, so the optimum value is unchanged.
    """
    universe = tensor.universe()
    if prune:
        universe = [q for q in universe if tensor.slice_entries.get(q)]
        if not universe:
            return DenseSelection(frozenset(), 0.0)
    n = len(universe)
    if n > max_slices:
        raise ValueError(f"{n} slices is too many for exhaustive search (max {max_slices})")
    if n == 0:
        return DenseSelection(frozenset(), 0.0)

    bit = {q: 1 << k for k, q in enumerate(universe)}
    mass = np.zeros(1 << n)
    for e, v in tensor.entries.items():
        mask = 0
        for q in tensor.slices_of(e):
            mask |= bit[q]
        mass[mask] += v
    for i in range(n):
        view = mass.reshape(-1, 2, 1 << i)
        view[:, 1, :] += view[:, 0, :]

    density = mass[1:] / _popcount(n)[1:]
    best = int(np.argmax(density)) + 1
    slices = frozenset(q for q in universe if best & bit[q])
    return DenseSelection(slices, float(mass[best]))


def optimal_density(tensor: SparseTensor, **kwargs) -> float:
    return brute_force_densest(tensor, **kwargs).density


def recompute_state(tensor: SparseTensor, st: DOrdering) -> tuple[dict, dict]:
    """Suffix slice sums and their running maxima, from the definitions."""
    d: dict = {}
    c: dict = {}
    running = 0.0
    for j, q in enumerate(st.pi):
        suffix = set(st.pi[j:])
        d[q] = tensor.slice_sum_in(suffix, q)
        running = max(running, d[q])
        c[q] = running
    return d, c
