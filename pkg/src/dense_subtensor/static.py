"""Static dense-subtensor detection from a D-ordering."""

from __future__ import annotations

import numpy as np

from .ordering import DOrdering, build_ordering
from .tensor import DenseSelection, SparseTensor, TensorError


def find_slices(st: DOrdering) -> tuple[frozenset, float]:
    """Return the densest suffix of ``st.pi`` and its mass.

    Suffix masses are the cumulative sums of ``d_at`` taken from the end.
    Among equally dense suffixes the shortest one wins.
    """
    n = len(st.pi)
    if n == 0:
        return frozenset(), 0.0
    masses = np.cumsum(st.d_at[::-1])
    densities = masses / np.arange(1, n + 1)
    k = int(np.argmax(densities))
    start = n - 1 - k
    return frozenset(st.pi[start:]), float(masses[k])


def detect_static(tensor: SparseTensor) -> DenseSelection:
    """Dense subtensor of a static tensor with density >= rho_opt / N."""
    if not tensor.entries:
        raise TensorError("cannot detect a dense subtensor in an empty tensor")
    slices, mass = find_slices(build_ordering(tensor))
    return DenseSelection(slices, mass)
