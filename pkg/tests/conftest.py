from __future__ import annotations

import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from dense_subtensor import SparseTensor

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# Golden 3-way tensor: slices (1,1),(1,2),(2,1),(2,2),(3,1) carry mass 19,
# with (2,2) holding 5 + 3 of it; a single stray entry sits outside.
GOLDEN_DIMS = (3, 3, 2)
GOLDEN_ENTRIES = {
    (1, 1, 1): 4,
    (2, 1, 1): 7,
    (1, 2, 1): 5,
    (2, 2, 1): 3,
    (3, 3, 2): 1,
}
GOLDEN_S = {(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)}


@pytest.fixture
def golden() -> SparseTensor:
    return SparseTensor.from_entries(GOLDEN_DIMS, GOLDEN_ENTRIES)


@pytest.fixture
def diag() -> SparseTensor:
    """The 2x2 matrix [[1, 0], [0, 3]]."""
    return SparseTensor.from_entries((2, 2), {(1, 1): 1, (2, 2): 3})


@st.composite
def small_dims(draw, max_slices: int = 14, orders=(2, 3)):
    n = draw(st.sampled_from(orders))
    while True:
        dims = tuple(draw(st.integers(1, 5)) for _ in range(n))
        if sum(dims) <= max_slices:
            return dims


@st.composite
def small_tensors(draw, max_slices: int = 14, orders=(2, 3), max_value: int = 9):
    dims = draw(small_dims(max_slices, orders))
    cells = st.tuples(*[st.integers(1, d) for d in dims])
    entries = draw(st.dictionaries(cells, st.integers(1, max_value), max_size=20))
    return SparseTensor.from_entries(dims, entries)


def random_dims(rng: random.Random, max_slices: int, orders=(2, 3)) -> tuple[int, ...]:
    while True:
        n = rng.choice(orders)
        dims = tuple(rng.randint(1, 6) for _ in range(n))
        if sum(dims) <= max_slices:
            return dims


def random_mixed_stream(rng: random.Random, dims, n_events: int, p_dec: float = 0.4):
    """Integer ``(entry, delta, sign)`` events that never drive an entry below 0."""
    live: dict = {}
    out = []
    for _ in range(n_events):
        if live and rng.random() < p_dec:
            e = rng.choice(sorted(live))
            d = rng.randint(1, live[e])
            live[e] -= d
            if not live[e]:
                del live[e]
            out.append((e, d, -1))
        else:
            e = tuple(rng.randint(1, k) for k in dims)
            d = rng.randint(1, 5)
            live[e] = live.get(e, 0) + d
            out.append((e, d, 1))
    return out


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one ``PASS``/``FAIL`` line per acceptance criterion."""

    def _report(label: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=["python", "vector"])
def setup_path(request, monkeypatch):
    """Run a test once per region-setup path of reorder_region()."""
    from dense_subtensor import ordering

    if request.param == "vector":
        monkeypatch.setattr(ordering, "_VECTOR_MIN", 0)
    return request.param
