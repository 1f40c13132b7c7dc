"""End-to-end acceptance checks.  Each test reports one PASS/FAIL line."""

from __future__ import annotations

import io
import random
import time

import numpy as np
import pytest
from conftest import GOLDEN_DIMS, GOLDEN_ENTRIES, GOLDEN_S, random_dims, random_mixed_stream

from dense_subtensor import (
    DenseAlert,
    DenseStream,
    InjectionSpec,
    SparseTensor,
    StreamFileHeader,
    TimedEvent,
    brute_force_densest,
    detect_static,
    generate_injected,
    powerlaw_stream,
    run_alert,
    score_recall,
    verify,
    write_events,
)
from dense_subtensor.cli import run_cli

REL = 1e-9


def meets_bound(density: float, opt: float, order: int) -> bool:
    return density >= opt / order * (1 - REL)


def self_check_dims(rng: random.Random) -> tuple[int, ...]:
    if rng.random() < 0.5:
        return (rng.randint(5, 25), rng.randint(5, 25))
    return tuple(rng.randint(4, 16) for _ in range(3))


def test_c1_ordering_invariant_every_event(tmp_path, report):
    rng = random.Random(101)
    n_streams, n_events = 20, 10_000
    files = []
    for k in range(n_streams):
        dims = self_check_dims(rng)
        assert sum(dims) <= 50
        events = [
            TimedEvent(t, e, d, sign)
            for t, (e, d, sign) in enumerate(random_mixed_stream(rng, dims, n_events, p_dec=0.5))
        ]
        path = tmp_path / f"s{k}.csv"
        write_events(path, StreamFileHeader(len(dims), dims), events)
        files.append(path)

    codes = []
    t0 = time.perf_counter()
    for path in files:
        codes.append(run_cli(["stream", str(path), "--self-check", "1"], stdout=io.StringIO()))
    elapsed = time.perf_counter() - t0
    violations = sum(c != 0 for c in codes)
    ok = violations == 0 and elapsed < 60
    report(
        "C1 D-ordering invariant",
        ok,
        f"{n_streams} streams x {n_events} events, verify every event: "
        f"{violations} failing streams, {elapsed:.1f}s (target < 60s)",
    )
    assert violations == 0
    assert elapsed < 60


def test_c2_approximation_bound(report):
    rng = random.Random(202)
    static_bad = 0
    for _ in range(1000):
        dims = random_dims(rng, 14)
        cells = rng.randint(1, 25)
        t = SparseTensor.from_entries(
            dims, [(tuple(rng.randint(1, d) for d in dims), rng.randint(1, 9)) for _ in range(cells)]
        )
        opt = brute_force_densest(t).density
        if not meets_bound(detect_static(t).density, opt, t.order):
            static_bad += 1

    stream_bad = checked = 0
    for _ in range(100):
        dims = random_dims(rng, 14)
        eng = DenseStream.empty(dims)
        for e, d, sign in random_mixed_stream(rng, dims, 100):
            eng.apply(e, d, sign)
            opt = brute_force_densest(eng.tensor).density
            checked += 1
            if not meets_bound(eng.density, opt, eng.tensor.order):
                stream_bad += 1
    ok = static_bad == 0 and stream_bad == 0
    report(
        "C2 density >= opt/N",
        ok,
        f"1000 static instances: {static_bad} violations; "
        f"100 streams / {checked} events: {stream_bad} violations (rel slack {REL:g})",
    )
    assert ok


def test_c3_golden_tensor(report):
    t = SparseTensor.from_entries(GOLDEN_DIMS, GOLDEN_ENTRIES)
    mass = t.mass_of(GOLDEN_S)
    d22 = t.slice_sum_in(GOLDEN_S, (2, 2))
    ok = mass == 19 and d22 == 8
    report("C3 golden tensor", ok, f"mass_of(S) = {mass:g} (19), slice_sum_in(S,(2,2)) = {d22:g} (8)")
    assert ok


def timed_stream(rng: random.Random, dims, n: int) -> list[TimedEvent]:
    t = 0
    out = []
    for _ in range(n):
        t += rng.choice((0, 0, 1, 1, 2, 3))
        out.append(TimedEvent(t, tuple(rng.randint(1, d) for d in dims), rng.randint(1, 4)))
    return out


def scratch_window(dims, events, now, window) -> SparseTensor:
    t = SparseTensor(dims)
    for ev in events:
        if now - window < ev.time <= now:
            t.apply_delta(ev.entry, ev.delta)
    return t


@pytest.fixture(scope="module")
def window_runs():
    """Window-equivalence and bound checks shared by the two window criteria."""
    rng = random.Random(404)
    mismatches = bound_bad = checks = 0
    runs = 0
    for _ in range(20):
        dims = random_dims(rng, 14)
        events = timed_stream(rng, dims, 150)
        for window in (1, 3, 10):
            runs += 1
            alert = DenseAlert(dims, window)
            for k, ev in enumerate(events):
                alert.step(ev)
                ref = scratch_window(dims, events[: k + 1], ev.time, window)
                checks += 1
                if alert.tensor.entries != ref.entries:
                    mismatches += 1
                opt = brute_force_densest(ref).density
                if not meets_bound(alert.density, opt, len(dims)):
                    bound_bad += 1
    return {"runs": runs, "checks": checks, "mismatches": mismatches, "bound_bad": bound_bad}


def test_c4_window_equivalence(window_runs, report):
    r = window_runs
    ok = r["mismatches"] == 0
    report(
        "C4 window equivalence",
        ok,
        f"{r['runs']} runs (20 streams x window 1/3/10), {r['checks']} events: "
        f"{r['mismatches']} mismatches (exact)",
    )
    assert ok


def test_c5_window_bound(window_runs, report):
    r = window_runs
    ok = r["bound_bad"] == 0
    report(
        "C5 window density >= opt/N",
        ok,
        f"{r['checks']} events: {r['bound_bad']} violations (rel slack {REL:g})",
    )
    assert ok


@pytest.mark.slow
def test_c6_injection_recall(report):
    spec = InjectionSpec()
    recalls, times = [], []
    for seed in range(10):
        events, blocks = generate_injected(spec, seed)
        t0 = time.perf_counter()
        run = run_alert(events, spec.dims, window=1, top_k=10)
        times.append(time.perf_counter() - t0)
        recalls.append(score_recall(run.top, blocks))
    mean = float(np.mean(recalls))
    worst = max(times)
    ok = mean >= 0.7 and worst < 120
    report(
        "C6 injection recall@10",
        ok,
        f"mean recall {mean:.2f} over 10 seeds (>= 0.7; per seed {recalls}); "
        f"slowest run {worst:.0f}s (target < 120s), total {sum(times):.0f}s",
    )
    assert mean >= 0.7
    assert worst < 120


def test_c7_incremental_speedup(report):
    dims = (1000, 1000, 1000)
    events = powerlaw_stream(dims, 100_000, exponent=1.5, seed=7)
    eng = DenseStream.empty(dims)
    per_event = np.empty(len(events))
    clock = time.perf_counter
    for k, ev in enumerate(events):
        t0 = clock()
        eng.increment(ev.entry, ev.delta)
        per_event[k] = clock() - t0
    assert eng.tensor.nnz == len(events)
    t0 = clock()
    detect_static(eng.tensor)
    static_time = clock() - t0

    recent = float(per_event[-10_000:].mean())
    early = float(per_event[9_000:10_000].mean())
    late = float(per_event[99_000:100_000].mean())
    speedup = static_time / recent
    growth = late / early
    ok = speedup >= 100 and growth < 10
    report(
        "C7 incremental speed",
        ok,
        f"static {static_time * 1e3:.0f} ms vs update {recent * 1e6:.0f} us at 1e5 nnz: "
        f"{speedup:.0f}x (>= 100x); update time 1e5/1e4 nnz ratio {growth:.2f} (< 10)",
    )
    assert speedup >= 100
    assert growth < 10


def test_c8_undo_symmetry(report):
    rng = random.Random(808)
    dims = (6, 5, 4)
    eng = DenseStream.empty(dims)
    for e, d, sign in random_mixed_stream(rng, dims, 300):
        eng.apply(e, d, sign)
    broken = 0
    for _ in range(1000):
        entries = dict(eng.tensor.entries)
        sums = dict(eng.tensor.slice_sums)
        e = tuple(rng.randint(1, d) for d in dims)
        d = rng.randint(1, 5)
        eng.increment(e, d)
        eng.decrement(e, d)
        if eng.tensor.entries != entries or eng.tensor.slice_sums != sums:
            broken += 1
        elif not verify(eng.tensor, eng.ordering):
            broken += 1
    ok = broken == 0
    report("C8 undo symmetry", ok, f"1000 increment/decrement pairs: {broken} not restored exactly")
    assert ok
