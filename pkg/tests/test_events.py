from __future__ import annotations

import pytest

from dense_subtensor import (
    IngestError,
    InjectionSpec,
    StreamFileHeader,
    TimedEvent,
    generate_injected,
    ingest,
    parse_events,
    write_events,
)


def write(tmp_path, text, name="ev.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_increments(tmp_path):
    p = write(tmp_path, "1,1,1,2\n2,2,1,1\n2,1,2,3\n")
    ef = ingest(p)
    assert [ev.time for ev in ef.events] == [1, 2, 2]
    assert ef.events[0] == TimedEvent(1, (1, 1), 2.0, 1)
    assert ef.header.dims == (2, 2)


def test_sign_column():
    ef = parse_events(["1,1,1,5", "2,1,1,2,-", "3,1,1,1,+", "4,1,1,1,−"])
    assert [ev.sign for ev in ef.events] == [1, -1, 1, -1]


def test_time_regression_names_line(tmp_path):
    p = write(tmp_path, "# order=2 dims=2,2\n3,1,1,1\n\n1,2,2,1\n")
    with pytest.raises(IngestError, match=r"ev\.csv:4: time 1"):
        ingest(p)
    ef = ingest(p, sort=True)
    assert [ev.time for ev in ef.events] == [1, 3]


@pytest.mark.parametrize(
    "line, msg",
    [
        ("1,1,x,1", "invalid literal"),
        ("1,1,1,0", "positive"),
        ("1,1,1,-2", "positive"),
        ("1,0,1,1", "1-based"),
        ("1,1,1", "coordinates"),
        ("1,1,1,1,1", "expected 2 coordinates"),
        ("1,3,1,1", "exceeds"),
    ],
)
def test_malformed_lines(line, msg):
    with pytest.raises(IngestError, match=msg) as info:
        parse_events(["# order=2 dims=2,2", "1,1,1,1", line], source="f")
    assert str(info.value).startswith("f:3:")


def test_header_roundtrip_and_conflicts():
    h = StreamFileHeader(3, (3, 3, 2))
    assert StreamFileHeader.parse(h.render()) == h
    with pytest.raises(IngestError, match="conflict"):
        parse_events([h.render(), "1,1,1,1,1"], dims=(4, 4, 4))
    with pytest.raises(IngestError):
        parse_events(["# order=2 dims=2,0"])
    with pytest.raises(IngestError, match="bad header"):
        parse_events(["# order=x dims=2,2"])
    with pytest.raises(IngestError, match="first"):
        parse_events(["1,1,1,1", "# order=2 dims=2,2"])


def test_shape_inference_and_explicit_dims():
    assert parse_events(["1,3,1,4,1"]).header.dims == (3, 1, 4)
    assert parse_events(["1,1,1,1"], dims=(5, 5)).header.dims == (5, 5)
    with pytest.raises(IngestError, match="no events"):
        parse_events([])
    with pytest.raises(IngestError, match="expected 3"):
        parse_events(["1,1,1,1"], order=3)


def test_missing_file(tmp_path):
    with pytest.raises(IngestError, match="cannot read"):
        ingest(tmp_path / "nope.csv")


def test_generate_roundtrip(tmp_path):
    spec = InjectionSpec(dims=(30, 30, 8, 3), num_blocks=3, size_range=(2, 4), background_events=300)
    events, _ = generate_injected(spec, seed=5)
    p = tmp_path / "gen.csv"
    write_events(p, StreamFileHeader(4, spec.dims), events)
    ef = ingest(p)
    assert ef.header.dims == spec.dims
    assert len(ef.events) == len(events)
    assert ef.events == events

    def per_tick(evs):
        out: dict = {}
        for ev in evs:
            out[ev.time] = out.get(ev.time, 0) + ev.delta
        return out

    assert per_tick(ef.events) == per_tick(events)


def test_fractional_and_signed_formatting(tmp_path):
    events = [TimedEvent(1, (1, 2), 0.25), TimedEvent(2, (1, 2), 0.25, -1)]
    p = tmp_path / "f.csv"
    write_events(p, StreamFileHeader(2, (2, 2)), events)
    assert p.read_text().splitlines()[1:] == ["1,1,2,0.25", "2,1,2,0.25,-"]
    assert ingest(p).events == events
