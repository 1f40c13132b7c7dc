"""Command-line front end.

Subcommands::

    batch     one densest-subtensor record for the final tensor of a file
    stream    maintained density after every event, then the final selection
    alert     sliding-window density trace plus the top-k alert records
    generate  synthetic stream with injected dense blocks, plus its manifest

Records are JSON lines with sorted keys; traces are CSV.  With ``--out DIR``
the outputs go to files in ``DIR``, otherwise everything goes to stdout.

Exit status: 0 ok, 1 usage error, 2 data error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from .alert import AlertRecord, StreamOrderError, run_alert
from .events import EventFile, IngestError, StreamFileHeader, format_event, ingest
from .experiment import InjectionSpec, generate_injected
from .ordering import build_ordering, verify
from .static import find_slices
from .stream import DenseStream
from .tensor import DenseSelection, SparseTensor, TensorError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: error: {message}")


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(d) for d in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}") from None
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise argparse.ArgumentTypeError(f"need >= 2 positive dims, got {text!r}")
    return dims


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def selection_record(sel: DenseSelection, **extra) -> dict:
    rec = {
        "density": sel.density,
        "mass": sel.mass,
        "size": len(sel.slices),
        "slices": sorted([q[0], q[1]] for q in sel.slices),
    }
    rec.update(extra)
    return rec


def alert_record(rec: AlertRecord, rank: int) -> dict:
    return selection_record(DenseSelection(rec.slices, rec.mass), rank=rank, time=rec.time)


def dumps(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dense-subtensor", description="Dense-subtensor detection on event streams.")
    sub = p.add_subparsers(dest="mode", required=True, parser_class=_Parser)

    def common(sp, *, with_input: bool = True):
        if with_input:
            sp.add_argument("input", help="event file (time,i_1..i_N,delta[,sign])")
            sp.add_argument("--order", type=int, help="tensor order N")
            sp.add_argument("--dims", type=_dims, help="mode sizes, e.g. 200,200,50,5")
            sp.add_argument("--sort", action="store_true", help="sort events by time")
            sp.add_argument(
                "--self-check", type=_positive, metavar="K", help="run verify() every K events"
            )
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, help="output directory (default: stdout)")
        sp.add_argument("--stats", action="store_true", help="print run statistics to stderr")

    common(sub.add_parser("batch", help="static detection on the final tensor"))
    common(sub.add_parser("stream", help="maintain a dense subtensor event by event"))
    a = sub.add_parser("alert", help="sliding-window alerting")
    common(a)
    a.add_argument("--window", type=_positive, required=True, help="window length in ticks")
    a.add_argument("--topk", type=_positive, default=10)
    a.add_argument("--dedup-jaccard", type=float, default=0.5)

    g = sub.add_parser("generate", help="synthetic stream with injected blocks")
    common(g, with_input=False)
    d = InjectionSpec()
    g.add_argument("--dims", type=_dims, default=d.dims)
    g.add_argument("--blocks", type=int, default=d.num_blocks)
    g.add_argument("--size-min", type=int, default=d.size_range[0])
    g.add_argument("--size-max", type=int, default=d.size_range[1])
    g.add_argument("--block-value", type=float, default=d.block_value)
    g.add_argument("--background", type=int, default=d.background_events)
    g.add_argument("--time-mode", type=int, default=d.time_mode)
    return p


class _Sink:
    """Writes named outputs to files under ``out`` or, without it, to stdout."""

    def __init__(self, out: Path | None, stdout) -> None:
        self.out = out
        self.stdout = stdout
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, lines) -> None:
        if self.out is None:
            for line in lines:
                self.stdout.write(line + "\n")
            return
        with (self.out / name).open("w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")


def _load(args) -> EventFile:
    return ingest(args.input, order=args.order, dims=args.dims, sort=args.sort)


def _check(tensor, ordering, where: str) -> None:
    v = verify(tensor, ordering)
    if not v:
        raise InvariantError(f"invariant violated {where}: {v.violation}")


def _cmd_batch(args, sink: _Sink, stats: dict) -> None:
    ef = _load(args)
    tensor = SparseTensor(ef.header.dims)
    for ev in ef.events:
        tensor.apply_delta(ev.entry, ev.sign * ev.delta)
    if not tensor.entries:
        raise TensorError("the final tensor is empty")
    st = build_ordering(tensor)
    if args.self_check:
        _check(tensor, st, "after the static build")
    slices, mass = find_slices(st)
    sink.write("selection.jsonl", [dumps(selection_record(DenseSelection(slices, mass)))])
    stats.update(events=len(ef.events), nnz=tensor.nnz, slices=tensor.num_slices())


def _cmd_stream(args, sink: _Sink, stats: dict) -> None:
    ef = _load(args)
    engine = DenseStream.empty(ef.header.dims)
    k = args.self_check
    trace = ["event,time,density"]
    for n, ev in enumerate(ef.events, 1):
        engine.apply(ev.entry, ev.delta, ev.sign)
        trace.append(f"{n},{ev.time},{engine.density!r}")
        if k and n % k == 0:
            _check(engine.tensor, engine.ordering, f"after event {n}")
    sink.write("trace.csv", trace)
    sink.write("selection.jsonl", [dumps(selection_record(engine.selection))])
    stats.update(events=len(ef.events), **vars(engine.stats))


def _cmd_alert(args, sink: _Sink, stats: dict) -> None:
    ef = _load(args)
    if any(ev.sign < 0 for ev in ef.events):
        raise IngestError(f"{args.input}: alert mode only accepts increments")
    if not 0.0 <= args.dedup_jaccard <= 1.0:
        raise UsageError("--dedup-jaccard must lie in [0, 1]")
    k = args.self_check
    counter = {"n": 0}

    def on_step(alert, ev):
        counter["n"] += 1
        if k and counter["n"] % k == 0:
            _check(alert.tensor, alert.engine.ordering, f"after event {counter['n']}")

    run = run_alert(
        ef.events,
        ef.header.dims,
        args.window,
        args.topk,
        dedup_jaccard=args.dedup_jaccard,
        on_step=on_step,
    )
    sink.write("trace.csv", ["time,density"] + [f"{t},{d!r}" for t, d in run.trace])
    sink.write("alerts.jsonl", [dumps(alert_record(r, i)) for i, r in enumerate(run.top, 1)])
    stats.update(
        events=len(ef.events), records=run.records, peak_window=run.peak_window, **run.stats
    )


def _cmd_generate(args, sink: _Sink, stats: dict) -> None:
    try:
        spec = InjectionSpec(
            dims=tuple(args.dims),
            num_blocks=args.blocks,
            size_range=(args.size_min, args.size_max),
            block_value=args.block_value,
            background_events=args.background,
            time_mode=args.time_mode,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    events, blocks = generate_injected(spec, args.seed)
    header = StreamFileHeader(len(spec.dims), spec.dims)
    sink.write("events.csv", [header.render()] + [format_event(ev) for ev in events])
    sink.write("manifest.jsonl", [dumps(b.to_json()) for b in blocks])
    stats.update(events=len(events), blocks=len(blocks))


COMMANDS = {
    "batch": _cmd_batch,
    "stream": _cmd_stream,
    "alert": _cmd_alert,
    "generate": _cmd_generate,
}


def run_cli(argv: Sequence[str] | None = None, *, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(stderr)
        print(exc, file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    stats: dict = {}
    try:
        COMMANDS[args.mode](args, _Sink(args.out, stdout), stats)
    except UsageError as exc:
        print(f"dense-subtensor: error: {exc}", file=stderr)
        return EXIT_USAGE
    except (IngestError, TensorError, StreamOrderError) as exc:
        print(f"dense-subtensor: data error: {exc}", file=stderr)
        return EXIT_DATA
    except InvariantError as exc:
        print(f"dense-subtensor: {exc}", file=stderr)
        return EXIT_INVARIANT
    if args.stats:
        print(dumps(stats), file=stderr)
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
