"""Streaming detection of dense subtensors in sparse N-way tensors."""

from .alert import AlertRecord, AlertRun, DenseAlert, StreamOrderError, TimedEvent, TopK, run_alert
from .events import EventFile, IngestError, StreamFileHeader, ingest, parse_events, write_events
from .experiment import (
    InjectedBlock,
    InjectionSpec,
    event_auc,
    generate_injected,
    is_detected,
    powerlaw_stream,
    score_recall,
)
from .oracle import brute_force_densest, optimal_density, recompute_state
from .ordering import DOrdering, PeelHeap, Verification, build_ordering, reorder_region, verify
from .static import detect_static, find_slices
from .stream import DenseStream, ReorderPlan, StreamStats, plan_decrement, plan_increment
from .tensor import TOL, DenseSelection, SliceIndex, SparseTensor, TensorError

__all__ = [
    "TOL",
    "AlertRecord",
    "AlertRun",
    "DOrdering",
    "DenseAlert",
    "DenseSelection",
    "DenseStream",
    "EventFile",
    "IngestError",
    "InjectedBlock",
    "InjectionSpec",
    "PeelHeap",
    "ReorderPlan",
    "SliceIndex",
    "SparseTensor",
    "StreamFileHeader",
    "StreamOrderError",
    "StreamStats",
    "TensorError",
    "TimedEvent",
    "TopK",
    "Verification",
    "brute_force_densest",
    "build_ordering",
    "detect_static",
    "event_auc",
    "find_slices",
    "generate_injected",
    "ingest",
    "is_detected",
    "optimal_density",
    "parse_events",
    "plan_decrement",
    "plan_increment",
    "powerlaw_stream",
    "recompute_state",
    "reorder_region",
    "run_alert",
    "score_recall",
    "verify",
    "write_events",
]
