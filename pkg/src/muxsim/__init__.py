"""Trace-driven simulator and scheduler for safe GPU space-sharing.

Online latency-critical services keep their GPUs; best-effort offline jobs are
packed into the leftover SM capacity behind a health monitor, a load throttle,
a throughput predictor, and an optimal bipartite matching. The package ships
the building blocks plus a deterministic fluid simulator that replays cluster
traces under several sharing policies.
"""

from muxsim.core import (
    ClusterTrace,
    GpuSpec,
    OfflineWorkload,
    OnlineWorkload,
    TraceValidationError,
    WorkloadProfile,
    load_trace,
    profile_at,
    save_trace,
)
from muxsim.matching import BipartiteGraph, Matching, max_weight_matching
from muxsim.predictor import PredictionTable, build_table_from_model, predict
from muxsim.scheduler import Assignment, SchedulerConfig, dynamic_sm, schedule
from muxsim.simengine import RunReport, SimConfig, oversold_gpu, run

__all__ = [
    "Assignment",
    "BipartiteGraph",
    "ClusterTrace",
    "GpuSpec",
    "Matching",
    "OfflineWorkload",
    "OnlineWorkload",
    "PredictionTable",
    "RunReport",
    "SchedulerConfig",
    "SimConfig",
    "TraceValidationError",
    "WorkloadProfile",
    "build_table_from_model",
    "dynamic_sm",
    "load_trace",
    "max_weight_matching",
    "oversold_gpu",
    "predict",
    "profile_at",
    "run",
    "save_trace",
    "schedule",
]
