"""Deterministic synthetic cluster-trace generation.

One latency-critical online service is pinned to every GPU with a diurnal
QPS curve sampled on a fixed knot grid; a queue of best-effort offline jobs
arrives through the first half of the horizon.  Everything derives from a
single seeded RNG stream, so (spec, seed) fully determines the trace.
"""

import math
import random
from typing import Dict, Optional

from .core import (ClusterTrace, GpuSpec, OfflineWorkload, OnlineWorkload,
                   TraceValidationError, WorkloadProfile)

QPS_PER_LEVEL = 100.0   # QPS spacing between adjacent profile knots

DEFAULT_SPEC = {
    "name": "synthetic",
    "gpus": 8,
    "gpu_type": "A100",
    "horizon_s": 86400.0,
    "online": {
        "qps_period_s": 600.0,        # knot spacing of the QPS series
        "qps_levels": 8,              # distinct load levels / profile knots
        "base_latency_range_s": [0.010, 0.040],
        "slo_factor": 4.0,            # latency_slo = slo_factor * base_latency
        "sm_range": [0.15, 0.93],     # SM activity from idle to peak level
        "mem_range": [0.25, 0.62],
        "amp_range": [0.6, 1.0],      # diurnal swing as a fraction of max
    },
    "offline": {
        "count_per_gpu": 3.0,
        "demand_range": [0.60, 0.98],  # exclusive-run SM activity
        "work_range_s": [1800.0, 14400.0],
        "submit_range_s": [0.0, 43200.0],
        "mem_range": [0.15, 0.40],
    },
}


def _merge(section: str, defaults: Dict, given) -> Dict:
    if given is None:
        return dict(defaults)
    if not isinstance(given, dict):
        raise TraceValidationError(f"generator spec: {section} must be an object")
    unknown = [k for k in given if k not in defaults]
    if unknown:
        raise TraceValidationError(f"generator spec: unknown {section} fields {unknown}")
    merged = dict(defaults)
    merged.update(given)
    return merged


def _pair(section: str, name: str, value) -> tuple:
    try:
        lo, hi = float(value[0]), float(value[1])
    except (TypeError, ValueError, IndexError):
        raise TraceValidationError(
            f"generator spec: {section}.{name} must be a [lo, hi] pair") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise TraceValidationError(
            f"generator spec: {section}.{name} must satisfy lo <= hi, got {value}")
    return lo, hi


def gen_trace(spec: Optional[Dict] = None, seed: int = 0) -> ClusterTrace:
    """Generate a validated trace from a generator spec; deterministic per seed."""
    spec = spec or {}
    if not isinstance(spec, dict):
        raise TraceValidationError("generator spec: top level must be an object")
    top_keys = ("name", "gpus", "gpu_type", "horizon_s", "online", "offline")
    unknown = [k for k in spec if k not in top_keys]
    if unknown:
        raise TraceValidationError(f"generator spec: unknown fields {unknown}")
    n_gpus = int(spec.get("gpus", DEFAULT_SPEC["gpus"]))
    if n_gpus <= 0:
        raise TraceValidationError("generator spec: gpus must be > 0")
    gpu_type = str(spec.get("gpu_type", DEFAULT_SPEC["gpu_type"]))
    horizon = float(spec.get("horizon_s", DEFAULT_SPEC["horizon_s"]))
    if horizon <= 0:
        raise TraceValidationError("generator spec: horizon_s must be > 0")
    onl = _merge("online", DEFAULT_SPEC["online"], spec.get("online"))
    off = _merge("offline", DEFAULT_SPEC["offline"], spec.get("offline"))

    rng = random.Random(f"{seed}-gen")
    width = max(3, len(str(n_gpus - 1)))

    levels = int(onl["qps_levels"])
    if levels < 1:
        raise TraceValidationError("generator spec: online.qps_levels must be >= 1")
    period = float(onl["qps_period_s"])
    if period <= 0:
        raise TraceValidationError("generator spec: online.qps_period_s must be > 0")
    lat_lo, lat_hi = _pair("online", "base_latency_range_s", onl["base_latency_range_s"])
    sm_lo, sm_hi = _pair("online", "sm_range", onl["sm_range"])
    mem_lo, mem_hi = _pair("online", "mem_range", onl["mem_range"])
    amp_lo, amp_hi = _pair("online", "amp_range", onl["amp_range"])
    slo_factor = float(onl["slo_factor"])
    if slo_factor < 1.0:
        raise TraceValidationError("generator spec: online.slo_factor must be >= 1")

    q_min = QPS_PER_LEVEL
    q_max = QPS_PER_LEVEL * levels
    gpus, online = [], []
    for i in range(n_gpus):
        gid = f"g{i:0{width}d}"
        oid = f"on-{i:0{width}d}"
        gpus.append(GpuSpec(id=gid, gpu_type=gpu_type, online_id=oid))

        base_latency = rng.uniform(lat_lo, lat_hi)
        peak_sm = rng.uniform(sm_lo + 0.5 * (sm_hi - sm_lo), sm_hi)
        mem = rng.uniform(mem_lo, mem_hi)
        phase = rng.random()
        amp_frac = rng.uniform(amp_lo, amp_hi)

        profiles = []
        for k in range(levels):
            frac = k / (levels - 1) if levels > 1 else 1.0
            sm = sm_lo + (peak_sm - sm_lo) * frac
            profiles.append((QPS_PER_LEVEL * (k + 1), WorkloadProfile(
                sm_activity=sm,
                gpu_utilization=min(1.0, 1.8 * sm),
                sm_occupancy=0.5,
                iter_time_separate=base_latency,
                mem_fraction=mem,
            )))

        q_mid = 0.5 * (q_min + q_max)
        q_amp = 0.5 * (q_max - q_min) * amp_frac
        knots = []
        t = 0.0
        while t <= horizon:
            q = q_mid + q_amp * math.sin(2.0 * math.pi * (t / 86400.0 + phase))
            knots.append((t, min(q_max, max(q_min, q))))
            t += period

        online.append(OnlineWorkload(
            id=oid, gpu_id=gid, base_latency=base_latency,
            latency_slo=slo_factor * base_latency,
            qps_series=tuple(knots), profile_by_qps=tuple(profiles)))

    dem_lo, dem_hi = _pair("offline", "demand_range", off["demand_range"])
    work_lo, work_hi = _pair("offline", "work_range_s", off["work_range_s"])
    sub_lo, sub_hi = _pair("offline", "submit_range_s", off["submit_range_s"])
    omem_lo, omem_hi = _pair("offline", "mem_range", off["mem_range"])
    count = int(round(float(off["count_per_gpu"]) * n_gpus))
    if count < 0:
        raise TraceValidationError("generator spec: offline.count_per_gpu must be >= 0")
    owidth = max(3, len(str(max(count - 1, 0))))
    offline = []
    for j in range(count):
        dem = rng.uniform(dem_lo, dem_hi)
        offline.append(OfflineWorkload(
            id=f"off-{j:0{owidth}d}",
            submit_time=rng.uniform(sub_lo, min(sub_hi, horizon)),
            work_separate=rng.uniform(work_lo, work_hi),
            profile=WorkloadProfile(
                sm_activity=dem,
                gpu_utilization=min(1.0, 1.8 * dem),
                sm_occupancy=0.5,
                iter_time_separate=0.1,
                mem_fraction=rng.uniform(omem_lo, omem_hi),
            )))

    return ClusterTrace(gpus=tuple(gpus), online=tuple(online),
                        offline=tuple(offline), horizon=horizon)
