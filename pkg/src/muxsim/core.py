"""Workload and cluster-trace model: typed records, validation, JSON I/O."""

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional, Tuple


class TraceValidationError(ValueError):
    """Raised when a trace (or one of its records) fails validation."""


def _check_fraction(record: str, name: str, value) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise TraceValidationError(f"{record}: {name} must be a finite number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise TraceValidationError(f"{record}: {name} must be in [0, 1], got {value}")
    return float(value)


def _check_positive(record: str, name: str, value) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise TraceValidationError(f"{record}: {name} must be a finite number, got {value!r}")
    if value <= 0.0:
        raise TraceValidationError(f"{record}: {name} must be > 0, got {value}")
    return float(value)


@dataclass(frozen=True)
class WorkloadProfile:
    """Resource footprint of a workload at one operating point."""

    sm_activity: float        # fraction of SMs kept busy
    gpu_utilization: float    # temporal busy fraction of the device
    sm_occupancy: float       # warp occupancy on active SMs
    iter_time_separate: float  # seconds per iteration when running alone
    mem_fraction: float       # fraction of device memory held

    def __post_init__(self):
        rec = "profile"
        _check_fraction(rec, "sm_activity", self.sm_activity)
        _check_fraction(rec, "gpu_utilization", self.gpu_utilization)
        _check_fraction(rec, "sm_occupancy", self.sm_occupancy)
        _check_positive(rec, "iter_time_separate", self.iter_time_separate)
        _check_fraction(rec, "mem_fraction", self.mem_fraction)


@dataclass(frozen=True)
class OnlineWorkload:
    """Latency-critical service pinned to one GPU, described by a QPS series
    and per-QPS-level resource profiles."""

    id: str
    gpu_id: str
    base_latency: float                                # seconds, unloaded
    latency_slo: float                                 # seconds
    qps_series: Tuple[Tuple[float, float], ...]        # (t_s, qps), strictly increasing t
    profile_by_qps: Tuple[Tuple[float, WorkloadProfile], ...]  # (qps knot, profile), increasing qps

    def __post_init__(self):
        rec = f"online workload '{self.id}'"
        _check_positive(rec, "base_latency", self.base_latency)
        _check_positive(rec, "latency_slo", self.latency_slo)
        if self.base_latency > self.latency_slo:
            raise TraceValidationError(
                f"{rec}: base_latency {self.base_latency} exceeds latency_slo {self.latency_slo}")
        if not self.qps_series:
            raise TraceValidationError(f"{rec}: qps_series is empty")
        last_t = -math.inf
        for t, q in self.qps_series:
            if t <= last_t:
                raise TraceValidationError(
                    f"{rec}: qps_series timestamps must be strictly increasing (saw {t} after {last_t})")
            if t < 0 or not math.isfinite(t):
                raise TraceValidationError(f"{rec}: qps_series timestamp {t} out of range")
            if q < 0 or not math.isfinite(q):
                raise TraceValidationError(f"{rec}: qps value {q} must be >= 0")
            last_t = t
        if not self.profile_by_qps:
            raise TraceValidationError(f"{rec}: profiles list is empty")
        last_q = -math.inf
        for q, _p in self.profile_by_qps:
            if q <= last_q:
                raise TraceValidationError(
                    f"{rec}: profile QPS knots must be strictly increasing (saw {q} after {last_q})")
            last_q = q
        # Nearest-knot-at-or-below lookup must be defined for every QPS the series visits.
        min_knot = self.profile_by_qps[0][0]
        min_series = min(q for _t, q in self.qps_series)
        if min_series < min_knot:
            raise TraceValidationError(
                f"{rec}: qps_series reaches {min_series} below the lowest profile knot {min_knot}")

    def qps_at(self, t: float) -> float:
        """QPS in effect at time t (step series; before the first knot, the first value)."""
        times = [k[0] for k in self.qps_series]
        i = bisect_right(times, t) - 1
        return self.qps_series[max(i, 0)][1]

    def profile_for_qps(self, qps: float) -> WorkloadProfile:
        """Profile at the nearest QPS knot at or below the given level."""
        knots = [k[0] for k in self.profile_by_qps]
        i = bisect_right(knots, qps) - 1
        if i < 0:
            raise TraceValidationError(
                f"online workload '{self.id}': no profile knot at or below qps {qps}")
        return self.profile_by_qps[i][1]


def profile_at(w: OnlineWorkload, t: float, horizon: float = math.inf) -> WorkloadProfile:
    """Profile in effect at time t: step interpolation over the QPS series.

    Before the first knot the first profile applies. Errors for t outside
    [0, horizon].
    """
    if not math.isfinite(t) or t < 0 or t > horizon:
        raise TraceValidationError(
            f"online workload '{w.id}': time {t} outside trace horizon [0, {horizon}]")
    return w.profile_for_qps(w.qps_at(t))


@dataclass(frozen=True)
class OfflineWorkload:
    """Best-effort job: needs work_separate seconds of stand-alone execution."""

    id: str
    submit_time: float       # seconds
    work_separate: float     # seconds of progress at stand-alone speed
    profile: WorkloadProfile

    def __post_init__(self):
        rec = f"offline workload '{self.id}'"
        if self.submit_time < 0 or not math.isfinite(self.submit_time):
            raise TraceValidationError(f"{rec}: submit_time must be >= 0, got {self.submit_time}")
        _check_positive(rec, "work_separate", self.work_separate)


@dataclass(frozen=True)
class GpuSpec:
    id: str
    gpu_type: str
    online_id: Optional[str] = None   # pinned online workload, if any


@dataclass(frozen=True)
class ClusterTrace:
    """A full simulation input: GPUs, pinned online services, offline queue."""

    gpus: Tuple[GpuSpec, ...]
    online: Tuple[OnlineWorkload, ...]
    offline: Tuple[OfflineWorkload, ...]
    horizon: float            # seconds

    def __post_init__(self):
        _check_positive("trace", "horizon", self.horizon)
        gpu_ids = [g.id for g in self.gpus]
        if len(set(gpu_ids)) != len(gpu_ids):
            raise TraceValidationError("trace: duplicate GPU ids")
        for name, items in (("online", self.online), ("offline", self.offline)):
            ids = [w.id for w in items]
            if len(set(ids)) != len(ids):
                raise TraceValidationError(f"trace: duplicate {name} workload ids")
        by_gpu = {g.id: g for g in self.gpus}
        pinned = {}
        for w in self.online:
            rec = f"online workload '{w.id}'"
            if w.gpu_id not in by_gpu:
                raise TraceValidationError(f"{rec}: pinned to unknown GPU '{w.gpu_id}'")
            if by_gpu[w.gpu_id].online_id != w.id:
                raise TraceValidationError(
                    f"{rec}: GPU '{w.gpu_id}' does not list it as its pinned online workload")
            if w.gpu_id in pinned:
                raise TraceValidationError(
                    f"{rec}: GPU '{w.gpu_id}' already pinned to '{pinned[w.gpu_id]}'")
            pinned[w.gpu_id] = w.id
            for t, _q in w.qps_series:
                if t > self.horizon:
                    raise TraceValidationError(
                        f"{rec}: qps_series knot at {t} beyond horizon {self.horizon}")
        known_online = {w.id for w in self.online}
        for g in self.gpus:
            if g.online_id is not None and g.online_id not in known_online:
                raise TraceValidationError(
                    f"gpu '{g.id}': pinned online workload '{g.online_id}' not in trace")
            if g.online_id is not None and pinned.get(g.id) != g.online_id:
                raise TraceValidationError(
                    f"gpu '{g.id}': pinned workload '{g.online_id}' does not point back to it")

    def online_by_id(self, wid: str) -> OnlineWorkload:
        for w in self.online:
            if w.id == wid:
                return w
        raise KeyError(wid)

    def profile_at(self, online_id: str, t: float) -> WorkloadProfile:
        return profile_at(self.online_by_id(online_id), t, self.horizon)


_PROFILE_KEYS = ("sm_activity", "gpu_util", "sm_occupancy", "iter_time_s", "mem_fraction")


def _profile_from_dict(rec: str, d: dict) -> WorkloadProfile:
    if not isinstance(d, dict):
        raise TraceValidationError(f"{rec}: profile must be an object, got {type(d).__name__}")
    missing = [k for k in _PROFILE_KEYS if k not in d]
    if missing:
        raise TraceValidationError(f"{rec}: profile missing fields {missing}")
    extra = [k for k in d if k not in _PROFILE_KEYS and k != "qps"]
    if extra:
        raise TraceValidationError(f"{rec}: profile has unknown fields {extra}")
    return WorkloadProfile(
        sm_activity=d["sm_activity"],
        gpu_utilization=d["gpu_util"],
        sm_occupancy=d["sm_occupancy"],
        iter_time_separate=d["iter_time_s"],
        mem_fraction=d["mem_fraction"],
    )


def _profile_to_dict(p: WorkloadProfile) -> dict:
    return {
        "sm_activity": p.sm_activity,
        "gpu_util": p.gpu_utilization,
        "sm_occupancy": p.sm_occupancy,
        "iter_time_s": p.iter_time_separate,
        "mem_fraction": p.mem_fraction,
    }


def _require(rec: str, d: dict, keys) -> None:
    missing = [k for k in keys if k not in d]
    if missing:
        raise TraceValidationError(f"{rec}: missing fields {missing}")


def trace_from_dict(doc: dict) -> ClusterTrace:
    """Build and validate a ClusterTrace from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise TraceValidationError("trace: top level must be an object")
    _require("trace", doc, ("gpus", "online", "offline", "horizon_s"))
    extra = [k for k in doc if k not in ("gpus", "online", "offline", "horizon_s")]
    if extra:
        raise TraceValidationError(f"trace: unknown top-level fields {extra}")

    gpus = []
    for g in doc["gpus"]:
        rec = f"gpu '{g.get('id', '?')}'"
        _require(rec, g, ("id", "gpu_type"))
        gpus.append(GpuSpec(id=str(g["id"]), gpu_type=str(g["gpu_type"]),
                            online_id=g.get("online_id")))

    online = []
    for o in doc["online"]:
        rec = f"online workload '{o.get('id', '?')}'"
        _require(rec, o, ("id", "gpu_id", "base_latency_s", "latency_slo_s",
                          "qps_series", "profiles"))
        series = []
        for k in o["qps_series"]:
            _require(rec, k, ("t_s", "qps"))
            series.append((float(k["t_s"]), float(k["qps"])))
        profiles = []
        for p in o["profiles"]:
            if "qps" not in p:
                raise TraceValidationError(f"{rec}: profile entry missing its qps knot")
            profiles.append((float(p["qps"]), _profile_from_dict(rec, p)))
        profiles.sort(key=lambda kp: kp[0])
        online.append(OnlineWorkload(
            id=str(o["id"]), gpu_id=str(o["gpu_id"]),
            base_latency=float(o["base_latency_s"]), latency_slo=float(o["latency_slo_s"]),
            qps_series=tuple(series), profile_by_qps=tuple(profiles)))

    offline = []
    for o in doc["offline"]:
        rec = f"offline workload '{o.get('id', '?')}'"
        _require(rec, o, ("id", "submit_s", "work_s", "profile"))
        offline.append(OfflineWorkload(
            id=str(o["id"]), submit_time=float(o["submit_s"]),
            work_separate=float(o["work_s"]),
            profile=_profile_from_dict(rec, o["profile"])))

    return ClusterTrace(gpus=tuple(gpus), online=tuple(online), offline=tuple(offline),
                        horizon=float(doc["horizon_s"]))


def trace_to_dict(trace: ClusterTrace) -> dict:
    return {
        "gpus": [
            {"id": g.id, "gpu_type": g.gpu_type, "online_id": g.online_id}
            for g in trace.gpus
        ],
        "online": [
            {
                "id": w.id,
                "gpu_id": w.gpu_id,
                "base_latency_s": w.base_latency,
                "latency_slo_s": w.latency_slo,
                "qps_series": [{"t_s": t, "qps": q} for t, q in w.qps_series],
                "profiles": [dict(qps=q, **_profile_to_dict(p)) for q, p in w.profile_by_qps],
            }
            for w in trace.online
        ],
        "offline": [
            {
                "id": w.id,
                "submit_s": w.submit_time,
                "work_s": w.work_separate,
                "profile": _profile_to_dict(w.profile),
            }
            for w in trace.offline
        ],
        "horizon_s": trace.horizon,
    }


def load_trace(path: str) -> ClusterTrace:
    """Load and validate a trace file. Raises TraceValidationError with the
    offending record named."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise TraceValidationError(f"trace '{path}': invalid JSON ({e})") from e
    return trace_from_dict(doc)


def save_trace(trace: ClusterTrace, path: str) -> None:
    """Write a trace so that load_trace(save_trace(x)) == x."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(trace_to_dict(trace), f, indent=2, sort_keys=True)
        f.write("\n")
