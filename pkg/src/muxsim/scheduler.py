"""Placement of pending offline workloads onto healthy GPUs.

Each scheduling round sizes a candidate SM share per online workload from its
recent peak SM activity, scores every (online, offline) pairing with the
throughput predictor, and solves a maximum-weight bipartite matching to pick
the placements.  Baseline policies (no sharing, time slicing, priority time
slicing, fixed shares, random matching) live here too so simulation runs can
swap them in behind one interface.
"""

import math
import random
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .core import OfflineWorkload, OnlineWorkload, WorkloadProfile
from .gpu_state import HealthState
from .matching import BipartiteGraph, max_weight_matching, random_maximal_matching
from .predictor import PredictionTable, predict
from .throttle import check_mem_alloc

POLICIES = (
    "muxflow",              # dynamic shares + predictor-weighted optimal matching
    "online_only",          # never place offline workloads
    "time_sharing",         # co-locate with equal time slices
    "pb_time_sharing",      # co-locate, online gets strict priority
    "muxflow_fixed_sm",     # matching as muxflow but a constant SM share
    "muxflow_random_match", # dynamic shares but random maximal matching
)


class SchedulingAborted(RuntimeError):
    """A scheduling round failed (e.g. predictor error); keep the previous plan."""


@dataclass(frozen=True)
class SchedulerConfig:
    interval: float = 900.0     # seconds between scheduling rounds
    min_sm: float = 0.10        # shares below this mean "do not share"
    max_sm: float = 1.0         # cap on any granted share
    headroom: float = 0.05      # SM fraction reserved against prediction error
    quantum: float = 0.05       # granted shares are multiples of this
    policy: str = "muxflow"
    fixed_sm: float = 0.40      # share used by the muxflow_fixed_sm policy
    mem_quota: float = 0.40     # offline memory admission limit, fraction

    def __post_init__(self):
        if self.interval <= 0.0:
            raise ValueError("interval must be > 0")
        if not 0.0 < self.min_sm <= self.max_sm <= 1.0:
            raise ValueError("require 0 < min_sm <= max_sm <= 1")
        if not 0.0 <= self.headroom < 1.0:
            raise ValueError("headroom must be in [0, 1)")
        if not 0.0 < self.quantum <= 1.0:
            raise ValueError("quantum must be in (0, 1]")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if not 0.0 < self.fixed_sm <= self.max_sm:
            raise ValueError("require 0 < fixed_sm <= max_sm")
        if not 0.0 <= self.mem_quota <= 1.0:
            raise ValueError("mem_quota must be in [0, 1]")


@dataclass(frozen=True)
class Assignment:
    """One round's placement plan: (gpu, online, offline, share) plus leftovers."""

    pairs: Tuple[Tuple[str, str, str, float], ...]
    unplaced: Tuple[str, ...]

    def __post_init__(self):
        gpus = [p[0] for p in self.pairs]
        offs = [p[2] for p in self.pairs]
        if len(set(gpus)) != len(gpus):
            raise ValueError("a GPU appears in more than one pair")
        if len(set(offs)) != len(offs):
            raise ValueError("an offline workload appears in more than one pair")
        for gpu_id, online_id, offline_id, sm in self.pairs:
            if not 0.0 < sm <= 1.0:
                raise ValueError(f"pair ({gpu_id},{online_id},{offline_id}) share {sm} outside (0, 1]")
        if set(offs) & set(self.unplaced):
            raise ValueError("an offline workload is both placed and unplaced")

    def by_offline(self) -> Dict[str, Tuple[str, float]]:
        """offline_id -> (gpu_id, sm_pct) for quick diffing."""
        return {off: (gpu, sm) for gpu, _onl, off, sm in self.pairs}


@dataclass(frozen=True)
class Action:
    """One lifecycle step needed to move from the previous plan to the next."""

    kind: str                       # keep | start | stop | migrate
    offline_id: str
    gpu_id: Optional[str] = None    # target GPU (None for stop)
    from_gpu: Optional[str] = None  # source GPU for migrate


def peak_online_profile(online: OnlineWorkload, start: float, end: float) -> WorkloadProfile:
    """Profile with the highest SM activity over the window [start, end].

    The trailing peak is the conservative stand-in for next-interval demand:
    service load moves smoothly on the scale of minutes, so the recent peak
    upper-bounds the near future.  Ties resolve to the earliest knot.
    """
    if end < 0.0:
        raise ValueError("window must overlap [0, horizon]")
    start = max(0.0, start)
    best = online.profile_for_qps(online.qps_at(start))
    for t, qps in online.qps_series:
        if start < t <= end:
            prof = online.profile_for_qps(qps)
            if prof.sm_activity > best.sm_activity:
                best = prof
    return best


def quantize_share(x: float, quantum: float) -> float:
    """Round a share down to a quantum multiple (tiny epsilon guards float noise)."""
    return math.floor(x / quantum + 1e-6) * quantum


def dynamic_sm(online: OnlineWorkload, now: float, cfg: SchedulerConfig) -> float:
    """SM share to offer next to this online workload's GPU, 0 meaning no sharing.

    share = clamp(1 - predicted_peak_sm - headroom, 0, max_sm), quantized down;
    anything below min_sm collapses to 0.
    """
    d = peak_online_profile(online, now - cfg.interval, now).sm_activity
    raw = 1.0 - d - cfg.headroom
    raw = min(max(raw, 0.0), cfg.max_sm)
    share = quantize_share(raw, cfg.quantum)
    if share < cfg.min_sm:
        return 0.0
    return share


def _admissible(pending: Sequence[OfflineWorkload], quota: float) -> list:
    """Pending offline workloads whose memory request fits the offline quota."""
    return [v for v in pending if check_mem_alloc(0.0, v.profile.mem_fraction, quota)]


def _matching_policy_schedule(online_set: Sequence[OnlineWorkload],
                              offline_pending: Sequence[OfflineWorkload],
                              gpu_states: Mapping[str, HealthState],
                              table: PredictionTable,
                              cfg: SchedulerConfig,
                              now: float,
                              rng: Optional[random.Random]) -> Assignment:
    online_sorted = sorted(online_set, key=lambda w: w.id)
    pending_sorted = sorted(offline_pending, key=lambda w: w.id)
    candidates = _admissible(pending_sorted, cfg.mem_quota)

    shares: Dict[str, float] = {}
    peaks: Dict[str, WorkloadProfile] = {}
    eligible = []
    for u in online_sorted:
        if gpu_states.get(u.gpu_id) is not HealthState.HEALTHY:
            continue
        if cfg.policy == "muxflow_fixed_sm":
            share = cfg.fixed_sm
            peak = peak_online_profile(u, now - cfg.interval, now)
        else:
            share = dynamic_sm(u, now, cfg)
            peak = peak_online_profile(u, now - cfg.interval, now)
        if share <= 0.0:
            continue
        shares[u.id] = share
        peaks[u.id] = peak
        eligible.append(u)

    weights: Dict[Tuple[str, str], float] = {}
    try:
        for u in eligible:
            for v in candidates:
                w = predict(table, peaks[u.id], v.profile, shares[u.id])
                if w > 0.0:
                    weights[(u.id, v.id)] = w
    except Exception as e:
        raise SchedulingAborted(f"predictor failed: {e}") from e

    graph = BipartiteGraph(left=tuple(u.id for u in eligible),
                           right=tuple(v.id for v in candidates),
                           weights=weights)
    if cfg.policy == "muxflow_random_match":
        matched = random_maximal_matching(graph, rng if rng is not None else random.Random(0))
    else:
        matched = max_weight_matching(graph)

    gpu_of = {u.id: u.gpu_id for u in online_sorted}
    pairs = tuple(sorted((gpu_of[uid], uid, vid, shares[uid]) for uid, vid in matched.pairs))
    placed = {vid for _uid, vid in matched.pairs}
    unplaced = tuple(v.id for v in pending_sorted if v.id not in placed)
    return Assignment(pairs=pairs, unplaced=unplaced)


def _first_fit_schedule(online_set: Sequence[OnlineWorkload],
                        offline_pending: Sequence[OfflineWorkload],
                        gpu_states: Mapping[str, HealthState],
                        cfg: SchedulerConfig) -> Assignment:
    """Queue-order placement for the time-slicing baselines: one offline per
    healthy GPU, whole device granted during its slice."""
    pending_sorted = sorted(offline_pending, key=lambda w: (w.submit_time, w.id))
    queue = [v for v in pending_sorted if check_mem_alloc(0.0, v.profile.mem_fraction, cfg.mem_quota)]
    pairs = []
    taken = set()
    for u in sorted(online_set, key=lambda w: w.gpu_id):
        if gpu_states.get(u.gpu_id) is not HealthState.HEALTHY:
            continue
        if not queue:
            break
        v = queue.pop(0)
        taken.add(v.id)
        pairs.append((u.gpu_id, u.id, v.id, 1.0))
    unplaced = tuple(v.id for v in sorted(offline_pending, key=lambda w: w.id)
                     if v.id not in taken)
    return Assignment(pairs=tuple(sorted(pairs)), unplaced=unplaced)


def schedule(online_set: Sequence[OnlineWorkload],
             offline_pending: Sequence[OfflineWorkload],
             gpu_states: Mapping[str, HealthState],
             table: Optional[PredictionTable],
             cfg: SchedulerConfig,
             now: float,
             rng: Optional[random.Random] = None) -> Assignment:
    """Run one scheduling round over a cluster snapshot.

    Callers pass the offline workloads that may be (re)placed this round and
    the health state of every GPU hosting an online workload.  Only Healthy
    GPUs receive placements.  Raises SchedulingAborted if the predictor fails,
    in which case the previous assignment stays in force.
    """
    if cfg.policy == "online_only":
        return Assignment(pairs=(), unplaced=tuple(sorted(v.id for v in offline_pending)))
    if cfg.policy in ("time_sharing", "pb_time_sharing"):
        return _first_fit_schedule(online_set, offline_pending, gpu_states, cfg)
    if table is None:
        raise SchedulingAborted("no prediction table supplied")
    return _matching_policy_schedule(online_set, offline_pending, gpu_states,
                                     table, cfg, now, rng)


def reschedule_actions(prev: Assignment, new: Assignment) -> Tuple[Action, ...]:
    """Diff two assignments into keep / start / stop / migrate steps.

    A pair that stays on its GPU is a keep even when its share changed
    (re-partitioning in place is free); only cross-GPU moves restart.
    """
    before = prev.by_offline()
    after = new.by_offline()
    actions = []
    for off in sorted(set(before) | set(after)):
        b = before.get(off)
        a = after.get(off)
        if b is not None and a is not None:
            if b[0] == a[0]:
                actions.append(Action(kind="keep", offline_id=off, gpu_id=a[0]))
            else:
                actions.append(Action(kind="migrate", offline_id=off,
                                      gpu_id=a[0], from_gpu=b[0]))
        elif a is not None:
            actions.append(Action(kind="start", offline_id=off, gpu_id=a[0]))
        else:
            actions.append(Action(kind="stop", offline_id=off, from_gpu=b[0]))
    return tuple(actions)
