"""Deterministic event-driven simulation of a space-shared GPU cluster.

The engine advances a fluid model: between discontinuities (QPS knots,
scheduling rounds, faults, evictions, completions) every rate on a GPU is
constant, so request latency, offline progress, and the monitoring metrics
integrate in closed form.  The kernel-launch control loop is stepped
explicitly at its own tick after each discontinuity until its state stops
changing (or a settle budget runs out), then frozen — with constant inputs
the discrete update is stationary once the state repeats exactly.

Workload completions are detected at their exact crossing times inside the
integration, so the only queued events are arrivals, faults, metric samples,
evictions, and scheduling rounds.
"""

import heapq
import json
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .core import ClusterTrace, OfflineWorkload, OnlineWorkload, WorkloadProfile
from .gpu_state import GpuState, HealthState, MetricSample, StepAction, Thresholds
from .predictor import PredictionTable, build_table_from_model, load_table
from .scheduler import (Assignment, SchedulerConfig, SchedulingAborted,
                        reschedule_actions, schedule)
from .throttle import (ClockParams, PidParams, PidState, check_mem_alloc,
                       gpu_load, pid_step)

# Policies that size SM shares and run the kernel-launch throttle.
MATCHING_FAMILY = ("muxflow", "muxflow_fixed_sm", "muxflow_random_match")

# Explicit control-loop stepping budget after each discontinuity, in sim
# ticks; past it the loop is frozen until inputs change (the residual drift
# per tick is below 1e-6 in throttle units by then).
SETTLE_BUDGET_SIM_TICKS = 20.0

EVENT_PRIORITY = {
    "offline_arrival": 0,
    "offline_completion": 1,
    "fault_injection": 2,
    "metric_sample": 3,
    "eviction": 4,
    "scheduling_round": 5,
    "control_tick": 6,
}


@dataclass(frozen=True)
class SimEvent:
    """A queued simulation event; ties at equal time break by kind priority.

    offline_completion and control_tick are reserved kinds: the engine
    resolves completions at exact crossing times and steps the control loop
    inline during integration, so they never enter the queue, but they keep
    their place in the ordering contract for logs and external tooling.
    """

    time: float
    kind: str
    payload: tuple = ()

    def __post_init__(self):
        if self.kind not in EVENT_PRIORITY:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not math.isfinite(self.time):
            raise ValueError(f"event time must be finite, got {self.time}")

    def sort_key(self, seq: int) -> Tuple[float, int, int]:
        return (self.time, EVENT_PRIORITY[self.kind], seq)


@dataclass(frozen=True)
class InterferenceParams:
    """Ground-truth interference shape for one GPU under space-sharing."""

    load_knee: float = 0.5           # total load where the SM clock starts derating
    clock_slope: float = 0.18        # derating depth across (knee, 1]
    clock_floor: float = 0.6         # lowest clock fraction
    contention_penalty: float = 2.0  # latency weight on SM overlap
    checkpoint_restart_cost: float = 60.0  # s of zero progress on every non-first start
    control_tick: float = 0.1        # s between control-loop steps
    sim_tick: float = 1.0            # s; scales the explicit control settle budget
    online_busy_factor: float = 1.8  # busy-time fraction per unit online SM activity
    stall_penalty: float = 10.0      # latency multiplier while a device resets

    def __post_init__(self):
        if not 0.0 < self.load_knee <= 1.0:
            raise ValueError("load_knee must be in (0, 1]")
        if not 0.0 <= self.clock_slope <= 1.0:
            raise ValueError("clock_slope must be in [0, 1]")
        if not 0.0 < self.clock_floor <= 1.0:
            raise ValueError("clock_floor must be in (0, 1]")
        if self.contention_penalty < 0.0:
            raise ValueError("contention_penalty must be >= 0")
        if self.checkpoint_restart_cost < 0.0:
            raise ValueError("checkpoint_restart_cost must be >= 0")
        if self.control_tick <= 0.0 or self.sim_tick <= 0.0:
            raise ValueError("ticks must be > 0")
        if self.online_busy_factor < 0.0:
            raise ValueError("online_busy_factor must be >= 0")
        if self.stall_penalty < 1.0:
            raise ValueError("stall_penalty must be >= 1")


@dataclass(frozen=True)
class FaultModel:
    """Fault arrivals against resident offline workloads."""

    rate_per_hour: float = 0.02     # faults per resident offline-workload hour
    sigint_fraction: float = 0.99   # share of faults that are plain termination signals
    graceful_exit_enabled: bool = True
    reset_downtime: float = 30.0    # s the device stalls when an error propagates

    def __post_init__(self):
        if self.rate_per_hour < 0.0:
            raise ValueError("rate_per_hour must be >= 0")
        if not 0.0 <= self.sigint_fraction <= 1.0:
            raise ValueError("sigint_fraction must be in [0, 1]")
        if self.reset_downtime < 0.0:
            raise ValueError("reset_downtime must be >= 0")


def _linspace(a: float, b: float, n: int) -> Tuple[float, ...]:
    if n == 1:
        return (a,)
    return tuple(a + (b - a) * i / (n - 1) for i in range(n))


DEFAULT_TABLE_ONLINE_SM = _linspace(0.0, 1.0, 9)
DEFAULT_TABLE_OFFLINE_SM = _linspace(0.5, 1.0, 9)
DEFAULT_TABLE_SM_PCT = _linspace(0.0, 1.0, 10)


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs besides the trace and the seed."""

    scheduler: SchedulerConfig = SchedulerConfig()
    interference: InterferenceParams = InterferenceParams()
    faults: FaultModel = FaultModel()
    clock: ClockParams = ClockParams()
    pid: PidParams = PidParams()
    thresholds: Thresholds = Thresholds()
    metric_sample_period: float = 30.0   # health-sample cadence, s
    timeseries_period: float = 300.0     # report downsampling bucket, s
    table_online_sm: Tuple[float, ...] = DEFAULT_TABLE_ONLINE_SM
    table_offline_sm: Tuple[float, ...] = DEFAULT_TABLE_OFFLINE_SM
    table_sm_pct: Tuple[float, ...] = DEFAULT_TABLE_SM_PCT
    table_path: Optional[str] = None     # load a table instead of building one

    def __post_init__(self):
        if self.metric_sample_period <= 0.0 or self.timeseries_period <= 0.0:
            raise ValueError("periods must be > 0")
        ratio = self.timeseries_period / self.metric_sample_period
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("timeseries_period must be a multiple of metric_sample_period")


def ground_truth_step(d: float, s: float, throttle_level: float,
                      p: InterferenceParams,
                      offline_sm_demand: float) -> Tuple[float, float, float, float]:
    """One instant of the interference model.

    d: online SM activity; s: SM share granted to the offline workload;
    offline_sm_demand: the offline workload's exclusive-run SM activity.
    Returns (online_latency_mult, offline_rate, sm_clock_frac, total_load).
    Inputs are clamped to [0, 1].
    """
    d = min(1.0, max(0.0, d))
    s = min(1.0, max(0.0, s))
    thr = min(1.0, max(0.0, throttle_level))
    dem = min(1.0, max(0.0, offline_sm_demand))
    occ = min((1.0 - thr) * s, dem)     # SMs the offline workload actually holds
    overlap = max(0.0, d + occ - 1.0)   # contention spillover past the device
    load = min(1.0, d + occ)
    c = _clock_frac(load, p)
    mult = (1.0 / c) * (1.0 + p.contention_penalty * overlap)
    rate = 0.0 if dem <= 0.0 else min(1.0, occ / dem) * c
    return mult, rate, c, load


def _clock_frac(load: float, p: InterferenceParams) -> float:
    if load <= p.load_knee:
        return 1.0
    derate = p.clock_slope * (load - p.load_knee) / (1.0 - p.load_knee)
    return max(p.clock_floor, 1.0 - derate)


def offline_rate_model(online_sm: float, offline_sm: float, sm_pct: float,
                       p: InterferenceParams) -> float:
    """Unthrottled normalized offline throughput; the predictor's ground truth."""
    return ground_truth_step(online_sm, sm_pct, 0.0, p, offline_sm)[1]


def default_table(cfg: SimConfig) -> PredictionTable:
    """Tabulate the ground-truth model over the configured grid."""
    p = cfg.interference
    return build_table_from_model(
        lambda x, y, z: offline_rate_model(x, y, z, p),
        cfg.table_online_sm, cfg.table_offline_sm, cfg.table_sm_pct,
        gpu_type="default")


def oversold_gpu(entries: Sequence[Tuple[float, float]]) -> float:
    """Aggregate exclusive-equivalent compute delivered to offline workloads.

    Each entry is (separate-execution seconds completed, wall seconds from
    first start); censored workloads contribute their partial progress and
    elapsed time.  Workloads that never started contribute nothing; with no
    entries the ratio is defined as 0.
    """
    num = 0.0
    den = 0.0
    for t_sep, t_real in entries:
        if t_sep < 0.0 or t_real < 0.0:
            raise ValueError("oversold entries must be non-negative")
        num += t_sep
        den += t_real
    if den <= 0.0:
        return 0.0
    return min(1.0, num / den)


@dataclass(frozen=True)
class RunReport:
    """Outcome of one simulation run; serializes to a stable JSON document."""

    policy: str
    seed: int
    horizon: float
    avg_latency_s: Dict[str, float]       # per online workload
    p99_latency_s: Dict[str, float]       # per online workload, time-weighted
    avg_jct_s: float                      # completed offline workloads; 0 when none
    makespan_s: float                     # last completion; 0 when none
    oversold_gpu: float
    injected_fault_count: int
    propagated_error_count: int
    eviction_count: int
    restart_count: int
    total_offline: int
    started_offline: int
    completed_offline: int
    offline_detail: Dict[str, Dict]       # per offline workload lifecycle summary
    timeseries: Dict[str, List[Dict[str, float]]]  # per GPU, downsampled window means

    def to_dict(self) -> Dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "horizon_s": self.horizon,
            "online": {
                wid: {"avg_latency_s": self.avg_latency_s[wid],
                      "p99_latency_s": self.p99_latency_s[wid]}
                for wid in sorted(self.avg_latency_s)
            },
            "avg_jct_s": self.avg_jct_s,
            "makespan_s": self.makespan_s,
            "oversold_gpu": self.oversold_gpu,
            "counters": {
                "injected_faults": self.injected_fault_count,
                "propagated_errors": self.propagated_error_count,
                "evictions": self.eviction_count,
                "restarts": self.restart_count,
                "total_offline": self.total_offline,
                "started_offline": self.started_offline,
                "completed_offline": self.completed_offline,
            },
            "offline": self.offline_detail,
            "timeseries": self.timeseries,
        }


def report_to_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def save_report(report: RunReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(report_to_json(report))


class _OnlineRt:
    """Engine-side state for one online workload."""

    __slots__ = ("w", "changes", "idx", "lat_integral", "lat_weights")

    def __init__(self, w: OnlineWorkload, horizon: float):
        self.w = w
        changes: List[Tuple[float, WorkloadProfile]] = []
        first = w.profile_for_qps(w.qps_at(0.0))
        changes.append((0.0, first))
        for t, qps in w.qps_series:
            if t <= 0.0 or t > horizon:
                continue
            prof = w.profile_for_qps(qps)
            if prof != changes[-1][1]:
                changes.append((t, prof))
        self.changes = changes
        self.idx = 0
        self.lat_integral = 0.0
        self.lat_weights: Dict[float, float] = {}   # latency value -> seconds spent there

    def profile(self) -> WorkloadProfile:
        return self.changes[self.idx][1]


class _OfflineRt:
    """Engine-side lifecycle record for one offline workload."""

    __slots__ = ("w", "state", "progress_work", "first_start", "completion",
                 "restarts", "started_ever", "gpu")

    def __init__(self, w: OfflineWorkload):
        self.w = w
        self.state = "unsubmitted"      # unsubmitted | queued | running | done
        self.progress_work = 0.0        # separate-execution seconds completed
        self.first_start: Optional[float] = None
        self.completion: Optional[float] = None
        self.restarts = 0
        self.started_ever = False
        self.gpu: Optional[str] = None


class _GpuRt:
    """Engine-side state for one GPU."""

    __slots__ = ("id", "online", "health", "off", "share", "pid", "settled",
                 "next_tick", "ticks_left", "restore_until", "stall_until",
                 "fault_token", "t", "win_start", "win_util", "win_sm",
                 "win_mem", "win_clock", "bkt_start", "b_dur", "b_util",
                 "b_sm", "b_mem", "b_clock", "rows")

    def __init__(self, gpu_id: str, online: Optional[_OnlineRt]):
        self.id = gpu_id
        self.online = online
        self.health = GpuState()
        self.off: Optional[_OfflineRt] = None
        self.share = 0.0
        self.pid = PidState()
        self.settled = True
        self.next_tick = 0.0
        self.ticks_left = 0
        self.restore_until = 0.0
        self.stall_until = 0.0
        self.fault_token = 0
        self.t = 0.0
        self.win_start = 0.0
        self.win_util = self.win_sm = self.win_mem = self.win_clock = 0.0
        self.bkt_start = 0.0
        self.b_dur = self.b_util = self.b_sm = self.b_mem = self.b_clock = 0.0
        self.rows: List[Dict[str, float]] = []


class _Engine:
    def __init__(self, trace: ClusterTrace, cfg: SimConfig, seed: int,
                 table: PredictionTable):
        self.trace = trace
        self.cfg = cfg
        self.scfg = cfg.scheduler
        self.policy = cfg.scheduler.policy
        self.seed = seed
        self.table = table
        self.rng_faults = random.Random(f"{seed}-faults")
        self.rng_match = random.Random(f"{seed}-match")
        self.heap: List[Tuple[Tuple[float, int, int], SimEvent]] = []
        self.seq = 0
        ip = cfg.interference
        self.settle_cap = max(1, int(round(
            SETTLE_BUDGET_SIM_TICKS * ip.sim_tick / ip.control_tick)))

        online_by_gpu: Dict[str, _OnlineRt] = {}
        self.online_rt: Dict[str, _OnlineRt] = {}
        for w in trace.online:
            rt = _OnlineRt(w, trace.horizon)
            self.online_rt[w.id] = rt
            online_by_gpu[w.gpu_id] = rt
        self.gpu_order = sorted(g.id for g in trace.gpus)
        self.gpus: Dict[str, _GpuRt] = {
            gid: _GpuRt(gid, online_by_gpu.get(gid)) for gid in self.gpu_order}
        self.offline_rt: Dict[str, _OfflineRt] = {
            w.id: _OfflineRt(w) for w in trace.offline}
        self.pending: Dict[str, _OfflineRt] = {}

        self.injected_faults = 0
        self.propagated_errors = 0
        self.evictions = 0
        self.restart_count = 0

    # ---------- event queue ----------

    def _push(self, time: float, kind: str, payload: tuple = ()) -> None:
        ev = SimEvent(time=time, kind=kind, payload=payload)
        heapq.heappush(self.heap, (ev.sort_key(self.seq), ev))
        self.seq += 1

    # ---------- instantaneous rates ----------

    def _rates(self, g: _GpuRt) -> Tuple[float, float, float, float, float, float]:
        """(latency_mult, offline_rate, gpu_util, sm_activity, clock_frac, mem)
        at g's current cursor time, all constant until the next boundary."""
        ip = self.cfg.interference
        if g.online is not None:
            prof = g.online.profile()
            d = prof.sm_activity
            mem = prof.mem_fraction
        else:
            d = 0.0
            mem = 0.0
        off = g.off
        dem = off.w.profile.sm_activity if off is not None else 0.0
        offmem = off.w.profile.mem_fraction if off is not None else 0.0
        pol = self.policy
        if pol in MATCHING_FAMILY or pol == "online_only":
            s = g.share if off is not None else 0.0
            thr = g.pid.throttle_level
            mult, rate, cfrac, load = ground_truth_step(d, s, thr, ip, dem)
            occ = min((1.0 - thr) * s, dem)
            bon = min(1.0, ip.online_busy_factor * d)
            util = 1.0 - (1.0 - bon) * (1.0 - occ)
            sm = load
        elif pol == "time_sharing":
            bon = min(1.0, ip.online_busy_factor * d)
            if off is not None:
                mult, rate = 2.0, 0.5          # two residents, equal slices
                sm = min(1.0, 0.5 * (d + dem))
                util = 0.5 * bon + 0.5
            else:
                mult, rate, sm, util = 1.0, 0.0, d, bon
            cfrac = _clock_frac(sm, ip)
        else:  # pb_time_sharing: online strict priority, offline fills idle time
            bon = min(1.0, ip.online_busy_factor * d)
            if off is not None:
                mult, rate = 1.02, max(0.0, 1.0 - bon)
                sm = min(1.0, d + (1.0 - bon) * dem)
                util = 1.0
            else:
                mult, rate, sm, util = 1.0, 0.0, d, bon
            cfrac = _clock_frac(sm, ip)
        if off is not None and g.t < g.restore_until:
            rate = 0.0                         # restoring a checkpoint
        if g.t < g.stall_until:
            mult = ip.stall_penalty            # device reset in progress
        return mult, rate, util, sm, cfrac, min(1.0, mem + offmem)

    # ---------- time advancement ----------

    def _advance(self, g: _GpuRt, to_t: float) -> None:
        while g.t < to_t:
            t = g.t
            seg_end = to_t
            onl = g.online
            if onl is not None and onl.idx + 1 < len(onl.changes):
                nxt = onl.changes[onl.idx + 1][0]
                if nxt < seg_end:
                    seg_end = nxt
            if t < g.stall_until < seg_end:
                seg_end = g.stall_until
            if g.off is not None and t < g.restore_until < seg_end:
                seg_end = g.restore_until
            if not g.settled and g.next_tick < seg_end:
                seg_end = g.next_tick

            if seg_end > t:
                mult, rate, util, sm, cfrac, mem = self._rates(g)
                dt = seg_end - t
                if g.off is not None and rate > 0.0:
                    rem = g.off.w.work_separate - g.off.progress_work
                    tc = t + rem / rate
                    if tc <= seg_end:
                        self._accumulate(g, tc - t, mult, rate, util, sm, cfrac, mem)
                        g.t = tc
                        g.off.progress_work = g.off.w.work_separate
                        self._complete(g, tc)
                        continue
                self._accumulate(g, dt, mult, rate, util, sm, cfrac, mem)
                g.t = seg_end

            if onl is not None:
                moved = False
                while (onl.idx + 1 < len(onl.changes)
                       and onl.changes[onl.idx + 1][0] <= g.t):
                    onl.idx += 1
                    moved = True
                if moved:
                    self._unsettle(g)
            if not g.settled and g.next_tick <= g.t:
                self._pid_tick(g)

    def _accumulate(self, g: _GpuRt, dt: float, mult: float, rate: float,
                    util: float, sm: float, cfrac: float, mem: float) -> None:
        if dt <= 0.0:
            return
        if g.online is not None:
            lat = g.online.w.base_latency * mult
            g.online.lat_integral += lat * dt
            w = g.online.lat_weights
            w[lat] = w.get(lat, 0.0) + dt
        if g.off is not None and rate > 0.0:
            g.off.progress_work += rate * dt
        g.win_util += util * dt
        g.win_sm += sm * dt
        g.win_mem += mem * dt
        g.win_clock += cfrac * dt

    def _unsettle(self, g: _GpuRt) -> None:
        if g.off is None or self.policy not in MATCHING_FAMILY:
            g.settled = True
            return
        g.settled = False
        g.ticks_left = self.settle_cap
        g.next_tick = g.t + self.cfg.interference.control_tick

    def _pid_tick(self, g: _GpuRt) -> None:
        if g.off is None or self.policy not in MATCHING_FAMILY:
            g.settled = True
            return
        d = g.online.profile().sm_activity if g.online is not None else 0.0
        dem = g.off.w.profile.sm_activity
        _m, _r, cfrac, load = ground_truth_step(
            d, g.share, g.pid.throttle_level, self.cfg.interference, dem)
        u = gpu_load(load, cfrac * self.cfg.clock.c_h, self.cfg.clock)
        new = pid_step(g.pid, u, self.cfg.pid, dt=self.cfg.interference.control_tick)
        if new == g.pid:
            g.settled = True           # exact fixpoint: every later tick repeats
            return
        g.pid = new
        g.ticks_left -= 1
        if g.ticks_left <= 0:
            g.settled = True           # budget exhausted: freeze until inputs change
        else:
            g.next_tick += self.cfg.interference.control_tick

    # ---------- offline lifecycle ----------

    def _place(self, off: _OfflineRt, g: _GpuRt, share: float, now: float) -> None:
        if g.off is not None or g.online is None:
            raise RuntimeError(f"placement on unavailable GPU {g.id}")
        if not check_mem_alloc(0.0, off.w.profile.mem_fraction, self.scfg.mem_quota):
            raise RuntimeError(
                f"offline '{off.w.id}' memory {off.w.profile.mem_fraction} "
                f"exceeds quota {self.scfg.mem_quota}")
        g.off = off
        g.share = share
        off.gpu = g.id
        off.state = "running"
        if off.started_ever:
            off.restarts += 1
            self.restart_count += 1
            g.restore_until = now + self.cfg.interference.checkpoint_restart_cost
        else:
            g.restore_until = now
        off.started_ever = True
        if off.first_start is None:
            off.first_start = now
        g.pid = PidState()
        g.fault_token += 1
        self._unsettle(g)
        fm = self.cfg.faults
        if fm.rate_per_hour > 0.0:
            gap = self.rng_faults.expovariate(fm.rate_per_hour / 3600.0)
            self._push(now + gap, "fault_injection", (g.id, g.fault_token))

    def _release(self, g: _GpuRt) -> _OfflineRt:
        off = g.off
        g.off = None
        g.share = 0.0
        g.restore_until = 0.0
        g.fault_token += 1
        g.pid = PidState()
        g.settled = True
        off.gpu = None
        return off

    def _stop_offline(self, g: _GpuRt, requeue: bool) -> _OfflineRt:
        off = self._release(g)
        if requeue:
            off.state = "queued"
            self.pending[off.w.id] = off
        return off

    def _complete(self, g: _GpuRt, tc: float) -> None:
        off = self._release(g)
        off.state = "done"
        off.completion = tc

    # ---------- event handlers ----------

    def _on_arrival(self, t: float, off_id: str) -> None:
        off = self.offline_rt[off_id]
        off.state = "queued"
        self.pending[off_id] = off

    def _on_fault(self, t: float, gpu_id: str, token: int) -> None:
        g = self.gpus[gpu_id]
        if g.off is None or token != g.fault_token:
            return
        self._advance(g, t)
        if g.off is None:     # completed exactly at t during advancement
            return
        self.injected_faults += 1
        fm = self.cfg.faults
        is_signal = self.rng_faults.random() < fm.sigint_fraction
        self._stop_offline(g, requeue=True)
        if not (is_signal and fm.graceful_exit_enabled):
            # The shared context dies with the workload: the online side
            # serves nothing until the device resets.
            self.propagated_errors += 1
            if fm.reset_downtime > 0.0:
                g.stall_until = max(g.stall_until, t + fm.reset_downtime)

    def _on_sample(self, t: float) -> None:
        th = self.cfg.thresholds
        for gid in self.gpu_order:
            g = self.gpus[gid]
            self._advance(g, t)
            dur = t - g.win_start
            if dur > 0.0:
                util = g.win_util / dur
                sm = g.win_sm / dur
                mem = g.win_mem / dur
                cfrac = g.win_clock / dur
            else:
                _m, _r, util, sm, cfrac, mem = self._rates(g)
            sample = MetricSample(timestamp=t, gpu_util=min(1.0, util),
                                  sm_activity=min(1.0, sm),
                                  mem_usage=min(1.0, mem),
                                  sm_clock=cfrac * th.max_sm_clock)
            action = g.health.step(sample, th)
            g.b_dur += dur
            g.b_util += g.win_util
            g.b_sm += g.win_sm
            g.b_mem += g.win_mem
            g.b_clock += g.win_clock
            g.win_start = t
            g.win_util = g.win_sm = g.win_mem = g.win_clock = 0.0
            if t >= g.bkt_start + self.cfg.timeseries_period - 1e-9:
                self._flush_bucket(g, t)
            if action is StepAction.EVICT_OFFLINE and g.off is not None:
                self._push(t, "eviction", (gid, g.off.w.id))

    def _flush_bucket(self, g: _GpuRt, now: float) -> None:
        if g.b_dur > 0.0:
            g.rows.append({
                "t_s": g.bkt_start,
                "gpu_util": g.b_util / g.b_dur,
                "sm_activity": g.b_sm / g.b_dur,
                "mem_usage": g.b_mem / g.b_dur,
                "sm_clock_mhz": (g.b_clock / g.b_dur) * self.cfg.thresholds.max_sm_clock,
            })
        g.bkt_start = now
        g.b_dur = g.b_util = g.b_sm = g.b_mem = g.b_clock = 0.0

    def _on_eviction(self, t: float, gpu_id: str, off_id: str) -> None:
        g = self.gpus[gpu_id]
        if g.off is None or g.off.w.id != off_id:
            return
        self._advance(g, t)
        if g.off is None or g.off.w.id != off_id:
            return
        self.evictions += 1
        self._stop_offline(g, requeue=True)

    def _on_round(self, t: float) -> None:
        if self.policy == "online_only":
            return
        for gid in self.gpu_order:
            self._advance(self.gpus[gid], t)
        states = {gid: self.gpus[gid].health.state for gid in self.gpu_order}
        prev = self._live_assignment()

        if self.policy in MATCHING_FAMILY:
            frozen: List[Tuple[str, str, str, float]] = []
            candidates: List[OfflineWorkload] = []
            online_set: List[OnlineWorkload] = []
            for gid in self.gpu_order:
                g = self.gpus[gid]
                healthy = states[gid] is HealthState.HEALTHY
                if g.off is not None:
                    if healthy:
                        candidates.append(g.off.w)   # resident, re-matchable
                    else:
                        frozen.append((gid, g.online.w.id, g.off.w.id, g.share))
                if healthy and g.online is not None:
                    online_set.append(g.online.w)
            candidates.extend(self.pending[oid].w for oid in sorted(self.pending))
            try:
                result = schedule(online_set, candidates, states, self.table,
                                  self.scfg, t, rng=self.rng_match)
            except SchedulingAborted:
                return                     # keep the previous assignment
            nxt = Assignment(pairs=tuple(sorted(frozen + list(result.pairs))),
                             unplaced=())
        else:
            carried = []
            online_set = []
            for gid in self.gpu_order:
                g = self.gpus[gid]
                if g.off is not None:
                    carried.append((gid, g.online.w.id, g.off.w.id, g.share))
                elif states[gid] is HealthState.HEALTHY and g.online is not None:
                    online_set.append(g.online.w)
            queue = [self.pending[oid].w for oid in sorted(self.pending)]
            try:
                result = schedule(online_set, queue, states, self.table,
                                  self.scfg, t, rng=self.rng_match)
            except SchedulingAborted:
                return
            nxt = Assignment(pairs=tuple(sorted(carried + list(result.pairs))),
                             unplaced=())

        actions = reschedule_actions(prev, nxt)
        shares = nxt.by_offline()
        detached: Dict[str, _OfflineRt] = {}
        for a in actions:
            if a.kind == "stop":
                self._stop_offline(self.gpus[a.from_gpu], requeue=True)
            elif a.kind == "migrate":
                detached[a.offline_id] = self._stop_offline(
                    self.gpus[a.from_gpu], requeue=False)
        for a in actions:
            if a.kind == "start":
                off = self.pending.pop(a.offline_id)
                self._place(off, self.gpus[a.gpu_id], shares[a.offline_id][1], t)
            elif a.kind == "migrate":
                off = detached[a.offline_id]
                off.state = "queued"
                self._place(off, self.gpus[a.gpu_id], shares[a.offline_id][1], t)
            elif a.kind == "keep":
                g = self.gpus[a.gpu_id]
                new_share = shares[a.offline_id][1]
                if new_share != g.share:
                    g.share = new_share
                    self._unsettle(g)

    def _live_assignment(self) -> Assignment:
        pairs = []
        for gid in self.gpu_order:
            g = self.gpus[gid]
            if g.off is not None:
                pairs.append((gid, g.online.w.id, g.off.w.id, g.share))
        return Assignment(pairs=tuple(sorted(pairs)), unplaced=())

    # ---------- main loop ----------

    def execute(self) -> RunReport:
        horizon = self.trace.horizon
        for off in self.trace.offline:
            if off.submit_time <= horizon:
                self._push(off.submit_time, "offline_arrival", (off.id,))
        t = 0.0
        while t < horizon:
            self._push(t, "metric_sample", ())
            t += self.cfg.metric_sample_period
        self._push(horizon, "metric_sample", ())
        t = 0.0
        while t < horizon:
            self._push(t, "scheduling_round", ())
            t += self.scfg.interval

        while self.heap:
            _key, ev = heapq.heappop(self.heap)
            if ev.time > horizon:
                break
            kind = ev.kind
            if kind == "metric_sample":
                self._on_sample(ev.time)
            elif kind == "scheduling_round":
                self._on_round(ev.time)
            elif kind == "fault_injection":
                self._on_fault(ev.time, *ev.payload)
            elif kind == "eviction":
                self._on_eviction(ev.time, *ev.payload)
            elif kind == "offline_arrival":
                self._on_arrival(ev.time, *ev.payload)

        for gid in self.gpu_order:
            g = self.gpus[gid]
            self._advance(g, horizon)
            g.b_dur += horizon - g.win_start
            g.b_util += g.win_util
            g.b_sm += g.win_sm
            g.b_mem += g.win_mem
            g.b_clock += g.win_clock
            g.win_start = horizon
            g.win_util = g.win_sm = g.win_mem = g.win_clock = 0.0
            self._flush_bucket(g, horizon)
        return self._compile(horizon)

    def _compile(self, horizon: float) -> RunReport:
        avg_lat: Dict[str, float] = {}
        p99_lat: Dict[str, float] = {}
        for wid in sorted(self.online_rt):
            rt = self.online_rt[wid]
            avg_lat[wid] = rt.lat_integral / horizon if horizon > 0 else 0.0
            p99_lat[wid] = _weighted_p99(rt.lat_weights)

        jcts: List[float] = []
        completions: List[float] = []
        entries: List[Tuple[float, float]] = []
        detail: Dict[str, Dict] = {}
        started = completed = 0
        for oid in sorted(self.offline_rt):
            o = self.offline_rt[oid]
            if o.first_start is not None:
                started += 1
                if o.completion is not None:
                    completed += 1
                    jcts.append(o.completion - o.w.submit_time)
                    completions.append(o.completion)
                    entries.append((o.w.work_separate, o.completion - o.first_start))
                else:
                    entries.append((o.progress_work, horizon - o.first_start))
            detail[oid] = {
                "submit_s": o.w.submit_time,
                "work_s": o.w.work_separate,
                "completed": o.completion is not None,
                "first_start_s": o.first_start,
                "completion_s": o.completion,
                "jct_s": (o.completion - o.w.submit_time
                          if o.completion is not None else None),
                "progress": min(1.0, o.progress_work / o.w.work_separate),
                "restarts": o.restarts,
            }

        return RunReport(
            policy=self.policy,
            seed=self.seed,
            horizon=horizon,
            avg_latency_s=avg_lat,
            p99_latency_s=p99_lat,
            avg_jct_s=sum(jcts) / len(jcts) if jcts else 0.0,
            makespan_s=max(completions) if completions else 0.0,
            oversold_gpu=oversold_gpu(entries),
            injected_fault_count=self.injected_faults,
            propagated_error_count=self.propagated_errors,
            eviction_count=self.evictions,
            restart_count=self.restart_count,
            total_offline=len(self.offline_rt),
            started_offline=started,
            completed_offline=completed,
            offline_detail=detail,
            timeseries={gid: self.gpus[gid].rows for gid in self.gpu_order},
        )


def _weighted_p99(weights: Dict[float, float]) -> float:
    total = sum(weights.values())
    if total <= 0.0:
        return 0.0
    target = 0.99 * total
    acc = 0.0
    for lat in sorted(weights):
        acc += weights[lat]
        if acc >= target:
            return lat
    return max(weights)


def run(trace: ClusterTrace, cfg: Optional[SimConfig] = None, seed: int = 0) -> RunReport:
    """Simulate a trace to its horizon; deterministic given (trace, cfg, seed)."""
    if cfg is None:
        cfg = SimConfig()
    if cfg.table_path is not None:
        table = load_table(cfg.table_path)
    else:
        table = default_table(cfg)
    return _Engine(trace, cfg, seed, table).execute()
