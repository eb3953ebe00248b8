"""Per-GPU health state machine with hysteresis and exponential backoff.

States: Init, Healthy, Unhealthy, Overlimit, Disabled. Offline placements are
only allowed on Healthy GPUs; entering Overlimit evicts the offline workload
and starts a dwell timer whose length doubles with every Overlimit entry in
the trailing two-hour window. Disabled is administrative and absorbing.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List


class HealthState(Enum):
    INIT = "init"
    HEALTHY = "healthy"
    UNHEALTHY = "unhealthy"
    OVERLIMIT = "overlimit"
    DISABLED = "disabled"


class StepAction(Enum):
    NONE = "none"
    FORBID_SCHEDULING = "forbid_scheduling"
    EVICT_OFFLINE = "evict_offline"


@dataclass(frozen=True)
class MetricSample:
    """One monitor observation (window-averaged in the simulator)."""

    timestamp: float     # seconds
    gpu_util: float      # temporal busy fraction
    sm_activity: float   # spatial SM busy fraction
    mem_usage: float     # fraction of device memory in use
    sm_clock: float      # MHz


@dataclass(frozen=True)
class Thresholds:
    """Per-metric bounds for the three severity levels plus backoff shape.

    Upper-bound metrics breach when they exceed the bound; the clock breaches
    when it falls below the given fraction of max_sm_clock. Healthy-return
    bounds must be strictly less severe than Unhealthy, Unhealthy than
    Overlimit. gpu_util defaults sit above the reachable range: concurrent
    sharing saturates temporal utilization in normal operation, so by default
    that channel carries no signal (it stays fully configurable).
    """

    max_sm_clock: float = 1590.0

    unhealthy_gpu_util: float = 1.01
    unhealthy_sm_activity: float = 0.95
    unhealthy_mem_usage: float = 0.90
    unhealthy_clock_frac: float = 0.84

    overlimit_gpu_util: float = 1.02
    overlimit_sm_activity: float = 0.98
    overlimit_mem_usage: float = 0.95
    overlimit_clock_frac: float = 0.70

    healthy_gpu_util: float = 1.00
    healthy_sm_activity: float = 0.85
    healthy_mem_usage: float = 0.85
    healthy_clock_frac: float = 0.85

    base_dwell: float = 60.0      # seconds, first Overlimit dwell
    backoff_base: float = 2.0     # dwell multiplier per repeat entry
    window: float = 7200.0        # trailing window for counting entries

    def __post_init__(self):
        for name in ("gpu_util", "sm_activity", "mem_usage"):
            hr = getattr(self, f"healthy_{name}")
            uh = getattr(self, f"unhealthy_{name}")
            ol = getattr(self, f"overlimit_{name}")
            if not hr < uh < ol:
                raise ValueError(
                    f"{name} bounds must satisfy healthy < unhealthy < overlimit, "
                    f"got {hr} / {uh} / {ol}")
        if not self.healthy_clock_frac > self.unhealthy_clock_frac > self.overlimit_clock_frac > 0:
            raise ValueError(
                "clock fractions must satisfy healthy > unhealthy > overlimit > 0, got "
                f"{self.healthy_clock_frac} / {self.unhealthy_clock_frac} / {self.overlimit_clock_frac}")
        if self.max_sm_clock <= 0 or self.base_dwell <= 0 or self.window <= 0:
            raise ValueError("max_sm_clock, base_dwell and window must be > 0")
        if self.backoff_base < 1.0:
            raise ValueError("backoff_base must be >= 1")

    def _breach(self, m: MetricSample, level: str) -> bool:
        return (m.gpu_util > getattr(self, f"{level}_gpu_util")
                or m.sm_activity > getattr(self, f"{level}_sm_activity")
                or m.mem_usage > getattr(self, f"{level}_mem_usage")
                or m.sm_clock < getattr(self, f"{level}_clock_frac") * self.max_sm_clock)

    def breaches_unhealthy(self, m: MetricSample) -> bool:
        return self._breach(m, "unhealthy")

    def breaches_overlimit(self, m: MetricSample) -> bool:
        return self._breach(m, "overlimit")

    def within_healthy_return(self, m: MetricSample) -> bool:
        return not self._breach(m, "healthy")


@dataclass
class GpuState:
    """Mutable health record for one GPU."""

    state: HealthState = HealthState.INIT
    last_timestamp: float = -math.inf
    overlimit_until: float = 0.0
    overlimit_entries: List[float] = field(default_factory=list)

    def step(self, m: MetricSample, th: Thresholds) -> StepAction:
        """Advance the machine with one sample; returns the edge-triggered action.

        Raises on samples older than the latest observation and on stepping a
        Disabled GPU (Disabled is absorbing until manual re-enable).
        """
        if self.state is HealthState.DISABLED:
            raise ValueError("cannot step a Disabled GPU")
        if m.timestamp < self.last_timestamp:
            raise ValueError(
                f"sample at {m.timestamp} is earlier than latest observation {self.last_timestamp}")
        self.last_timestamp = m.timestamp
        now = m.timestamp
        self._prune(now, th)

        if self.state is HealthState.INIT:
            # First sample completes initialization; thresholds still apply below.
            self.state = HealthState.HEALTHY

        if self.state is HealthState.HEALTHY:
            if th.breaches_overlimit(m):
                self._enter_overlimit(now, th)
                return StepAction.EVICT_OFFLINE
            if th.breaches_unhealthy(m):
                self.state = HealthState.UNHEALTHY
                return StepAction.FORBID_SCHEDULING
            return StepAction.NONE

        if self.state is HealthState.UNHEALTHY:
            if th.breaches_overlimit(m):
                self._enter_overlimit(now, th)
                return StepAction.EVICT_OFFLINE
            if th.within_healthy_return(m):
                self.state = HealthState.HEALTHY
            return StepAction.NONE

        # Overlimit: hold until the dwell expires and the overload is gone.
        if now >= self.overlimit_until and not th.breaches_overlimit(m):
            self.state = HealthState.UNHEALTHY
            return StepAction.FORBID_SCHEDULING
        return StepAction.NONE

    def _prune(self, now: float, th: Thresholds) -> None:
        cutoff = now - th.window
        self.overlimit_entries = [t for t in self.overlimit_entries if t > cutoff]

    def _enter_overlimit(self, now: float, th: Thresholds) -> None:
        self.overlimit_entries.append(now)
        k = len(self.overlimit_entries)   # entries inside the window, this one included
        dwell = th.base_dwell * th.backoff_base ** (k - 1)
        self.overlimit_until = now + dwell
        self.state = HealthState.OVERLIMIT

    def disable(self) -> None:
        self.state = HealthState.DISABLED

    def reenable(self) -> None:
        """Administrative re-enable: back to Init, awaiting a fresh sample."""
        if self.state is not HealthState.DISABLED:
            raise ValueError("reenable is only valid from Disabled")
        self.state = HealthState.INIT
        self.overlimit_until = 0.0
