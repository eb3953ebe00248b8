"""GPU-load throttle: clock-aware load metric, discrete PID, memory quota.

The load metric weighs SM activity by a clock factor so that a GPU whose SM
clock sags under pressure reads as more loaded than raw activity suggests.
A discrete PID drives a throttle level in [0, 1]; the effective offline SM
demand is (1 - throttle_level) x the assigned share.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ClockParams:
    """Clock-factor shape: steep below the knee clock t_sm, gentle above."""

    c_h: float = 1590.0            # max SM clock, MHz
    t_sm: float = 1351.5           # knee clock (0.85 * c_h), MHz
    a_l: float = 4.0               # gain below the knee (aggressive)
    a_h: float = 0.5               # gain above the knee (gentle)

    def __post_init__(self):
        if not 0.0 < self.t_sm < self.c_h:
            raise ValueError(f"require 0 < t_sm < c_h, got t_sm={self.t_sm} c_h={self.c_h}")
        if not self.a_l > self.a_h > 0.0:
            raise ValueError(f"require a_l > a_h > 0, got a_l={self.a_l} a_h={self.a_h}")


def clock_factor(c_sm: float, p: ClockParams) -> float:
    """Clock weighting a_C: 1 at the knee, above 1 when the clock sags below it.

    a_C = 1 + a_l * (t_sm - c_sm) / t_sm     if c_sm < t_sm
        = 1 - a_h * (c_sm - t_sm) / (c_h - t_sm)  otherwise
    """
    if not math.isfinite(c_sm) or c_sm < 0.0 or c_sm > p.c_h:
        raise ValueError(f"SM clock {c_sm} outside [0, {p.c_h}]")
    if c_sm < p.t_sm:
        return 1.0 + p.a_l * (p.t_sm - c_sm) / p.t_sm
    return 1.0 - p.a_h * (c_sm - p.t_sm) / (p.c_h - p.t_sm)


def gpu_load(u_sm: float, c_sm: float, p: ClockParams) -> float:
    """Clock-weighted GPU load: U_GPU = U_SM * a_C."""
    if not 0.0 <= u_sm <= 1.0:
        raise ValueError(f"SM activity {u_sm} outside [0, 1]")
    return u_sm * clock_factor(c_sm, p)


@dataclass(frozen=True)
class PidParams:
    kp: float = 0.3
    ki: float = 0.1
    kd: float = 0.01
    target_load: float = 0.9       # setpoint for the clock-weighted load
    integral_clamp: float = 2.0    # anti-windup bound on the error integral
    control_tick: float = 0.1      # seconds between control steps

    def __post_init__(self):
        if self.integral_clamp <= 0.0:
            raise ValueError("integral_clamp must be > 0")
        if self.control_tick <= 0.0:
            raise ValueError("control_tick must be > 0")


@dataclass(frozen=True)
class PidState:
    throttle_level: float = 0.0
    integral: float = 0.0
    prev_error: float = 0.0


def pid_step(state: PidState, u_gpu: float, p: PidParams, dt: float = None) -> PidState:
    """One discrete PID step; returns the new state.

    e = u_gpu - target; the integral is clamped to +-integral_clamp; the
    increment kp*e + ki*integral + kd*de/dt is added onto the previous
    throttle level, clamped to [0, 1].
    """
    if dt is None:
        dt = p.control_tick
    e = u_gpu - p.target_load
    integral = state.integral + e * dt
    integral = max(-p.integral_clamp, min(p.integral_clamp, integral))
    derivative = (e - state.prev_error) / dt
    raw = p.kp * e + p.ki * integral + p.kd * derivative
    throttle = max(0.0, min(1.0, state.throttle_level + raw))
    return PidState(throttle_level=throttle, integral=integral, prev_error=e)


def check_mem_alloc(current: float, request: float, quota: float = 0.40) -> bool:
    """Grant an offline memory request iff current + request <= quota.

    Boundary equality is granted. Fractions of device memory.
    """
    if request < 0.0 or current < 0.0:
        raise ValueError("memory fractions must be >= 0")
    return current + request <= quota


