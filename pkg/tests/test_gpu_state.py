"""Health state machine: transitions, hysteresis, dwell backoff, replay oracle."""

import random

import pytest

from muxsim.gpu_state import (GpuState, HealthState, MetricSample, StepAction,
                              Thresholds)

H = HealthState
A = StepAction


def sample(t, sm=0.5, util=0.9, mem=0.3, clock=1590.0):
    return MetricSample(timestamp=t, gpu_util=util, sm_activity=sm,
                        mem_usage=mem, sm_clock=clock)


# Reachable one-step successors, keyed by the state before the sample.
LEGAL = {
    H.INIT: {H.HEALTHY, H.UNHEALTHY, H.OVERLIMIT},
    H.HEALTHY: {H.HEALTHY, H.UNHEALTHY, H.OVERLIMIT},
    H.UNHEALTHY: {H.UNHEALTHY, H.HEALTHY, H.OVERLIMIT},
    H.OVERLIMIT: {H.OVERLIMIT, H.UNHEALTHY},
}


def test_scripted_sequence_covers_every_legal_transition():
    th = Thresholds()
    g = GpuState()
    assert g.state is H.INIT

    # (sm, expected state, expected action); timestamps 30 s apart unless jumped
    script = [
        (0.50, H.HEALTHY, A.NONE),            # 1  Init -> Healthy
        (0.50, H.HEALTHY, A.NONE),            # 2  Healthy holds
        (0.96, H.UNHEALTHY, A.FORBID_SCHEDULING),  # 3  Healthy -> Unhealthy
        (0.90, H.UNHEALTHY, A.NONE),          # 4  hysteresis: 0.90 > 0.85 return bound
        (0.50, H.HEALTHY, A.NONE),            # 5  Unhealthy -> Healthy
        (0.99, H.OVERLIMIT, A.EVICT_OFFLINE),  # 6  Healthy -> Overlimit (entry 1, dwell 60)
        (0.50, H.OVERLIMIT, A.NONE),          # 7  calm but dwell not expired
        (0.50, H.UNHEALTHY, A.FORBID_SCHEDULING),  # 8  dwell over -> Unhealthy, never Healthy
        (0.50, H.HEALTHY, A.NONE),            # 9
        (0.99, H.OVERLIMIT, A.EVICT_OFFLINE),  # 10 entry 2 inside window, dwell 120
        (0.50, H.OVERLIMIT, A.NONE),          # 11 +30
        (0.50, H.OVERLIMIT, A.NONE),          # 12 +60
        (0.50, H.OVERLIMIT, A.NONE),          # 13 +90
        (0.99, H.OVERLIMIT, A.NONE),          # 14 +120: dwell over but still breaching
        (0.50, H.UNHEALTHY, A.FORBID_SCHEDULING),  # 15 calm and expired -> exit
        (0.96, H.UNHEALTHY, A.NONE),          # 16 Unhealthy holds on unhealthy breach
        (0.99, H.OVERLIMIT, A.EVICT_OFFLINE),  # 17 Unhealthy -> Overlimit (entry 3, dwell 240)
    ]
    t = 0.0
    steps = 0
    expected_dwells = {6: 60.0, 10: 120.0, 17: 240.0}
    for i, (sm, want_state, want_action) in enumerate(script, start=1):
        t += 30.0
        prev = g.state
        action = g.step(sample(t, sm=sm), th)
        steps += 1
        assert g.state is want_state, f"step {i}: got {g.state}, want {want_state}"
        assert action is want_action, f"step {i}: got {action}"
        assert g.state in LEGAL[prev], f"step {i}: forbidden {prev} -> {g.state}"
        if i in expected_dwells:
            assert g.overlimit_until == t + expected_dwells[i]

    # Jump past the trailing window: old entries stop counting.
    t += 7201.0
    for sm, want_state, want_action in [
        (0.50, H.UNHEALTHY, A.FORBID_SCHEDULING),   # 18 leave the stale Overlimit
        (0.50, H.HEALTHY, A.NONE),                  # 19
        (0.99, H.OVERLIMIT, A.EVICT_OFFLINE),       # 20 window slid: dwell back to 60
    ]:
        prev = g.state
        action = g.step(sample(t, sm=sm), th)
        steps += 1
        assert g.state is want_state
        assert action is want_action
        assert g.state in LEGAL[prev]
        t += 30.0
    assert g.overlimit_until == (t - 30.0) + 60.0

    # Administrative disable is allowed from any state; stepping it is not.
    g.disable()
    assert g.state is H.DISABLED
    with pytest.raises(ValueError):
        g.step(sample(t), th)
    g.reenable()
    assert g.state is H.INIT

    # Init's first sample may land straight in Unhealthy ...
    action = g.step(sample(t, sm=0.96), th)
    steps += 1
    assert g.state is H.UNHEALTHY and action is A.FORBID_SCHEDULING

    g.disable()
    g.reenable()
    # ... or straight in Overlimit.
    t += 30.0
    action = g.step(sample(t, sm=0.99), th)
    steps += 1
    assert g.state is H.OVERLIMIT and action is A.EVICT_OFFLINE

    # Stale timestamps are rejected; equal timestamps are fine.
    with pytest.raises(ValueError):
        g.step(sample(t - 1.0), th)
    g.step(sample(t, sm=0.99), th)
    steps += 1

    # Pad with quiet samples so the scripted sequence is exactly 50 steps.
    while steps < 50:
        t += 30.0
        prev = g.state
        g.step(sample(t, sm=0.3), th)
        steps += 1
        assert g.state in LEGAL[prev]
    assert steps == 50
    assert g.state is H.HEALTHY   # calm tail always recovers


def test_breach_channels_each_trigger():
    th = Thresholds()
    for s in (sample(30.0, sm=0.99), sample(30.0, mem=0.96),
              sample(30.0, clock=1100.0), sample(30.0, util=1.03)):
        g = GpuState()
        g.step(sample(0.0), th)
        assert g.step(s, th) is A.EVICT_OFFLINE, s
    for s in (sample(30.0, sm=0.96), sample(30.0, mem=0.92),
              sample(30.0, clock=1335.0), sample(30.0, util=1.015)):
        g = GpuState()
        g.step(sample(0.0), th)
        assert g.step(s, th) is A.FORBID_SCHEDULING, s


def test_dwell_backoff_and_window_pruning_exact():
    th = Thresholds()
    g = GpuState()
    g.step(sample(0.0), th)

    entries = [1000.0, 2000.0, 3000.0, 11000.0]
    expected_until = [1060.0, 2120.0, 3240.0, 11060.0]  # k = 1, 2, 3, then pruned to 1
    for t_enter, until in zip(entries, expected_until):
        assert g.step(sample(t_enter, sm=0.99), th) is A.EVICT_OFFLINE
        assert g.overlimit_until == until
        assert g.step(sample(until, sm=0.3), th) is A.FORBID_SCHEDULING
        assert g.step(sample(until + 30.0, sm=0.3), th) is A.NONE
        assert g.state is H.HEALTHY


def test_reenable_requires_disabled():
    g = GpuState()
    with pytest.raises(ValueError):
        g.reenable()


def test_thresholds_validate_hysteresis_ordering():
    with pytest.raises(ValueError):
        Thresholds(healthy_sm_activity=0.96)     # >= unhealthy bound
    with pytest.raises(ValueError):
        Thresholds(unhealthy_clock_frac=0.86)    # >= healthy return bound
    with pytest.raises(ValueError):
        Thresholds(backoff_base=0.5)


def oracle_replay(samples, th):
    """Re-derive the machine's trajectory from the documented rules alone.

    Deliberately written differently from the implementation: breach checks
    inline, window occupancy recounted from scratch each step, no pruning.
    """
    state = "init"
    entries = []
    until = 0.0
    out = []
    for m in samples:
        over = (m.gpu_util > th.overlimit_gpu_util
                or m.sm_activity > th.overlimit_sm_activity
                or m.mem_usage > th.overlimit_mem_usage
                or m.sm_clock < th.overlimit_clock_frac * th.max_sm_clock)
        unhealthy = (m.gpu_util > th.unhealthy_gpu_util
                     or m.sm_activity > th.unhealthy_sm_activity
                     or m.mem_usage > th.unhealthy_mem_usage
                     or m.sm_clock < th.unhealthy_clock_frac * th.max_sm_clock)
        calm = not (m.gpu_util > th.healthy_gpu_util
                    or m.sm_activity > th.healthy_sm_activity
                    or m.mem_usage > th.healthy_mem_usage
                    or m.sm_clock < th.healthy_clock_frac * th.max_sm_clock)
        now = m.timestamp
        if state == "init":
            state = "healthy"
        if state == "healthy" or state == "unhealthy":
            if over:
                k = sum(1 for e in entries if e > now - th.window) + 1
                entries.append(now)
                until = now + th.base_dwell * th.backoff_base ** (k - 1)
                state = "overlimit"
            elif state == "healthy" and unhealthy:
                state = "unhealthy"
            elif state == "unhealthy" and calm:
                state = "healthy"
        elif state == "overlimit":
            if now >= until and not over:
                state = "unhealthy"
        out.append((state, until))
    return out


def test_random_replay_matches_oracle():
    th = Thresholds()
    rng = random.Random(424242)
    sms = [0.3, 0.9, 0.96, 0.99]
    mems = [0.3, 0.92, 0.96]
    clocks = [1590.0, 1340.0, 1100.0]
    dts = [30.0, 30.0, 30.0, 300.0, 3600.0]

    samples = []
    t = 0.0
    for _ in range(3000):
        t += rng.choice(dts)
        samples.append(sample(
            t,
            sm=rng.choice(sms) if rng.random() < 0.8 else 0.3,
            mem=rng.choice(mems) if rng.random() < 0.2 else 0.3,
            clock=rng.choice(clocks) if rng.random() < 0.2 else 1590.0,
        ))

    g = GpuState()
    expected = oracle_replay(samples, th)
    for m, (want_state, want_until) in zip(samples, expected):
        g.step(m, th)
        assert g.state.value == want_state
        if want_state == "overlimit":
            assert g.overlimit_until == want_until
