"""Shared fixtures: profile builders, permissive thresholds, cached suite runs."""

import pytest

from muxsim.core import WorkloadProfile
from muxsim.gpu_state import Thresholds
from muxsim.scheduler import SchedulerConfig
from muxsim.simengine import SimConfig, run
from muxsim.suite import suite_traces

SUITE_POLICIES = ("muxflow", "online_only", "pb_time_sharing",
                  "muxflow_fixed_sm", "muxflow_random_match")


def make_profile(sm, mem=0.3, iter_time=0.1):
    return WorkloadProfile(
        sm_activity=sm,
        gpu_utilization=min(1.0, 1.8 * sm),
        sm_occupancy=0.5,
        iter_time_separate=iter_time,
        mem_fraction=mem,
    )


@pytest.fixture
def profile():
    return make_profile


@pytest.fixture
def no_health():
    """Thresholds no metric can reach, so the health machine never trips."""
    return Thresholds(
        healthy_gpu_util=2.0, unhealthy_gpu_util=3.0, overlimit_gpu_util=4.0,
        healthy_sm_activity=2.0, unhealthy_sm_activity=3.0, overlimit_sm_activity=4.0,
        healthy_mem_usage=2.0, unhealthy_mem_usage=3.0, overlimit_mem_usage=4.0,
        healthy_clock_frac=0.03, unhealthy_clock_frac=0.02, overlimit_clock_frac=0.01,
    )


@pytest.fixture(scope="session")
def suite_runs():
    """name -> policy -> RunReport over the bundled trace suite.

    Computed once per session; several acceptance criteria read from it.
    """
    out = {}
    for name, trace, seed in suite_traces():
        per = {}
        for policy in SUITE_POLICIES:
            cfg = SimConfig(scheduler=SchedulerConfig(policy=policy))
            per[policy] = run(trace, cfg, seed=seed)
        out[name] = per
    return out
