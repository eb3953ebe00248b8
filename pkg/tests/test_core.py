"""Trace model: validation, lookup semantics, JSON round-trips."""

import json

import pytest

from muxsim.core import (ClusterTrace, GpuSpec, OfflineWorkload, OnlineWorkload,
                         TraceValidationError, WorkloadProfile, load_trace,
                         profile_at, save_trace, trace_from_dict, trace_to_dict)
from conftest import make_profile


def simple_online(oid="svc", gid="g0", knots=((0.0, 100.0), (600.0, 200.0)),
                  profiles=None):
    if profiles is None:
        profiles = ((100.0, make_profile(0.2)), (200.0, make_profile(0.4)))
    return OnlineWorkload(id=oid, gpu_id=gid, base_latency=0.02, latency_slo=0.08,
                          qps_series=knots, profile_by_qps=profiles)


def simple_trace():
    online = simple_online()
    offline = (OfflineWorkload(id="job", submit_time=10.0, work_separate=100.0,
                               profile=make_profile(0.8, mem=0.2)),)
    return ClusterTrace(gpus=(GpuSpec(id="g0", gpu_type="A100", online_id="svc"),),
                        online=(online,), offline=offline, horizon=3600.0)


def test_profile_fraction_bounds():
    with pytest.raises(TraceValidationError):
        make_profile(1.2)
    with pytest.raises(TraceValidationError):
        make_profile(-0.1)
    with pytest.raises(TraceValidationError):
        WorkloadProfile(sm_activity=0.5, gpu_utilization=0.9, sm_occupancy=0.5,
                        iter_time_separate=0.0, mem_fraction=0.3)


def test_online_requires_increasing_qps_series():
    with pytest.raises(TraceValidationError):
        simple_online(knots=((0.0, 100.0), (0.0, 200.0)))
    with pytest.raises(TraceValidationError):
        simple_online(knots=((600.0, 100.0), (0.0, 200.0)))


def test_online_rejects_qps_below_lowest_profile_knot():
    with pytest.raises(TraceValidationError):
        simple_online(knots=((0.0, 50.0),))


def test_online_rejects_base_latency_above_slo():
    with pytest.raises(TraceValidationError):
        OnlineWorkload(id="svc", gpu_id="g0", base_latency=0.2, latency_slo=0.08,
                       qps_series=((0.0, 100.0),),
                       profile_by_qps=((100.0, make_profile(0.2)),))


def test_qps_at_is_a_step_series():
    w = simple_online()
    assert w.qps_at(0.0) == 100.0
    assert w.qps_at(599.9) == 100.0
    assert w.qps_at(600.0) == 200.0
    assert w.qps_at(10_000.0) == 200.0
    # before the first knot, the first value applies
    w2 = simple_online(knots=((60.0, 100.0), (600.0, 200.0)))
    assert w2.qps_at(0.0) == 100.0


def test_profile_for_qps_picks_nearest_knot_at_or_below():
    w = simple_online()
    assert w.profile_for_qps(100.0).sm_activity == 0.2
    assert w.profile_for_qps(150.0).sm_activity == 0.2
    assert w.profile_for_qps(200.0).sm_activity == 0.4
    assert w.profile_for_qps(999.0).sm_activity == 0.4
    with pytest.raises(TraceValidationError):
        w.profile_for_qps(99.0)


def test_profile_at_respects_horizon():
    w = simple_online()
    assert profile_at(w, 0.0, 3600.0).sm_activity == 0.2
    assert profile_at(w, 700.0, 3600.0).sm_activity == 0.4
    with pytest.raises(TraceValidationError):
        profile_at(w, -1.0, 3600.0)
    with pytest.raises(TraceValidationError):
        profile_at(w, 3601.0, 3600.0)


def test_trace_rejects_duplicate_ids():
    online = simple_online()
    with pytest.raises(TraceValidationError):
        ClusterTrace(gpus=(GpuSpec("g0", "A100", "svc"), GpuSpec("g0", "A100")),
                     online=(online,), offline=(), horizon=100.0)


def test_trace_rejects_dangling_pins():
    online = simple_online(gid="missing")
    with pytest.raises(TraceValidationError):
        ClusterTrace(gpus=(GpuSpec("g0", "A100", "svc"),),
                     online=(online,), offline=(), horizon=100.0)
    # GPU must point back at its pinned workload
    with pytest.raises(TraceValidationError):
        ClusterTrace(gpus=(GpuSpec("g0", "A100", None),),
                     online=(simple_online(),), offline=(), horizon=100.0)


def test_trace_rejects_knots_beyond_horizon():
    with pytest.raises(TraceValidationError):
        ClusterTrace(gpus=(GpuSpec("g0", "A100", "svc"),),
                     online=(simple_online(),), offline=(), horizon=500.0)


def test_trace_round_trip_is_exact(tmp_path):
    trace = simple_trace()
    path = tmp_path / "trace.json"
    save_trace(trace, str(path))
    again = load_trace(str(path))
    assert again == trace
    # and byte-stable across a second save
    path2 = tmp_path / "trace2.json"
    save_trace(again, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_trace_dict_rejects_unknown_fields():
    doc = trace_to_dict(simple_trace())
    doc["surprise"] = 1
    with pytest.raises(TraceValidationError):
        trace_from_dict(doc)


def test_trace_dict_rejects_unknown_profile_fields():
    doc = trace_to_dict(simple_trace())
    doc["offline"][0]["profile"]["watts"] = 300
    with pytest.raises(TraceValidationError):
        trace_from_dict(doc)


def test_load_trace_reports_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(TraceValidationError):
        load_trace(str(path))


def test_negative_work_rejected():
    with pytest.raises(TraceValidationError):
        OfflineWorkload(id="j", submit_time=0.0, work_separate=-5.0,
                        profile=make_profile(0.5))
