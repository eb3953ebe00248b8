"""Throughput prediction table: interpolation, fidelity, serialization."""

import random

import numpy as np
import pytest

from muxsim.predictor import (MONOTONE_TOL, PredictionTable, TableError,
                              build_table_from_model, load_table,
                              normalized_throughput, predict, predict_point,
                              save_table, table_from_dict, table_to_dict)
from muxsim.simengine import InterferenceParams, offline_rate_model
from conftest import make_profile

AXES = (
    tuple(i / 8 for i in range(9)),          # online_sm 0..1
    tuple(0.5 + i / 16 for i in range(9)),   # offline_sm 0.5..1
    tuple(i / 9 for i in range(10)),         # sm_pct 0..1
)


def model_default(x, y, z):
    return offline_rate_model(x, y, z, InterferenceParams())


def linear_model(x, y, z):
    return 0.1 + 0.2 * x + 0.25 * y + 0.4 * z


def test_exact_at_every_knot():
    t = build_table_from_model(model_default, *AXES)
    for x in t.online_sm:
        for y in t.offline_sm:
            for z in t.sm_pct:
                assert abs(predict_point(t, x, y, z) - model_default(x, y, z)) <= 1e-12


def test_trilinear_reproduces_linear_functions():
    t = build_table_from_model(linear_model, *AXES)
    rng = random.Random(31)
    for _ in range(500):
        x, y, z = rng.random(), rng.uniform(0.5, 1.0), rng.random()
        assert abs(predict_point(t, x, y, z) - linear_model(x, y, z)) <= 1e-9


def test_fidelity_against_ground_truth_model():
    t = build_table_from_model(model_default, *AXES)
    rng = random.Random(77)
    worst = 0.0
    for _ in range(1_000):
        x, y, z = rng.random(), rng.uniform(0.5, 1.0), rng.random()
        worst = max(worst, abs(predict_point(t, x, y, z) - model_default(x, y, z)))
    assert worst <= 0.05, f"max interpolation error {worst:.4f}"


def test_queries_clamp_to_hull():
    t = build_table_from_model(linear_model, *AXES)
    # offline_sm axis starts at 0.5: anything below reads the boundary sheet
    assert predict_point(t, 0.5, 0.2, 0.5) == predict_point(t, 0.5, 0.5, 0.5)
    assert predict_point(t, 1.0, 1.0, 1.0) == pytest.approx(linear_model(1.0, 1.0, 1.0))


def test_invalid_query_coordinates_rejected():
    t = build_table_from_model(linear_model, *AXES)
    for bad in ((1.2, 0.5, 0.5), (0.5, -0.1, 0.5), (0.5, 0.5, float("nan"))):
        with pytest.raises((TableError, ValueError)):
            predict_point(t, *bad)


def test_predict_uses_profile_sm_activity():
    t = build_table_from_model(model_default, *AXES)
    online = make_profile(0.375)
    offline = make_profile(0.75)
    assert predict(t, online, offline, 0.5) == predict_point(t, 0.375, 0.75, 0.5)


def test_monotone_in_granted_share():
    t = build_table_from_model(model_default, *AXES)
    rng = random.Random(13)
    for _ in range(300):
        x, y = rng.random(), rng.uniform(0.5, 1.0)
        zs = sorted(rng.random() for _ in range(5))
        vals = [predict_point(t, x, y, z) for z in zs]
        for a, b in zip(vals, vals[1:]):
            assert b >= a - 1e-9


def test_table_rejects_nonmonotone_sm_pct_axis_values():
    values = np.zeros((1, 1, 3))
    values[0, 0] = [0.5, 0.4, 0.6]   # dips along sm_pct
    with pytest.raises(TableError):
        PredictionTable(gpu_type="default", online_sm=(0.0,), offline_sm=(0.5,),
                        sm_pct=(0.0, 0.5, 1.0), values=values)
    # a dip smaller than the tolerance is accepted
    values2 = np.zeros((1, 1, 2))
    values2[0, 0] = [0.5, 0.5 - MONOTONE_TOL / 2]
    PredictionTable(gpu_type="default", online_sm=(0.0,), offline_sm=(0.5,),
                    sm_pct=(0.0, 1.0), values=values2)


def test_table_rejects_bad_axes_and_values():
    with pytest.raises(TableError):
        PredictionTable(gpu_type="g", online_sm=(0.5, 0.5), offline_sm=(0.5,),
                        sm_pct=(0.0,), values=np.zeros((2, 1, 1)))
    with pytest.raises(TableError):
        PredictionTable(gpu_type="g", online_sm=(0.0,), offline_sm=(0.5,),
                        sm_pct=(0.0,), values=np.full((1, 1, 1), 1.5))
    with pytest.raises(TableError):
        PredictionTable(gpu_type="g", online_sm=(0.0,), offline_sm=(0.5,),
                        sm_pct=(0.0,), values=np.zeros((2, 1, 1)))


def test_round_trip_is_byte_stable(tmp_path):
    t = build_table_from_model(model_default, *AXES)
    p1 = tmp_path / "table.json"
    p2 = tmp_path / "table2.json"
    save_table(t, str(p1))
    again = load_table(str(p1))
    assert again.gpu_type == t.gpu_type
    assert again.online_sm == t.online_sm
    assert again.offline_sm == t.offline_sm
    assert again.sm_pct == t.sm_pct
    assert np.array_equal(again.values, t.values)
    save_table(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_dict_round_trip_rejects_unknown_keys():
    t = build_table_from_model(linear_model, *AXES)
    doc = table_to_dict(t)
    doc["vendor"] = "x"
    with pytest.raises(TableError):
        table_from_dict(doc)
    doc = table_to_dict(t)
    doc["axes"]["time"] = [0, 1]
    with pytest.raises(TableError):
        table_from_dict(doc)


def test_normalized_throughput():
    assert normalized_throughput(50.0, 100.0) == 0.5
    assert normalized_throughput(100.0, 100.0) == 1.0
    assert normalized_throughput(200.0, 100.0) == 1.05   # capped
    assert normalized_throughput(0.0, 100.0) == 0.0
    with pytest.raises(ValueError):
        normalized_throughput(10.0, 0.0)
    with pytest.raises(ValueError):
        normalized_throughput(-1.0, 10.0)
