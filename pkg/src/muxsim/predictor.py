"""Offline-throughput prediction from a dense interpolation table.

Given the co-located online workload's SM activity, the offline workload's SM
demand, and the SM share granted to the offline workload, the predictor
estimates the offline workload's normalized throughput (shared throughput
divided by exclusive-run throughput).  The reference implementation is
trilinear interpolation over a dense grid; any regressor exported as such a
grid plugs in unchanged.
"""

import bisect
import json
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from .core import WorkloadProfile

# Grid values may wobble below exact monotonicity by this much before the
# table is rejected (float noise from whatever produced the grid).
MONOTONE_TOL = 1e-12


class TableError(ValueError):
    """Raised for malformed prediction tables or out-of-range queries."""


def _check_axis(name: str, knots: Tuple[float, ...]) -> None:
    if len(knots) == 0:
        raise TableError(f"axis {name} is empty")
    for v in knots:
        if not 0.0 <= v <= 1.0:
            raise TableError(f"axis {name} knot {v} outside [0, 1]")
    for a, b in zip(knots, knots[1:]):
        if not a < b:
            raise TableError(f"axis {name} knots not strictly increasing: {a} >= {b}")


@dataclass(frozen=True)
class PredictionTable:
    """Dense normalized-throughput grid for one GPU type.

    values[i, j, k] is the predicted normalized throughput when the online
    workload's SM activity is online_sm[i], the offline workload's exclusive
    SM demand is offline_sm[j], and the offline workload is granted an SM
    share of sm_pct[k].
    """

    gpu_type: str
    online_sm: Tuple[float, ...]    # online SM-activity knots
    offline_sm: Tuple[float, ...]   # offline SM-demand knots
    sm_pct: Tuple[float, ...]       # granted SM-share knots
    values: np.ndarray              # shape (len(online_sm), len(offline_sm), len(sm_pct))

    def __post_init__(self):
        _check_axis("online_sm", self.online_sm)
        _check_axis("offline_sm", self.offline_sm)
        _check_axis("sm_pct", self.sm_pct)
        vals = np.asarray(self.values, dtype=float)
        shape = (len(self.online_sm), len(self.offline_sm), len(self.sm_pct))
        if vals.shape != shape:
            raise TableError(f"values shape {vals.shape} != axes shape {shape}")
        if not np.all(np.isfinite(vals)):
            raise TableError("table contains non-finite values")
        if vals.min() < 0.0 or vals.max() > 1.0:
            raise TableError("table values outside [0, 1]")
        if vals.shape[2] > 1 and np.diff(vals, axis=2).min() < -MONOTONE_TOL:
            raise TableError("values decrease along the sm_pct axis")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def _locate(knots: Tuple[float, ...], x: float) -> Tuple[int, int, float]:
    """Bracket x in knots, clamping to the hull: (lo index, hi index, fraction)."""
    n = len(knots)
    if n == 1 or x <= knots[0]:
        return 0, 0, 0.0
    if x >= knots[-1]:
        return n - 2, n - 1, 1.0
    i = bisect.bisect_right(knots, x) - 1
    return i, i + 1, (x - knots[i]) / (knots[i + 1] - knots[i])


def predict_point(t: PredictionTable, online_sm: float, offline_sm: float,
                  sm_pct: float) -> float:
    """Trilinear interpolation of the grid at raw coordinates.

    Coordinates must lie in [0, 1]; queries outside the knot hull clamp to
    the hull rather than extrapolate (extrapolated throughputs can leave
    [0, 1]).  Exact at knots.
    """
    for name, v in (("online_sm", online_sm), ("offline_sm", offline_sm),
                    ("sm_pct", sm_pct)):
        if not 0.0 <= v <= 1.0:
            raise TableError(f"query {name}={v} outside [0, 1]")
    i0, i1, fi = _locate(t.online_sm, online_sm)
    j0, j1, fj = _locate(t.offline_sm, offline_sm)
    k0, k1, fk = _locate(t.sm_pct, sm_pct)
    v = t.values
    out = 0.0
    for i, wi in ((i0, 1.0 - fi), (i1, fi)):
        if wi == 0.0:
            continue
        for j, wj in ((j0, 1.0 - fj), (j1, fj)):
            if wj == 0.0:
                continue
            for k, wk in ((k0, 1.0 - fk), (k1, fk)):
                if wk == 0.0:
                    continue
                out += wi * wj * wk * float(v[i, j, k])
    return min(1.0, max(0.0, out))


def predict(t: PredictionTable, online: WorkloadProfile, offline: WorkloadProfile,
            sm_pct: float) -> float:
    """Normalized offline throughput for a candidate pairing at a given share."""
    return predict_point(t, online.sm_activity, offline.sm_activity, sm_pct)


def normalized_throughput(tput_shared: float, tput_separate: float) -> float:
    """Shared throughput over exclusive throughput, clamped to [0, 1.05].

    The slack above 1 absorbs measurement noise when a profiled shared run
    beats its exclusive baseline by a hair.
    """
    if not tput_separate > 0.0:
        raise ValueError(f"separate throughput must be > 0, got {tput_separate}")
    if tput_shared < 0.0:
        raise ValueError(f"shared throughput must be >= 0, got {tput_shared}")
    return min(1.05, tput_shared / tput_separate)


def build_table_from_model(model: Callable[[float, float, float], float],
                           online_sm: Sequence[float],
                           offline_sm: Sequence[float],
                           sm_pct: Sequence[float],
                           gpu_type: str = "default") -> PredictionTable:
    """Tabulate model(online_sm, offline_sm, sm_pct) at every grid point.

    The resulting predictor is exact at knots by construction.  Model outputs
    are clipped to [0, 1] so float noise cannot invalidate the table.
    """
    ax_i = tuple(float(v) for v in online_sm)
    ax_j = tuple(float(v) for v in offline_sm)
    ax_k = tuple(float(v) for v in sm_pct)
    vals = np.empty((len(ax_i), len(ax_j), len(ax_k)), dtype=float)
    for i, x in enumerate(ax_i):
        for j, y in enumerate(ax_j):
            for k, z in enumerate(ax_k):
                vals[i, j, k] = min(1.0, max(0.0, float(model(x, y, z))))
    return PredictionTable(gpu_type=gpu_type, online_sm=ax_i, offline_sm=ax_j,
                           sm_pct=ax_k, values=vals)


def table_to_dict(t: PredictionTable) -> Dict:
    return {
        "gpu_type": t.gpu_type,
        "axes": {
            "online_sm": list(t.online_sm),
            "offline_sm": list(t.offline_sm),
            "sm_pct": list(t.sm_pct),
        },
        "values": [float(v) for v in t.values.reshape(-1)],
    }


def table_from_dict(doc: Dict) -> PredictionTable:
    if not isinstance(doc, dict):
        raise TableError("table document must be an object")
    unknown = set(doc) - {"gpu_type", "axes", "values"}
    if unknown:
        raise TableError(f"unknown table fields: {sorted(unknown)}")
    try:
        axes = doc["axes"]
        gpu_type = doc["gpu_type"]
        flat = doc["values"]
    except KeyError as e:
        raise TableError(f"table document missing field {e}") from None
    if not isinstance(axes, dict):
        raise TableError("axes must be an object")
    unknown = set(axes) - {"online_sm", "offline_sm", "sm_pct"}
    if unknown:
        raise TableError(f"unknown axes: {sorted(unknown)}")
    try:
        ax_i = tuple(float(v) for v in axes["online_sm"])
        ax_j = tuple(float(v) for v in axes["offline_sm"])
        ax_k = tuple(float(v) for v in axes["sm_pct"])
    except KeyError as e:
        raise TableError(f"axes missing {e}") from None
    shape = (len(ax_i), len(ax_j), len(ax_k))
    n = shape[0] * shape[1] * shape[2]
    if len(flat) != n:
        raise TableError(f"expected {n} values, got {len(flat)}")
    vals = np.asarray(flat, dtype=float).reshape(shape)
    return PredictionTable(gpu_type=str(gpu_type), online_sm=ax_i, offline_sm=ax_j,
                           sm_pct=ax_k, values=vals)


def save_table(t: PredictionTable, path: str) -> None:
    """Write a table as JSON; floats round-trip bit-exact."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(table_to_dict(t), f, indent=2, sort_keys=True)
        f.write("\n")


def load_table(path: str) -> PredictionTable:
    with open(path, "r", encoding="utf-8") as f:
        return table_from_dict(json.load(f))
