"""Bundled synthetic trace suite used by the acceptance tests and docs.

Five day-long cluster traces spanning 8 to 64 GPUs, each fully determined
by its generator spec and seed, so every consumer reconstructs identical
inputs.
"""

from typing import Dict, List, Tuple

from .core import ClusterTrace
from .gen import gen_trace

SUITE_SPECS: Tuple[Dict, ...] = (
    {"name": "suite-08", "gpus": 8, "horizon_s": 86400.0},
    {"name": "suite-16", "gpus": 16, "horizon_s": 86400.0},
    {"name": "suite-24", "gpus": 24, "horizon_s": 86400.0},
    {"name": "suite-48", "gpus": 48, "horizon_s": 86400.0},
    {"name": "suite-64", "gpus": 64, "horizon_s": 86400.0},
)

SUITE_SEEDS: Tuple[int, ...] = (101, 102, 103, 104, 105)


def suite_traces() -> List[Tuple[str, ClusterTrace, int]]:
    """(name, trace, seed) for every bundled suite member."""
    out = []
    for spec, seed in zip(SUITE_SPECS, SUITE_SEEDS):
        out.append((spec["name"], gen_trace(spec, seed), seed))
    return out
