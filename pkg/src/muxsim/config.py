"""Run-configuration files: JSON in, validated SimConfig out.

Every section and key is optional; omitted values take the module defaults.
Unknown sections or keys are rejected so typos fail loudly instead of
silently running with defaults.
"""

import json
from typing import Dict, Optional, Tuple

from .gpu_state import Thresholds
from .scheduler import SchedulerConfig
from .simengine import FaultModel, InterferenceParams, SimConfig
from .throttle import ClockParams, PidParams


class ConfigError(ValueError):
    """Raised when a configuration document fails validation."""


# file key -> dataclass field
_SCHEDULER = {
    "interval_s": "interval",
    "min_sm": "min_sm",
    "max_sm": "max_sm",
    "headroom": "headroom",
    "quantum": "quantum",
    "policy": "policy",
    "fixed_sm": "fixed_sm",
    "mem_quota": "mem_quota",
}
_INTERFERENCE = {
    "load_knee": "load_knee",
    "clock_slope": "clock_slope",
    "clock_floor": "clock_floor",
    "contention_penalty": "contention_penalty",
    "checkpoint_restart_cost_s": "checkpoint_restart_cost",
    "control_tick_s": "control_tick",
    "sim_tick_s": "sim_tick",
    "online_busy_factor": "online_busy_factor",
    "stall_penalty": "stall_penalty",
}
_FAULTS = {
    "rate_per_hour": "rate_per_hour",
    "sigint_fraction": "sigint_fraction",
    "graceful_exit_enabled": "graceful_exit_enabled",
    "reset_downtime_s": "reset_downtime",
}
_CLOCK = {
    "c_h_mhz": "c_h",
    "t_sm_mhz": "t_sm",
    "a_l": "a_l",
    "a_h": "a_h",
}
_PID = {
    "kp": "kp",
    "ki": "ki",
    "kd": "kd",
    "target_load": "target_load",
    "integral_clamp": "integral_clamp",
    "control_tick_s": "control_tick",
}
_THRESHOLDS = {
    k: k for k in (
        "max_sm_clock",
        "unhealthy_gpu_util", "unhealthy_sm_activity", "unhealthy_mem_usage",
        "unhealthy_clock_frac",
        "overlimit_gpu_util", "overlimit_sm_activity", "overlimit_mem_usage",
        "overlimit_clock_frac",
        "healthy_gpu_util", "healthy_sm_activity", "healthy_mem_usage",
        "healthy_clock_frac",
        "base_dwell", "backoff_base", "window",
    )
}
_OUTPUT = {
    "metric_sample_period_s": "metric_sample_period",
    "timeseries_period_s": "timeseries_period",
}
_PREDICTOR_KEYS = ("online_sm", "offline_sm", "sm_pct", "table_path")
_SECTIONS = ("throttle", "thresholds", "scheduler", "interference", "faults",
             "predictor", "output")


def _section(doc: Dict, name: str) -> Dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config: section '{name}' must be an object")
    return sec

def _kwargs(name: str, sec: Dict, keymap: Dict[str, str]) -> Dict:
    unknown = [k for k in sec if k not in keymap]
    if unknown:
        raise ConfigError(f"config: unknown keys {unknown} in section '{name}'")
    return {keymap[k]: sec[k] for k in sec}


def _axis(name: str, values) -> Tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"config: predictor.{name} must be a non-empty list")
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigError(f"config: predictor.{name} must hold numbers") from None


def config_from_dict(doc: Optional[Dict]) -> SimConfig:
    """Validate a parsed config document and build a SimConfig."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    unknown = [k for k in doc if k not in _SECTIONS]
    if unknown:
        raise ConfigError(f"config: unknown sections {unknown}")

    throttle = _section(doc, "throttle")
    clock_keys = {k: v for k, v in throttle.items() if k in _CLOCK}
    pid_keys = {k: v for k, v in throttle.items() if k in _PID}
    stray = [k for k in throttle if k not in _CLOCK and k not in _PID]
    if stray:
        raise ConfigError(f"config: unknown keys {stray} in section 'throttle'")

    predictor = _section(doc, "predictor")
    unknown = [k for k in predictor if k not in _PREDICTOR_KEYS]
    if unknown:
        raise ConfigError(f"config: unknown keys {unknown} in section 'predictor'")

    try:
        scheduler = SchedulerConfig(
            **_kwargs("scheduler", _section(doc, "scheduler"), _SCHEDULER))
        interference = InterferenceParams(
            **_kwargs("interference", _section(doc, "interference"), _INTERFERENCE))
        faults = FaultModel(**_kwargs("faults", _section(doc, "faults"), _FAULTS))
        clock = ClockParams(**_kwargs("throttle", clock_keys, _CLOCK))
        pid = PidParams(**_kwargs("throttle", pid_keys, _PID))
        thresholds = Thresholds(
            **_kwargs("thresholds", _section(doc, "thresholds"), _THRESHOLDS))
        output = _kwargs("output", _section(doc, "output"), _OUTPUT)

        kwargs = dict(scheduler=scheduler, interference=interference, faults=faults,
                      clock=clock, pid=pid, thresholds=thresholds, **output)
        if "online_sm" in predictor:
            kwargs["table_online_sm"] = _axis("online_sm", predictor["online_sm"])
        if "offline_sm" in predictor:
            kwargs["table_offline_sm"] = _axis("offline_sm", predictor["offline_sm"])
        if "sm_pct" in predictor:
            kwargs["table_sm_pct"] = _axis("sm_pct", predictor["sm_pct"])
        if "table_path" in predictor and predictor["table_path"] is not None:
            kwargs["table_path"] = str(predictor["table_path"])
        return SimConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config: {e}") from e


def config_to_dict(cfg: SimConfig) -> Dict:
    """Inverse of config_from_dict over the sections it owns."""
    def back(obj, keymap):
        return {k: getattr(obj, f) for k, f in keymap.items()}

    doc = {
        "scheduler": back(cfg.scheduler, _SCHEDULER),
        "interference": back(cfg.interference, _INTERFERENCE),
        "faults": back(cfg.faults, _FAULTS),
        "throttle": {**back(cfg.clock, _CLOCK), **back(cfg.pid, _PID)},
        "thresholds": back(cfg.thresholds, _THRESHOLDS),
        "predictor": {
            "online_sm": list(cfg.table_online_sm),
            "offline_sm": list(cfg.table_offline_sm),
            "sm_pct": list(cfg.table_sm_pct),
        },
        "output": back(cfg, _OUTPUT),
    }
    if cfg.table_path is not None:
        doc["predictor"]["table_path"] = cfg.table_path
    return doc


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config '{path}': invalid JSON ({e})") from e
    return config_from_dict(doc)


def save_config(cfg: SimConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")
