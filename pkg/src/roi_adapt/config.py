"""Run configuration: JSON documents with dotted --set overrides.

Every command resolves one config dict, hashes it (plus the kernel
backend), and stamps the hash and seeds into each artifact it writes, so
equal hashes mean bitwise-identical outputs.
"""

from __future__ import annotations

import copy
import hashlib
import json
import time
from pathlib import Path

from . import kernels
from .dataset import FrameSet, load_frames, synth_frames
from .env import Bounds, EnvConfig, NormBounds
from .sac import SacHyperParams
from .traces import ThroughputTrace, load_trace, synth_trace

DEFAULT_CONFIG: dict = {
    "seed": 1,
    "out_dir": "runs",
    "run_name": None,
    "frames": {
        "synthetic": {"seed": 11, "count": 24, "width": 320, "height": 256},
    },
    "trace": {
        "synthetic": {"seed": 12, "length": 4096, "min_mbps": 1.7912,
                      "max_mbps": 9.5001, "step_sigma": 0.4},
    },
    "model_path": None,
    "checkpoint_path": None,
    "fit": {"samples": 500, "seed": 13},
    "env": {
        "size_mode": "regression",
        "reward_preset": "min-delay-max-quality",
        "reward_threshold": "midpoint",
        "episode_len": None,
        "bounds": {
            "delay": [0.0791, 0.2541],
            "quality": [0.6144, 0.9839],
            "throughput": [1.7912, 9.5001],
        },
    },
    "sac": {
        "lr_v": 0.002, "lr_q": 0.002, "lr_pi": 0.002,
        "discount": 0.99, "tau": 0.005, "alpha": 0.2,
        "batch": 256, "buffer_capacity": 100000,
        "hidden": [64, 64], "log_std_min": -20.0, "log_std_max": 2.0,
        "total_steps": 20000, "warmup_steps": 1000, "updates_per_step": 1, "seed": 14,
    },
    "eval": {
        "policies": ["checkpoint", "low", "high"],
        "size_mode": "measured",
        "steps": None,
    },
}


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _apply_override(cfg: dict, dotted: str, raw_value: str) -> None:
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def load_config(path: str | Path | None = None,
                overrides: list[str] | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        user = json.loads(Path(path).read_text())
        cfg = _deep_merge(cfg, user)
    for item in overrides or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _apply_override(cfg, key.strip(), value.strip())
    return cfg


def config_hash(cfg: dict) -> str:
    """Hash of the computational config; where outputs land is excluded,
    so equal hashes promise bitwise-equal artifacts."""
    core = {k: v for k, v in cfg.items() if k not in ("out_dir", "run_name")}
    doc = {"config": core, "backend": kernels.BACKEND}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def artifact_comments(cfg: dict, extra: dict | None = None) -> dict:
    out = {"config_hash": config_hash(cfg), "seed": cfg["seed"],
           "backend": kernels.BACKEND}
    out.update(extra or {})
    return out


def make_run_dir(cfg: dict) -> Path:
    name = cfg.get("run_name")
    if not name:
        name = time.strftime("run-%Y%m%d-%H%M%S")
    run_dir = Path(cfg["out_dir"]) / name
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def build_frames(cfg: dict) -> FrameSet:
    spec = cfg["frames"]
    if "dir" in spec:
        ann = spec.get("annotations") or str(Path(spec["dir"]) / "annotations.csv")
        return load_frames(spec["dir"], ann)
    s = spec["synthetic"]
    return synth_frames(seed=s["seed"], n=s["count"],
                        width=s["width"], height=s["height"])


def build_trace(cfg: dict) -> ThroughputTrace:
    spec = cfg["trace"]
    if "path" in spec and spec["path"]:
        return load_trace(spec["path"])
    s = spec["synthetic"]
    return synth_trace(seed=s["seed"], n=s["length"], min_mbps=s["min_mbps"],
                       max_mbps=s["max_mbps"], step_sigma=s["step_sigma"])


def build_bounds(cfg: dict) -> NormBounds:
    b = cfg["env"]["bounds"]
    return NormBounds(delay=Bounds(*b["delay"]), quality=Bounds(*b["quality"]),
                      throughput=Bounds(*b["throughput"]))


def build_env_config(cfg: dict, size_mode: str | None = None,
                     episode_len: int | None = None) -> EnvConfig:
    e = cfg["env"]
    return EnvConfig(
        size_mode=size_mode or e["size_mode"],
        reward_preset=e["reward_preset"],
        reward_threshold=e["reward_threshold"],
        bounds=build_bounds(cfg),
        episode_len=episode_len if episode_len is not None else e["episode_len"],
    )


def build_hyperparams(cfg: dict) -> SacHyperParams:
    s = cfg["sac"]
    return SacHyperParams(
        lr_v=s["lr_v"], lr_q=s["lr_q"], lr_pi=s["lr_pi"],
        discount=s["discount"], tau=s["tau"], alpha=s["alpha"],
        batch=s["batch"], buffer_capacity=s["buffer_capacity"],
        hidden=tuple(s["hidden"]), log_std_min=s["log_std_min"],
        log_std_max=s["log_std_max"], total_steps=s["total_steps"],
        warmup_steps=s["warmup_steps"],
        updates_per_step=s.get("updates_per_step", 1), seed=s["seed"],
    )
