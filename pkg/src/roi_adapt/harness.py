"""Command implementations wiring the pipeline end to end.

fit: sample random (ROI, QF) encodes and fit the size polynomial.
train: run soft actor-critic over the environment, save checkpoint+curve.
eval: replay identical frames+trace under each policy and compare.
report: re-render charts from the CSVs of a previous run.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import report, sac, sizemodel
from .codec import encode_frame
from .config import (artifact_comments, build_bounds, build_env_config,
                     build_frames, build_hyperparams, build_trace)
from .env import (EPISODE_LOG_COLUMNS, Action, EnvConfig, StreamEnv,
                  apply_action)
from .fileio import read_csv, write_csv
from .sac import load_policy_checkpoint, preset_policy, save_policy_checkpoint
from .sizemodel import SizeSample, fit_polynomial, model_from_json, model_to_json

BASELINE_NOTE = ("baselines: low = original ROI with qf=1; "
                 "high = full-frame ROI (nothing lossy) with qf=100")
SSIM_NOTE = ("ssim compares full frames; the lossless ROI raises the mean")

NORMALIZED_COLUMNS = ("step", "norm_throughput", "norm_delay", "norm_quality")
SUMMARY_COLUMNS = ("policy", "frames", "mean_delay_s", "mean_ssim",
                   "mean_reward", "mean_bytes", "delay_vs_high_pct",
                   "delay_vs_low_pct")


def cmd_fit(cfg: dict, run_dir: Path) -> dict:
    """Randomized encode sampling over the frame corpus, then OLS fit."""
    frames = build_frames(cfg)
    rng = np.random.default_rng(cfg["fit"]["seed"])
    n = int(cfg["fit"]["samples"])
    samples = []
    for _ in range(n):
        frame = frames[int(rng.integers(len(frames)))]
        action = Action(float(rng.uniform()), float(rng.uniform()),
                        float(rng.uniform()))
        roi_eff, qf = apply_action(frame.roi, frame.width, frame.height, action)
        ef = encode_frame(frame, roi_eff, qf)
        samples.append(SizeSample(roi_eff.w, roi_eff.h, qf, ef.total_bytes))
    model = fit_polynomial(samples)

    samples_csv = run_dir / "size_samples.csv"
    meta = artifact_comments(cfg, {"fit_seed": cfg["fit"]["seed"], "samples": n})
    sizemodel.samples_to_csv(samples, samples_csv,
                             [f"{k}={v}" for k, v in meta.items()])
    model_path = run_dir / "size_model.json"
    model_to_json(model, model_path)
    print(f"fit: n={n} r_squared={model.r_squared:.4f} -> {model_path}")
    return {"model_path": str(model_path), "samples_csv": str(samples_csv),
            "r_squared": model.r_squared}


def _load_size_model(cfg: dict, run_dir: Path):
    path = cfg.get("model_path")
    if path and Path(path).exists():
        return model_from_json(path)
    cached = run_dir / "size_model.json"
    if cached.exists():
        return model_from_json(cached)
    return model_from_json(cmd_fit(cfg, run_dir)["model_path"])


def cmd_train(cfg: dict, run_dir: Path) -> dict:
    frames = build_frames(cfg)
    trace = build_trace(cfg)
    env_cfg = build_env_config(cfg)
    model = None
    if env_cfg.size_mode == "regression":
        model = _load_size_model(cfg, run_dir)
    env = StreamEnv(frames, trace, env_cfg, model)
    hp = build_hyperparams(cfg)
    result = sac.train(env, hp)

    ckpt_path = run_dir / "checkpoint.json"
    save_policy_checkpoint(ckpt_path, result.agent, env_cfg.bounds, hp.seed)
    curve_path = run_dir / "curve.csv"
    write_csv(curve_path, ("step", "episode", "reward"), result.curve,
              artifact_comments(cfg, {"sac_seed": hp.seed,
                                      "total_steps": hp.total_steps}))
    svg_path = run_dir / "curve.svg"
    episodes = [row[1] for row in result.curve]
    rewards = [row[2] for row in result.curve]
    report.line_chart(svg_path, "episode reward",
                      {"reward": (episodes, rewards)},
                      x_label="episode", y_label="total reward")
    tail = rewards[-10:] if rewards else [0.0]
    print(f"train: {hp.total_steps} steps, {len(rewards)} episodes, "
          f"final-10-episode mean reward {np.mean(tail):.4f}")
    return {"checkpoint": str(ckpt_path), "curve_csv": str(curve_path),
            "curve_svg": str(svg_path), "episode_rewards": rewards}


def _resolve_policy(name: str, cfg: dict, run_dir: Path):
    if name == "checkpoint":
        path = cfg.get("checkpoint_path") or (run_dir / "checkpoint.json")
        policy = load_policy_checkpoint(path)
        return policy, policy.bounds
    return preset_policy(name), build_bounds(cfg)


def _replay(policy, env: StreamEnv) -> list:
    obs = env.reset()
    while not env.exhausted:
        a01 = np.clip(policy.action01(obs.vector()), 0.0, 1.0)
        obs = env.step(Action.from_vector(a01)).next_state
    return list(env.episode_rows)


def cmd_eval(cfg: dict, run_dir: Path, policies: list[str] | None = None) -> dict:
    """Replay identical frames+trace under each policy and compare."""
    frames = build_frames(cfg)
    trace = build_trace(cfg)
    names = policies or cfg["eval"]["policies"]
    size_mode = cfg["eval"]["size_mode"]
    model = None
    if size_mode == "regression":
        model = _load_size_model(cfg, run_dir)
    bounds = build_bounds(cfg)

    notes = {"reward_preset": cfg["env"]["reward_preset"],
             "note1": BASELINE_NOTE, "note2": SSIM_NOTE,
             "bounds": bounds.to_dict()}
    per_policy: dict[str, dict] = {}
    series_for_chart: dict[str, tuple] = {}
    for name in names:
        policy, pol_bounds = _resolve_policy(name, cfg, run_dir)
        env_cfg = EnvConfig(
            size_mode=size_mode,
            reward_preset=cfg["env"]["reward_preset"],
            reward_threshold=cfg["env"]["reward_threshold"],
            bounds=pol_bounds,
            episode_len=cfg["eval"]["steps"],
        )
        env = StreamEnv(frames, trace, env_cfg, model)
        rows = _replay(policy, env)
        csv_path = run_dir / f"eval_{name}.csv"
        write_csv(csv_path, EPISODE_LOG_COLUMNS, rows,
                  artifact_comments(cfg, {"policy": name, **notes}))

        norm_rows = [
            (r[0],
             bounds.throughput.normalize(r[1]),
             bounds.delay.normalize(r[6]),
             bounds.quality.normalize(r[7]))
            for r in rows
        ]
        write_csv(run_dir / f"eval_{name}_normalized.csv", NORMALIZED_COLUMNS,
                  norm_rows, artifact_comments(cfg, {"policy": name, **notes}))

        delays = np.array([r[6] for r in rows])
        per_policy[name] = {
            "frames": len(rows),
            "mean_delay_s": float(delays.mean()),
            "mean_ssim": float(np.mean([r[7] for r in rows])),
            "mean_reward": float(np.mean([r[8] for r in rows])),
            "mean_bytes": float(np.mean([r[5] for r in rows])),
            "norm_rows": norm_rows,
        }
        series_for_chart[name] = ([r[0] for r in rows], [r[6] for r in rows])

    summary_rows = []
    for name in names:
        s = per_policy[name]
        row = [name, s["frames"], s["mean_delay_s"], s["mean_ssim"],
               s["mean_reward"], s["mean_bytes"]]
        for base in ("high", "low"):
            if base in per_policy and per_policy[base]["mean_delay_s"] > 0:
                b = per_policy[base]["mean_delay_s"]
                row.append(100.0 * (b - s["mean_delay_s"]) / b)
            else:
                row.append("")
        summary_rows.append(tuple(row))
    summary_path = run_dir / "eval_summary.csv"
    write_csv(summary_path, SUMMARY_COLUMNS, summary_rows,
              artifact_comments(cfg, notes))

    chart_order = sorted(names)
    report.line_chart(run_dir / "eval_delay.svg", "per-step delay by policy",
                      {n: series_for_chart[n] for n in chart_order},
                      x_label="step", y_label="delay (s)")
    report.bar_chart(run_dir / "eval_quality.svg", "mean SSIM by policy",
                     chart_order,
                     [per_policy[n]["mean_ssim"] for n in chart_order],
                     y_label="mean SSIM")
    tdq_name = "checkpoint" if "checkpoint" in per_policy else names[0]
    nr = per_policy[tdq_name]["norm_rows"]
    report.line_chart(
        run_dir / f"eval_tdq_{tdq_name}.svg",
        f"normalized throughput/delay/quality ({tdq_name})",
        {"throughput": ([r[0] for r in nr], [r[1] for r in nr]),
         "delay": ([r[0] for r in nr], [r[2] for r in nr]),
         "quality": ([r[0] for r in nr], [r[3] for r in nr])},
        x_label="step", y_label="normalized value",
    )

    print(f"eval: {BASELINE_NOTE}")
    for name in names:
        s = per_policy[name]
        print(f"  {name:>10}: mean delay {s['mean_delay_s']:.4f}s "
              f"mean ssim {s['mean_ssim']:.4f} mean bytes {s['mean_bytes']:.0f}")
    return {"summary_csv": str(summary_path), "policies": per_policy}


def cmd_report(run_dir: Path) -> list[str]:
    """Re-render SVG charts from the CSVs in a run directory."""
    run_dir = Path(run_dir)
    written: list[str] = []

    def _floats(rows, idx):
        return [float(r[idx]) for r in rows]

    curve = run_dir / "curve.csv"
    if curve.exists():
        cols, rows, _ = read_csv(curve)
        if not rows:
            raise ValueError(f"{curve} has no data rows")
        path = report.line_chart(run_dir / "curve.svg", "episode reward",
                                 {"reward": (_floats(rows, 1), _floats(rows, 2))},
                                 x_label="episode", y_label="total reward")
        written.append(str(path))

    delay_series = {}
    quality_means = {}
    for csv_path in sorted(run_dir.glob("eval_*.csv")):
        if csv_path.name.endswith("_normalized.csv") or csv_path.name == "eval_summary.csv":
            continue
        cols, rows, _ = read_csv(csv_path)
        if not rows:
            raise ValueError(f"{csv_path} has no data rows")
        name = csv_path.stem.removeprefix("eval_")
        delay_series[name] = (_floats(rows, 0), _floats(rows, 6))
        quality_means[name] = float(np.mean(_floats(rows, 7)))
    if delay_series:
        written.append(str(report.line_chart(
            run_dir / "eval_delay.svg", "per-step delay by policy",
            delay_series, x_label="step", y_label="delay (s)")))
        written.append(str(report.bar_chart(
            run_dir / "eval_quality.svg", "mean SSIM by policy",
            list(quality_means), list(quality_means.values()),
            y_label="mean SSIM")))
    if not written:
        raise ValueError(f"no renderable CSVs found in {run_dir}")
    return written
