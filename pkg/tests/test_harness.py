import json
import socket
import threading

import numpy as np
import pytest

from roi_adapt import cli, harness, report
from roi_adapt.config import (config_hash, load_config, make_run_dir)
from roi_adapt.dataset import save_frames, synth_frames
from roi_adapt.fileio import read_csv, write_csv
from roi_adapt.traces import save_trace, synth_trace


def _cfg(tmp_path, name, **extra):
    overrides = [
        f"out_dir={tmp_path}", f"run_name={name}",
        "frames.synthetic.count=5", "frames.synthetic.width=160",
        "frames.synthetic.height=128",
        "trace.synthetic.length=64",
        "fit.samples=40",
        "sac.total_steps=220", "sac.warmup_steps=60", "sac.batch=32",
        "sac.hidden=[16,16]",
        "eval.steps=8",
    ] + [f"{k}={v}" for k, v in extra.items()]
    return load_config(overrides=overrides)


# ---------------------------------------------------------------------- config

def test_config_overrides_and_hash():
    a = load_config(overrides=["sac.alpha=0.5", "env.size_mode=measured"])
    assert a["sac"]["alpha"] == 0.5
    assert a["env"]["size_mode"] == "measured"
    b = load_config(overrides=["sac.alpha=0.5", "env.size_mode=measured"])
    assert config_hash(a) == config_hash(b)
    c = load_config(overrides=["sac.alpha=0.25"])
    assert config_hash(a) != config_hash(c)


def test_config_file_merge(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"sac": {"alpha": 0.07}, "seed": 9}))
    cfg = load_config(path)
    assert cfg["sac"]["alpha"] == 0.07
    assert cfg["seed"] == 9
    assert cfg["sac"]["tau"] == 0.005  # defaults preserved underneath


def test_config_rejects_bad_override():
    with pytest.raises(ValueError, match="key=value"):
        load_config(overrides=["oops"])


# ------------------------------------------------------------------------ fit

def test_fit_minimal_and_reproducible(tmp_path):
    cfg = _cfg(tmp_path, "fit-a", **{"fit.samples": 10})
    out_a = harness.cmd_fit(cfg, make_run_dir(cfg))
    assert out_a["r_squared"] > 0.0
    cfg_b = _cfg(tmp_path, "fit-b", **{"fit.samples": 10})
    out_b = harness.cmd_fit(cfg_b, make_run_dir(cfg_b))
    model_a = json.loads((tmp_path / "fit-a" / "size_model.json").read_text())
    model_b = json.loads((tmp_path / "fit-b" / "size_model.json").read_text())
    assert model_a == model_b


# ---------------------------------------------------------------------- train

@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("runs")
    cfg = _cfg(tmp_path, "train-smoke")
    run_dir = make_run_dir(cfg)
    out = harness.cmd_train(cfg, run_dir)
    return cfg, run_dir, out, tmp_path


def test_train_writes_artifacts(trained_run):
    _, run_dir, out, _ = trained_run
    assert (run_dir / "checkpoint.json").exists()
    assert (run_dir / "curve.csv").exists()
    assert (run_dir / "curve.svg").exists()
    cols, rows, comments = read_csv(run_dir / "curve.csv")
    assert cols == ["step", "episode", "reward"]
    assert len(rows) > 0
    assert "config_hash" in comments and "seed" in comments


def test_train_rerun_bit_identical(trained_run):
    cfg, run_dir, _, tmp_path = trained_run
    cfg2 = _cfg(tmp_path, "train-smoke-2")
    run_dir2 = make_run_dir(cfg2)
    harness.cmd_train(cfg2, run_dir2)
    for name in ("curve.csv", "checkpoint.json", "size_model.json",
                 "size_samples.csv", "curve.svg"):
        a = (run_dir / name).read_bytes()
        b = (run_dir2 / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"


# ----------------------------------------------------------------------- eval

def test_eval_baselines_and_reports(trained_run):
    cfg, run_dir, _, _ = trained_run
    out = harness.cmd_eval(cfg, run_dir)
    stats = out["policies"]
    assert set(stats) == {"checkpoint", "low", "high"}
    # high keeps everything lossless: per-step delay dominates low's
    _, low_rows, low_comments = read_csv(run_dir / "eval_low.csv")
    _, high_rows, _ = read_csv(run_dir / "eval_high.csv")
    for lo, hi in zip(low_rows, high_rows):
        assert float(hi[6]) >= float(lo[6])
    assert stats["high"]["mean_ssim"] == 1.0
    # normalization bounds echoed into the report header
    assert "bounds" in low_comments
    assert str(cfg["env"]["bounds"]["delay"][0]) in low_comments["bounds"]
    for name in ("eval_summary.csv", "eval_delay.svg", "eval_quality.svg",
                 "eval_tdq_checkpoint.svg", "eval_checkpoint_normalized.csv"):
        assert (run_dir / name).exists()


def test_eval_normalized_series_in_unit_range(trained_run):
    cfg, run_dir, _, _ = trained_run
    _, rows, _ = read_csv(run_dir / "eval_checkpoint_normalized.csv")
    for row in rows:
        for cell in row[1:]:
            assert 0.0 <= float(cell) <= 1.0


# --------------------------------------------------------------------- report

def test_report_idempotent(trained_run):
    _, run_dir, _, _ = trained_run
    first = {p: (run_dir / p).read_bytes()
             for p in ("curve.svg", "eval_delay.svg", "eval_quality.svg")}
    harness.cmd_report(run_dir)
    for name, blob in first.items():
        assert (run_dir / name).read_bytes() == blob


def test_report_axis_ranges_cover_data(trained_run):
    _, run_dir, _, _ = trained_run
    _, rows, _ = read_csv(run_dir / "curve.csv")
    rewards = [float(r[2]) for r in rows]
    svg = (run_dir / "curve.svg").read_text()
    assert report._tick(min(rewards)) in svg
    assert report._tick(max(rewards)) in svg


def test_report_rejects_empty_csv(tmp_path):
    write_csv(tmp_path / "curve.csv", ("step", "episode", "reward"), [])
    with pytest.raises(ValueError, match="no data rows"):
        harness.cmd_report(tmp_path)


def test_report_rejects_chartless_dir(tmp_path):
    with pytest.raises(ValueError, match="no renderable"):
        harness.cmd_report(tmp_path)


def test_charts_reject_empty_inputs(tmp_path):
    with pytest.raises(ValueError):
        report.line_chart(tmp_path / "x.svg", "t", {})
    with pytest.raises(ValueError):
        report.bar_chart(tmp_path / "x.svg", "t", [], [])


# ------------------------------------------------------------------------- cli

def test_cli_trace_synth_validate_roundtrip(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert cli.main(["trace", "synth", "--seed", "5", "--length", "32",
                     "--out", str(out)]) == 0
    assert cli.main(["trace", "validate", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "32 samples" in captured


def test_cli_trace_validate_rejects_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.0,1.0\n0.0,2.0\n")
    assert cli.main(["trace", "validate", str(bad)]) == 1
    assert "invalid trace" in capsys.readouterr().err


def test_cli_fit_with_overrides(tmp_path, capsys):
    rc = cli.main([
        "fit", "--set", f"out_dir={tmp_path}", "--set", "run_name=cli-fit",
        "--set", "fit.samples=15", "--set", "frames.synthetic.count=3",
        "--set", "frames.synthetic.width=160",
        "--set", "frames.synthetic.height=128",
    ])
    assert rc == 0
    assert (tmp_path / "cli-fit" / "size_model.json").exists()
    assert "r_squared" in capsys.readouterr().out


def test_cli_stream_send_recv(tmp_path, small_frames):
    frames_dir = tmp_path / "frames"
    save_frames(small_frames, frames_dir)
    trace_path = tmp_path / "trace.csv"
    save_trace(synth_trace(seed=3, n=16), trace_path)
    recv_log = tmp_path / "recv.csv"
    send_log = tmp_path / "send.csv"

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]

    recv_rc = {}

    def recv():
        recv_rc["rc"] = cli.main(["stream", "recv", "--bind",
                                  f"127.0.0.1:{port}", "--out", str(recv_log)])

    th = threading.Thread(target=recv)
    th.start()
    import time

    deadline = time.monotonic() + 10.0
    rc = None
    while time.monotonic() < deadline:
        try:
            rc = cli.main(["stream", "send", "--to", f"127.0.0.1:{port}",
                           "--frames", str(frames_dir), "--trace",
                           str(trace_path), "--policy", "low",
                           "--out", str(send_log)])
            break
        except (ConnectionRefusedError, OSError):
            time.sleep(0.05)
    th.join(timeout=30.0)
    assert rc == 0 and recv_rc["rc"] == 0
    from roi_adapt.stream import read_delay_log
    sent = read_delay_log(send_log)
    received = read_delay_log(recv_log)
    assert len(sent) == len(received) == len(small_frames)
    assert [r.frame_id for r in sent] == [r.frame_id for r in received]


def test_cli_rejects_bad_address():
    with pytest.raises(SystemExit):
        cli.main(["stream", "recv", "--bind", "nonsense", "--out", "x.csv"])
