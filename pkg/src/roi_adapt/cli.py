"""roi-adapt command line: fit | train | eval | report | trace | stream."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .config import load_config, make_run_dir
from .dataset import load_frames
from .sac import load_policy_checkpoint, preset_policy
from .stream import (mean_ssim_of_decodes, read_delay_log, run_sender,
                     serve_receiver, summarize)
from .traces import load_trace, save_trace, synth_trace, TraceParseError


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="JSON config file (defaults merged underneath)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="dotted config override")


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="roi-adapt",
        description="Throughput-adaptive ROI streaming: fit the size model, "
                    "train the policy, evaluate against baselines, stream.")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("fit", "sample encodes and fit the size polynomial"),
        ("train", "train the adaptation policy"),
        ("eval", "replay policies on identical inputs and compare"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)
        if name == "eval":
            p.add_argument("--policies", default=None,
                           help="comma list from {checkpoint,low,high}")
            p.add_argument("--checkpoint", type=Path, default=None)

    p = sub.add_parser("report", help="re-render charts from a run directory")
    p.add_argument("--run", type=Path, required=True)

    p = sub.add_parser("trace", help="throughput trace tools")
    tsub = p.add_subparsers(dest="trace_command", required=True)
    ts = tsub.add_parser("synth", help="generate a bounded random walk")
    ts.add_argument("--seed", type=int, default=0)
    ts.add_argument("--length", type=int, default=1024)
    ts.add_argument("--min", dest="min_mbps", type=float, default=1.7912)
    ts.add_argument("--max", dest="max_mbps", type=float, default=9.5001)
    ts.add_argument("--sigma", type=float, default=0.5)
    ts.add_argument("--out", type=Path, required=True)
    tv = tsub.add_parser("validate", help="parse and summarize a trace file")
    tv.add_argument("path", type=Path)

    p = sub.add_parser("stream", help="socket sender/receiver delay harness")
    ssub = p.add_subparsers(dest="stream_command", required=True)
    sr = ssub.add_parser("recv", help="accept one session and log delays")
    sr.add_argument("--bind", type=_addr, required=True)
    sr.add_argument("--out", type=Path, required=True)
    sr.add_argument("--save-decodes", type=Path, default=None)
    ss = ssub.add_parser("send", help="stream frames under a policy")
    ss.add_argument("--to", type=_addr, required=True)
    ss.add_argument("--frames", type=Path, required=True)
    ss.add_argument("--annotations", type=Path, default=None)
    ss.add_argument("--trace", type=Path, required=True)
    ss.add_argument("--policy", required=True,
                    help="checkpoint path or preset: low | high")
    ss.add_argument("--pace", action="store_true",
                    help="throttle writes to the trace throughput")
    ss.add_argument("--out", type=Path, default=None)
    ss.add_argument("--summary-baseline", type=Path, default=None,
                    help="compare against a previous delay log")
    ss.add_argument("--decodes-dir", type=Path, default=None,
                    help="receiver decodes for offline SSIM in the summary")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command in ("fit", "train", "eval"):
        cfg = load_config(args.config, args.overrides)
        run_dir = make_run_dir(cfg)
        print(f"run directory: {run_dir}")
        if args.command == "fit":
            harness.cmd_fit(cfg, run_dir)
        elif args.command == "train":
            harness.cmd_train(cfg, run_dir)
        else:
            if args.checkpoint is not None:
                cfg["checkpoint_path"] = str(args.checkpoint)
            policies = (args.policies.split(",") if args.policies else None)
            harness.cmd_eval(cfg, run_dir, policies)
        return 0

    if args.command == "report":
        for path in harness.cmd_report(args.run):
            print(f"wrote {path}")
        return 0

    if args.command == "trace":
        if args.trace_command == "synth":
            trace = synth_trace(args.seed, args.length, args.min_mbps,
                                args.max_mbps, args.sigma)
            save_trace(trace, args.out, [trace.source])
            print(f"wrote {args.out} ({len(trace)} samples)")
            return 0
        try:
            trace = load_trace(args.path)
        except TraceParseError as exc:
            print(f"invalid trace: {exc}", file=sys.stderr)
            return 1
        print(f"{args.path}: {len(trace)} samples, "
              f"throughput [{trace.min_mbps:.4f}, {trace.max_mbps:.4f}] Mb/s")
        return 0

    if args.command == "stream":
        if args.stream_command == "recv":
            result = serve_receiver(
                bind=args.bind, out_csv=args.out,
                save_decodes_dir=args.save_decodes,
                on_ready=lambda a: print(f"listening on {a[0]}:{a[1]}",
                                         flush=True),
            )
            print(f"received {len(result.records)} frames -> {args.out}")
            for err in result.protocol_errors + result.decode_errors:
                print(f"error: {err}", file=sys.stderr)
            return 0 if not result.protocol_errors else 1

        frames = load_frames(
            args.frames,
            args.annotations or args.frames / "annotations.csv",
        )
        trace = load_trace(args.trace)
        if args.policy in ("low", "high"):
            policy = preset_policy(args.policy)
        else:
            policy = load_policy_checkpoint(args.policy)
        records = run_sender(args.to, frames, trace, policy,
                             pace=args.pace, out_csv=args.out)
        baseline = (read_delay_log(args.summary_baseline)
                    if args.summary_baseline else None)
        ssim_mean = (mean_ssim_of_decodes(frames, args.decodes_dir)
                     if args.decodes_dir else None)
        stats = summarize(records, baseline, ssim_mean)
        for k, v in stats.items():
            print(f"{k}: {v}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
