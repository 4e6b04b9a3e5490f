"""Socket sender/receiver pair measuring real per-frame delay.

The sender encodes each frame per the loaded policy (or a fixed preset)
and transmits it over TCP with length-prefixed framing; when pacing is
on, a token bucket throttles writes to the trace throughput so loopback
runs emulate the link. The receiver decodes, acknowledges with its
receive timestamp, and both sides log per-frame delay.

Wire message (integers big-endian):

    kind u8 (1=frame, 2=ack, 3=end) | frame_id u32 | send_ts_us u64 |
    payload_len u32 | payload

Frame payloads are EncodedFrame containers. Acks carry the receiver's
receive timestamp in send_ts_us. One-way delays are only meaningful when
both ends share a host clock; cross-host runs fall back to RTT/2 and say
so in the log header.
"""

from __future__ import annotations

import socket
import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .codec import DecodeError, EncodedFrame, decode_frame, encode_frame
from .dataset import FrameSet
from .env import Action, NormBounds, StateObs, apply_action
from .quality import ssim
from .traces import ThroughputTrace

_MSG = struct.Struct(">BIQI")
KIND_FRAME = 1
KIND_ACK = 2
KIND_END = 3

PACING_QUANTUM_S = 0.01

DELAY_LOG_COLUMNS = ("frame_id", "bytes", "qf", "roi_w", "roi_h",
                     "send_ts_us", "recv_ts_us", "delay_s")


class ProtocolError(Exception):
    """Malformed wire traffic."""


@dataclass(frozen=True)
class WireMessage:
    kind: int
    frame_id: int
    send_ts_us: int
    payload: bytes = b""

    def to_bytes(self) -> bytes:
        return _MSG.pack(self.kind, self.frame_id, self.send_ts_us,
                         len(self.payload)) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "WireMessage":
        if len(data) < _MSG.size:
            raise ProtocolError("message shorter than header")
        kind, frame_id, ts, plen = _MSG.unpack_from(data, 0)
        if kind not in (KIND_FRAME, KIND_ACK, KIND_END):
            raise ProtocolError(f"unknown message kind {kind}")
        if len(data) != _MSG.size + plen:
            raise ProtocolError(
                f"message length {len(data)} != declared {_MSG.size + plen}"
            )
        return cls(kind, frame_id, ts, data[_MSG.size:])


@dataclass(frozen=True)
class DelayRecord:
    frame_id: int
    bytes: int
    qf: int
    roi_w: int
    roi_h: int
    send_ts_us: int
    recv_ts_us: int
    delay_s: float

    def row(self) -> tuple:
        return (self.frame_id, self.bytes, self.qf, self.roi_w, self.roi_h,
                self.send_ts_us, self.recv_ts_us, self.delay_s)


def now_us() -> int:
    return time.monotonic_ns() // 1000


def _recv_exactly(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            raise ProtocolError(f"connection closed mid-message ({got}/{n} bytes)")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_message(sock: socket.socket) -> WireMessage | None:
    """Read one framed message; None on clean EOF at a boundary."""
    first = sock.recv(1)
    if not first:
        return None
    head = first + _recv_exactly(sock, _MSG.size - 1)
    kind, frame_id, ts, plen = _MSG.unpack(head)
    if kind not in (KIND_FRAME, KIND_ACK, KIND_END):
        raise ProtocolError(f"unknown message kind {kind}")
    payload = _recv_exactly(sock, plen) if plen else b""
    return WireMessage(kind, frame_id, ts, payload)


class TokenBucket:
    """Byte-rate throttle with a one-quantum burst, 10 ms granularity."""

    def __init__(self, rate_bytes_per_s: float,
                 quantum_s: float = PACING_QUANTUM_S):
        if rate_bytes_per_s <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate_bytes_per_s
        self.quantum = quantum_s
        self.burst = max(1.0, rate_bytes_per_s * quantum_s)
        self.tokens = self.burst
        self.stamp = time.monotonic()

    def consume(self, n: int) -> None:
        while True:
            now = time.monotonic()
            self.tokens = min(self.burst,
                              self.tokens + (now - self.stamp) * self.rate)
            self.stamp = now
            if self.tokens >= n:
                self.tokens -= n
                return
            time.sleep(self.quantum)


def _paced_send(sock: socket.socket, data: bytes, rate_bytes_per_s: float) -> None:
    bucket = TokenBucket(rate_bytes_per_s)
    chunk = max(1, int(bucket.burst))
    for off in range(0, len(data), chunk):
        piece = data[off:off + chunk]
        bucket.consume(len(piece))
        sock.sendall(piece)


def write_delay_log(path: str | Path, records: list[DelayRecord],
                    comments: list[str] | None = None) -> None:
    lines = [f"# {c}" for c in (comments or [])]
    lines.append(",".join(DELAY_LOG_COLUMNS))
    for r in records:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in r.row()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_delay_log(path: str | Path) -> list[DelayRecord]:
    records = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("frame_id"):
            continue
        p = line.split(",")
        records.append(DelayRecord(int(p[0]), int(p[1]), int(p[2]), int(p[3]),
                                   int(p[4]), int(p[5]), int(p[6]), float(p[7])))
    return records


@dataclass
class ReceiverResult:
    records: list
    protocol_errors: list
    decode_errors: list


def serve_receiver(bind: tuple[str, int] = ("127.0.0.1", 0),
                   out_csv: str | Path | None = None,
                   save_decodes_dir: str | Path | None = None,
                   on_ready=None,
                   timeout_s: float = 120.0) -> ReceiverResult:
    """Accept one TCP session; ack every frame and log delays.

    Decode failures are logged and the session continues; malformed wire
    traffic ends the session with a protocol error record.
    """
    records: list[DelayRecord] = []
    protocol_errors: list[str] = []
    decode_errors: list[str] = []
    if save_decodes_dir is not None:
        save_decodes_dir = Path(save_decodes_dir)
        save_decodes_dir.mkdir(parents=True, exist_ok=True)

    lsock = socket.create_server(bind)
    lsock.settimeout(timeout_s)
    try:
        if on_ready is not None:
            on_ready(lsock.getsockname())
        conn, _peer = lsock.accept()
    finally:
        lsock.close()
    conn.settimeout(timeout_s)
    try:
        while True:
            try:
                msg = read_message(conn)
            except ProtocolError as exc:
                protocol_errors.append(str(exc))
                break
            if msg is None:
                protocol_errors.append("connection closed without end message")
                break
            if msg.kind == KIND_END:
                break
            if msg.kind != KIND_FRAME:
                protocol_errors.append(f"unexpected message kind {msg.kind}")
                break
            recv_ts = now_us()
            qf = roi_w = roi_h = 0
            try:
                ef = EncodedFrame.from_bytes(msg.payload)
                qf, roi_w, roi_h = ef.qf, ef.roi.w, ef.roi.h
                decoded = decode_frame(ef)
                if save_decodes_dir is not None:
                    Image.fromarray(decoded.luma, mode="L").save(
                        save_decodes_dir / f"decode_{msg.frame_id:04d}.png"
                    )
            except DecodeError as exc:
                decode_errors.append(f"frame {msg.frame_id}: {exc}")
            records.append(DelayRecord(
                frame_id=msg.frame_id, bytes=len(msg.payload), qf=qf,
                roi_w=roi_w, roi_h=roi_h, send_ts_us=msg.send_ts_us,
                recv_ts_us=recv_ts,
                delay_s=(recv_ts - msg.send_ts_us) / 1e6,
            ))
            conn.sendall(WireMessage(KIND_ACK, msg.frame_id, recv_ts).to_bytes())
    finally:
        conn.close()
    if out_csv is not None:
        comments = [f"role=receiver frames={len(records)}"]
        comments += [f"protocol_error={e}" for e in protocol_errors]
        comments += [f"decode_error={e}" for e in decode_errors]
        write_delay_log(out_csv, records, comments)
    return ReceiverResult(records, protocol_errors, decode_errors)


_LOOPBACK_HOSTS = ("127.0.0.1", "localhost", "::1")


def run_sender(addr: tuple[str, int], frames: FrameSet, trace: ThroughputTrace,
               policy, pace: bool = False,
               out_csv: str | Path | None = None) -> list[DelayRecord]:
    """Stream every frame once, adapting per the policy; returns sender log.

    Policies expose ``action01(state_vector) -> [0,1]^3``. Pacing throttles
    the socket writes to the per-frame trace throughput.
    """
    bounds = getattr(policy, "bounds", None) or NormBounds()
    same_host = addr[0] in _LOOPBACK_HOSTS

    frame0 = frames[0]
    boot = encode_frame(frame0, frame0.roi, 100)
    prev_delay = boot.total_bytes * 8.0 / (trace.at(0) * 1e6)
    prev_quality = ssim(frame0.luma, decode_frame(boot).luma).mean_ssim

    records: list[DelayRecord] = []
    sock = socket.create_connection(addr, timeout=120.0)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    try:
        for i, frame in enumerate(frames.frames):
            throughput = trace.at(i)
            state = StateObs.build(prev_delay, prev_quality, throughput, bounds)
            action = Action.from_vector(np.clip(policy.action01(state.vector()),
                                                0.0, 1.0))
            roi_eff, qf = apply_action(frame.roi, frame.width, frame.height,
                                       action)
            ef = encode_frame(frame, roi_eff, qf)
            payload = ef.to_bytes()
            send_ts = now_us()
            data = WireMessage(KIND_FRAME, i, send_ts, payload).to_bytes()
            if pace:
                _paced_send(sock, data, throughput * 1e6 / 8.0)
            else:
                sock.sendall(data)
            ack = read_message(sock)
            if ack is None or ack.kind != KIND_ACK or ack.frame_id != i:
                raise ProtocolError(f"bad or missing ack for frame {i}")
            ack_local = now_us()
            if same_host:
                delay = (ack.send_ts_us - send_ts) / 1e6
                recv_ts = ack.send_ts_us
            else:
                delay = (ack_local - send_ts) / 2e6
                recv_ts = ack_local
            records.append(DelayRecord(
                frame_id=i, bytes=len(payload), qf=qf,
                roi_w=roi_eff.w, roi_h=roi_eff.h,
                send_ts_us=send_ts, recv_ts_us=recv_ts, delay_s=delay,
            ))
            prev_delay = delay
            prev_quality = ssim(frame.luma, decode_frame(ef).luma).mean_ssim
        sock.sendall(WireMessage(KIND_END, len(frames.frames), now_us()).to_bytes())
    finally:
        sock.close()
    if out_csv is not None:
        mode = ("one-way same-host clocks" if same_host
                else "RTT/2 (cross-host clocks not comparable)")
        comments = [
            f"role=sender policy={getattr(policy, 'name', 'policy')} "
            f"pace={pace} delay_mode={mode}",
        ]
        write_delay_log(out_csv, records, comments)
    return records


def mean_ssim_of_decodes(originals: FrameSet,
                         decodes_dir: str | Path) -> float:
    """Offline quality check: SSIM of saved receiver decodes vs originals."""
    decodes_dir = Path(decodes_dir)
    paths = sorted(decodes_dir.glob("decode_*.png"))
    if not paths:
        raise ValueError(f"no saved decodes in {decodes_dir}")
    scores = []
    for p in paths:
        idx = int(p.stem.split("_")[1])
        dec = np.asarray(Image.open(p).convert("L"), dtype=np.uint8)
        scores.append(ssim(originals[idx].luma, dec).mean_ssim)
    return float(np.mean(scores))


def summarize(records: list[DelayRecord],
              baseline: list[DelayRecord] | None = None,
              mean_ssim: float | None = None) -> dict:
    """Delay statistics, optionally as a percentage against a baseline."""
    if not records:
        raise ValueError("cannot summarize an empty session log")
    delays = np.array([r.delay_s for r in records])
    out = {
        "frames": len(records),
        "mean_delay_s": float(delays.mean()),
        "median_delay_s": float(np.median(delays)),
        "p95_delay_s": float(np.percentile(delays, 95)),
        "mean_bytes": float(np.mean([r.bytes for r in records])),
        "delay_definition": ("first-byte send to receive stamp; one-way on "
                             "same-host clocks, RTT/2 cross-host (see log "
                             "header)"),
    }
    if mean_ssim is not None:
        out["mean_ssim"] = mean_ssim
    if baseline is not None:
        if not baseline:
            raise ValueError("baseline log is empty")
        base = float(np.mean([r.delay_s for r in baseline]))
        out["baseline_mean_delay_s"] = base
        out["delay_reduction_pct"] = 100.0 * (base - out["mean_delay_s"]) / base
    return out
