"""Packet-level domain types and the synthetic labeled-trace generator.

Traces are ordered lists of PacketRecord. The generator draws inter-packet
gaps from an exponential distribution (plus optional Gaussian jitter, floored
at 1 microsecond) and per-packet fields from per-class distributions, so
classes can be separated in any chosen subset of the windowed features
downstream. Everything is a pure function of (profile, duration, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from tpbench.seeding import derive_seed

MIN_PACKET_LEN = 40
MAX_PACKET_LEN = 1514
MAX_TCP_WINDOW = 65535
MIN_GAP_SECONDS = 1e-6  # floor for inter-packet gaps


class Protocol(Enum):
    TCP = "TCP"
    UDP = "UDP"
    ICMP = "ICMP"
    OTHER = "OTHER"


class Scenario(Enum):
    MIC_ONOFF = "mic_onoff"
    MIC_ON_NOISE = "mic_on_noise"
    UTILITY_MEDIA_TRAVEL = "utility_media_travel"
    CUSTOM = "custom"


@dataclass(frozen=True, slots=True)
class PacketRecord:
    """One captured packet. IPs are opaque 32-bit tokens, not dotted quads."""

    timestamp: float  # seconds since trace start, microsecond precision
    length: int  # bytes on wire
    protocol: Protocol
    src_ip: int
    dst_ip: int
    src_port: int = 0  # 0 when the protocol has no ports
    dst_port: int = 0
    tcp_window: int = 0  # 0 for non-TCP

    def validate(self) -> None:
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if self.length < 0:
            raise ValueError(f"negative length {self.length}")
        if not 0 <= self.src_port <= 65535 or not 0 <= self.dst_port <= 65535:
            raise ValueError("port out of range")
        if not 0 <= self.tcp_window <= MAX_TCP_WINDOW:
            raise ValueError("tcp_window out of range")
        if self.protocol is not Protocol.TCP and self.tcp_window != 0:
            raise ValueError("tcp_window must be 0 for non-TCP packets")
        if self.protocol in (Protocol.ICMP, Protocol.OTHER) and (
            self.src_port != 0 or self.dst_port != 0
        ):
            raise ValueError(f"{self.protocol.value} packets carry no ports")


@dataclass
class Trace:
    """An ordered, labeled packet capture."""

    packets: list[PacketRecord]
    label: str
    scenario: Scenario = Scenario.CUSTOM
    trace_id: str = ""

    def validate(self) -> None:
        if not self.packets:
            raise ValueError("trace must contain at least one packet")
        prev = 0.0
        for pkt in self.packets:
            pkt.validate()
            if pkt.timestamp < prev:
                raise ValueError("packet timestamps must be non-decreasing")
            prev = pkt.timestamp


@dataclass(frozen=True)
class ClassProfile:
    """Generative parameters for one traffic class."""

    label: str
    rate: float  # packets per second
    protocol_mix: tuple[float, float, float]  # P(TCP), P(UDP), P(ICMP)
    length_mean: float
    length_std: float
    window_mean: float
    window_std: float
    ip_pool_size: int
    port_pool_size: int
    jitter_std: float = 0.0  # Gaussian jitter on inter-packet gaps, seconds

    def validate(self) -> None:
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if len(self.protocol_mix) != 3 or any(p < 0 for p in self.protocol_mix):
            raise ValueError("protocol_mix must be three non-negative probabilities")
        if abs(sum(self.protocol_mix) - 1.0) > 1e-9:
            raise ValueError("protocol_mix must sum to 1")
        if self.ip_pool_size < 1 or self.port_pool_size < 1:
            raise ValueError("pool sizes must be >= 1")
        if min(self.length_std, self.window_std, self.jitter_std) < 0:
            raise ValueError("standard deviations must be >= 0")


def _distinct_tokens(rng: np.random.Generator, count: int, high: int) -> np.ndarray:
    """Draw `count` distinct integers in [1, high). Deterministic per rng state."""
    tokens: dict[int, None] = {}
    while len(tokens) < count:
        for value in rng.integers(1, high, size=count - len(tokens)).tolist():
            tokens.setdefault(value, None)
    return np.array(list(tokens)[:count], dtype=np.int64)


def _draw_gaps(rng: np.random.Generator, profile: ClassProfile, duration: float) -> np.ndarray:
    """Arrival times in [0, duration): exponential gaps plus jitter, floored."""
    mean_gap = 1.0 / profile.rate
    chunk = max(int(duration * profile.rate * 1.2) + 16, 64)
    times: list[np.ndarray] = []
    total = 0.0
    while total < duration:
        gaps = rng.exponential(mean_gap, size=chunk)
        if profile.jitter_std > 0:
            gaps = gaps + rng.normal(0.0, profile.jitter_std, size=chunk)
        gaps = np.maximum(gaps, MIN_GAP_SECONDS)
        stamps = total + np.cumsum(gaps)
        times.append(stamps)
        total = stamps[-1]
    merged = np.concatenate(times)
    return merged[merged < duration]


def generate_trace(profile: ClassProfile, duration: float, seed: int) -> Trace:
    """Generate one synthetic trace. Fully determined by (profile, duration, seed)."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    profile.validate()

    rng = np.random.default_rng(seed)
    ip_pool = _distinct_tokens(rng, profile.ip_pool_size, 2**32)
    port_pool = _distinct_tokens(rng, profile.port_pool_size, 65536)

    times = np.round(_draw_gaps(rng, profile, duration), 6)
    n = times.size
    if n == 0:
        raise ValueError("profile rate too low for the requested duration: empty trace")

    proto_codes = rng.choice(3, size=n, p=np.asarray(profile.protocol_mix, dtype=float))
    lengths = np.clip(
        np.rint(rng.normal(profile.length_mean, profile.length_std, size=n)),
        MIN_PACKET_LEN,
        MAX_PACKET_LEN,
    ).astype(np.int64)
    windows = np.clip(
        np.rint(rng.normal(profile.window_mean, profile.window_std, size=n)),
        0,
        MAX_TCP_WINDOW,
    ).astype(np.int64)
    windows[proto_codes != 0] = 0

    src_ip = np.full(n, ip_pool[0], dtype=np.int64)  # the device itself
    dst_ip = ip_pool[rng.integers(0, profile.ip_pool_size, size=n)]
    src_port = port_pool[rng.integers(0, profile.port_pool_size, size=n)]
    dst_port = port_pool[rng.integers(0, profile.port_pool_size, size=n)]
    has_ports = proto_codes <= 1  # TCP or UDP
    src_port = np.where(has_ports, src_port, 0)
    dst_port = np.where(has_ports, dst_port, 0)

    proto_table = (Protocol.TCP, Protocol.UDP, Protocol.ICMP)
    packets = [
        PacketRecord(t, ln, proto_table[pc], si, di, sp, dp, wn)
        for t, ln, pc, si, di, sp, dp, wn in zip(
            times.tolist(),
            lengths.tolist(),
            proto_codes.tolist(),
            src_ip.tolist(),
            dst_ip.tolist(),
            src_port.tolist(),
            dst_port.tolist(),
            windows.tolist(),
        )
    ]
    return Trace(packets=packets, label=profile.label, trace_id=f"{profile.label}-0")


def generate_dataset(
    profiles: list[ClassProfile],
    traces_per_class: int,
    duration: float,
    seed: int,
    scenario: Scenario = Scenario.CUSTOM,
) -> list[Trace]:
    """Balanced labeled corpus; per-trace seeds derived from the master seed."""
    if len(profiles) < 2:
        raise ValueError("need at least 2 class profiles")
    if traces_per_class < 1:
        raise ValueError("traces_per_class must be >= 1")
    traces = []
    for profile in profiles:
        for k in range(traces_per_class):
            sub = derive_seed(seed, "trace", profile.label, k)
            trace = generate_trace(profile, duration, sub)
            trace.scenario = scenario
            trace.trace_id = f"{profile.label}-{k}"
            traces.append(trace)
    return traces


def builtin_profiles(scenario: Scenario) -> list[ClassProfile]:
    """Preset class profiles for the named capture scenarios.

    The presets are tuned so that classes are separated in several windowed
    features at once (rate, protocol mix, packet length, TCP window, pools).
    """
    if scenario is Scenario.MIC_ONOFF:
        return [
            ClassProfile(
                label="mic_off", rate=600.0, protocol_mix=(0.70, 0.25, 0.05),
                length_mean=220.0, length_std=80.0, window_mean=4000.0,
                window_std=1200.0, ip_pool_size=3, port_pool_size=6,
            ),
            ClassProfile(
                label="mic_on", rate=1100.0, protocol_mix=(0.85, 0.12, 0.03),
                length_mean=760.0, length_std=210.0, window_mean=14000.0,
                window_std=4200.0, ip_pool_size=8, port_pool_size=16,
            ),
        ]
    if scenario is Scenario.MIC_ON_NOISE:
        return [
            ClassProfile(
                label="mic_quiet", rate=800.0, protocol_mix=(0.80, 0.15, 0.05),
                length_mean=420.0, length_std=140.0, window_mean=8000.0,
                window_std=2500.0, ip_pool_size=5, port_pool_size=10,
            ),
            ClassProfile(
                label="mic_noise", rate=1250.0, protocol_mix=(0.88, 0.09, 0.03),
                length_mean=900.0, length_std=260.0, window_mean=18000.0,
                window_std=5200.0, ip_pool_size=10, port_pool_size=20,
            ),
        ]
    if scenario is Scenario.UTILITY_MEDIA_TRAVEL:
        return [
            ClassProfile(
                label="utility", rate=900.0, protocol_mix=(0.45, 0.35, 0.20),
                length_mean=300.0, length_std=100.0, window_mean=5000.0,
                window_std=1800.0, ip_pool_size=3, port_pool_size=6,
            ),
            ClassProfile(
                label="media", rate=1200.0, protocol_mix=(0.85, 0.10, 0.05),
                length_mean=1000.0, length_std=250.0, window_mean=20000.0,
                window_std=5000.0, ip_pool_size=12, port_pool_size=24,
            ),
            ClassProfile(
                label="travel", rate=750.0, protocol_mix=(0.60, 0.35, 0.05),
                length_mean=520.0, length_std=150.0, window_mean=10000.0,
                window_std=3000.0, ip_pool_size=6, port_pool_size=12,
            ),
        ]
    raise ValueError(f"no built-in profiles for scenario {scenario.value!r}")


def shift_trace(trace: Trace, offset: float) -> Trace:
    """Copy of `trace` with all timestamps shifted by `offset` seconds."""
    moved = [replace(p, timestamp=round(p.timestamp + offset, 6)) for p in trace.packets]
    return Trace(moved, trace.label, trace.scenario, trace.trace_id)


def concat_traces(traces: list[Trace], gap: float = MIN_GAP_SECONDS) -> Trace:
    """Splice traces end-to-end in time. Label/scenario taken from the first."""
    if not traces:
        raise ValueError("nothing to concatenate")
    packets: list[PacketRecord] = []
    offset = 0.0
    for trace in traces:
        packets.extend(shift_trace(trace, offset).packets)
        offset = packets[-1].timestamp + gap
    return Trace(packets, traces[0].label, traces[0].scenario, traces[0].trace_id)


# --- line-delimited trace serialization (test fixtures, CLI datasets) ------

_TRACE_FIELDS = "timestamp,length,protocol,src_ip,dst_ip,src_port,dst_port,tcp_window"


def save_trace(trace: Trace, path: str | Path) -> None:
    lines = [f"# label: {trace.label}", f"# scenario: {trace.scenario.value}"]
    if trace.trace_id:
        lines.append(f"# trace_id: {trace.trace_id}")
    lines.append(f"# fields: {_TRACE_FIELDS}")
    for p in trace.packets:
        lines.append(
            f"{p.timestamp!r},{p.length},{p.protocol.value},{p.src_ip},"
            f"{p.dst_ip},{p.src_port},{p.dst_port},{p.tcp_window}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trace(path: str | Path, label: str | None = None) -> Trace:
    meta = {"label": "", "scenario": Scenario.CUSTOM.value, "trace_id": ""}
    packets = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, _, value = body.partition(":")
            if key.strip() in meta:
                meta[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise ValueError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
        try:
            packets.append(
                PacketRecord(
                    timestamp=float(parts[0]),
                    length=int(parts[1]),
                    protocol=Protocol(parts[2]),
                    src_ip=int(parts[3]),
                    dst_ip=int(parts[4]),
                    src_port=int(parts[5]),
                    dst_port=int(parts[6]),
                    tcp_window=int(parts[7]),
                )
            )
        except (ValueError, KeyError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    trace = Trace(
        packets=packets,
        label=label if label is not None else meta["label"],
        scenario=Scenario(meta["scenario"]),
        trace_id=meta["trace_id"],
    )
    trace.validate()
    return trace


def save_dataset(traces: list[Trace], directory: str | Path) -> list[Path]:
    """One .trace file per trace, named after its trace_id."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, trace in enumerate(traces):
        name = trace.trace_id or f"trace-{k}"
        path = out / f"{name}.trace"
        save_trace(trace, path)
        paths.append(path)
    return paths


def load_dataset(directory: str | Path) -> list[Trace]:
    paths = sorted(Path(directory).glob("*.trace"))
    if not paths:
        raise ValueError(f"no .trace files in {directory}")
    return [load_trace(p) for p in paths]
