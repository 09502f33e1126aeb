"""Shared test utilities: independent oracles and byte-level pcap builders.

The oracles here deliberately avoid the library's code paths: smoothing
weights come from exact rational arithmetic on the normal equations, feature
statistics from plain Python loops, and nearest-neighbor votes from an
exhaustive scan.
"""

from __future__ import annotations

import math
import struct
from fractions import Fraction

import numpy as np

from tpbench.seeding import derive_seed
from tpbench.traffic import ClassProfile, PacketRecord, Protocol, Trace, generate_trace


# --- exact Savitzky-Golay oracle -------------------------------------------

def exact_savgol_weights(window: int, degree: int) -> list[float]:
    """Central smoothing weights via exact rational normal equations."""
    m = (window - 1) // 2
    size = degree + 1
    ata = [
        [sum(Fraction(k) ** (i + j) for k in range(-m, m + 1)) for j in range(size)]
        for i in range(size)
    ]
    rhs = [Fraction(1 if i == 0 else 0) for i in range(size)]
    for col in range(size):
        pivot = max(range(col, size), key=lambda r: abs(ata[r][col]))
        ata[col], ata[pivot] = ata[pivot], ata[col]
        rhs[col], rhs[pivot] = rhs[pivot], rhs[col]
        for row in range(col + 1, size):
            factor = ata[row][col] / ata[col][col]
            for c in range(col, size):
                ata[row][c] -= factor * ata[col][c]
            rhs[row] -= factor * rhs[col]
    coeffs = [Fraction(0)] * size
    for row in range(size - 1, -1, -1):
        acc = rhs[row] - sum(ata[row][k] * coeffs[k] for k in range(row + 1, size))
        coeffs[row] = acc / ata[row][row]
    return [
        float(sum(coeffs[j] * Fraction(i) ** j for j in range(size)))
        for i in range(-m, m + 1)
    ]


# --- brute-force feature oracle ---------------------------------------------

def brute_force_features(packets: list[PacketRecord]) -> dict[str, float]:
    """The 12 indicators recomputed with plain loops and math functions."""
    ips = {p.src_ip for p in packets} | {p.dst_ip for p in packets}
    ports: set[int] = set()
    for p in packets:
        if p.protocol in (Protocol.TCP, Protocol.UDP):
            ports.add(p.src_port)
            ports.add(p.dst_port)
    ports.discard(0)

    gaps = [b.timestamp - a.timestamp for a, b in zip(packets, packets[1:])]
    tcp_windows = [p.tcp_window for p in packets if p.protocol is Protocol.TCP]
    lengths = [p.length for p in packets]

    def mean(values):
        return sum(values) / len(values)

    def population_std(values):
        mu = mean(values)
        return math.sqrt(sum((v - mu) ** 2 for v in values) / len(values))

    return {
        "n_ip_unique": float(len(ips)),
        "n_port_unique": float(len(ports)),
        "n_pack_tcp": float(sum(p.protocol is Protocol.TCP for p in packets)),
        "n_pack_udp": float(sum(p.protocol is Protocol.UDP for p in packets)),
        "n_pack_icmp": float(sum(p.protocol is Protocol.ICMP for p in packets)),
        "max_diff_time": max(gaps),
        "mean_window": mean(tcp_windows) if tcp_windows else 0.0,
        "std_window": population_std(tcp_windows) if tcp_windows else 0.0,
        "mean_ipt": mean(gaps),
        "std_ipt": population_std(gaps),
        "mean_len_pack": mean(lengths),
        "std_len_pack": population_std(lengths),
    }


def random_small_trace(
    rng: np.random.Generator, max_packets: int = 50, min_packets: int = 2
) -> Trace:
    """Random trace exercising all protocols, shared ports, zero-port cases."""
    n = int(rng.integers(min_packets, max_packets + 1))
    t = 0.0
    packets = []
    for _ in range(n):
        t = round(t + float(rng.uniform(1e-4, 0.8)), 6)
        proto = (Protocol.TCP, Protocol.UDP, Protocol.ICMP, Protocol.OTHER)[
            int(rng.integers(0, 4))
        ]
        ported = proto in (Protocol.TCP, Protocol.UDP)
        packets.append(
            PacketRecord(
                timestamp=t,
                length=int(rng.integers(40, 1515)),
                protocol=proto,
                src_ip=int(rng.integers(1, 8)),
                dst_ip=int(rng.integers(1, 8)),
                src_port=int(rng.integers(1, 2000)) if ported else 0,
                dst_port=int(rng.integers(1, 2000)) if ported else 0,
                tcp_window=int(rng.integers(0, 65536)) if proto is Protocol.TCP else 0,
            )
        )
    return Trace(packets=packets, label="rand")


# --- exhaustive kNN oracle ---------------------------------------------------

def knn_oracle(train_x, train_labels, classes, k, query) -> str:
    """Majority over the k nearest by an all-pairs scan; vote ties by smaller
    summed distance, then class order. Distance ties keep training-row order."""
    scored = []
    for i, row in enumerate(train_x):
        d2 = sum((a - b) ** 2 for a, b in zip(row, query))
        scored.append((d2, i))
    scored.sort(key=lambda pair: pair[0])  # stable: equal distances keep row order
    nearest = scored[:k]
    votes: dict[str, int] = {}
    sums: dict[str, float] = {}
    for d2, i in nearest:
        label = str(train_labels[i])
        votes[label] = votes.get(label, 0) + 1
        sums[label] = sums.get(label, 0.0) + math.sqrt(d2)
    top = max(votes.values())
    tied = [c for c in classes if votes.get(c, 0) == top]
    return min(tied, key=lambda c: (sums[c], classes.index(c)))


# --- alternating-burst traces -------------------------------------------------
#
# Traces whose class identity lives purely in high-frequency alternation.
# All classes share one base packet stream per trace index (common random
# numbers); each class then shifts its designated feature by +/-delta in
# alternating blocks of seg_packets packets. Burst windows of the same size
# see a per-window square wave in that feature, while every other column is
# bit-identical across classes, so no incidental low-frequency signal (trace-
# level sampling noise) can stand in for the class label.

def exact_count_trace(profile: ClassProfile, n_packets: int, seed: int) -> Trace:
    duration = (n_packets + 6.0 * math.sqrt(n_packets) + 10.0) / profile.rate
    trace = generate_trace(profile, duration, seed)
    while len(trace.packets) < n_packets:
        duration *= 1.5
        trace = generate_trace(profile, duration, seed)
    return Trace(trace.packets[:n_packets], profile.label, trace.scenario, trace.trace_id)


def apply_alternation(
    base: Trace, seg_packets: int, field: str | None, delta: float, label: str
) -> Trace:
    """Class variant of `base`: +/-delta on `field` in alternating blocks.

    field is "length", "window", or None (control class, unmodified stream).
    """
    from dataclasses import replace as dc_replace

    packets = []
    for i, p in enumerate(base.packets):
        sign = 1.0 if (i // seg_packets) % 2 == 0 else -1.0
        if field == "length":
            new_len = int(min(max(p.length + sign * delta, 40), 1514))
            packets.append(dc_replace(p, length=new_len))
        elif field == "window" and p.protocol is Protocol.TCP:
            new_win = int(min(max(p.tcp_window + sign * delta, 0), 65535))
            packets.append(dc_replace(p, tcp_window=new_win))
        else:
            packets.append(p)
    return Trace(packets, label=label, scenario=base.scenario, trace_id=f"{label}-{base.trace_id}")


def alternating_burst_dataset(
    base_profile: ClassProfile,
    class_fields: dict[str, tuple[str | None, float]],
    traces_per_class: int,
    n_segments: int,
    seg_packets: int,
    seed: int,
) -> list[Trace]:
    """One alternating-burst dataset: class -> (field, delta) spec."""
    traces = []
    for k in range(traces_per_class):
        base = exact_count_trace(
            base_profile, n_segments * seg_packets, derive_seed(seed, "base", k)
        )
        base.trace_id = f"base-{k}"
        for label, (field, delta) in class_fields.items():
            traces.append(apply_alternation(base, seg_packets, field, delta, label))
    return traces


# --- pcap fixture builders ---------------------------------------------------

MAGIC_MICROS = 0xA1B2C3D4
MAGIC_NANOS = 0xA1B23C4D


def ipv4_frame(
    protocol: Protocol,
    src_ip: int,
    dst_ip: int,
    src_port: int = 0,
    dst_port: int = 0,
    tcp_window: int = 0,
    payload: bytes = b"",
    vlan: bool = False,
) -> bytes:
    """Hand-built Ethernet/IPv4 frame with a minimal L4 header."""
    if protocol is Protocol.TCP:
        l4 = struct.pack(">HHIIBBHHH", src_port, dst_port, 0, 0, 5 << 4, 0,
                         tcp_window, 0, 0)
        proto_num = 6
    elif protocol is Protocol.UDP:
        l4 = struct.pack(">HHHH", src_port, dst_port, 8 + len(payload), 0)
        proto_num = 17
    elif protocol is Protocol.ICMP:
        l4 = struct.pack(">BBHI", 8, 0, 0, 0)
        proto_num = 1
    else:
        raise ValueError("use raw bytes for non-IP frames")
    total_len = 20 + len(l4) + len(payload)
    ip = struct.pack(
        ">BBHHHBBHII", 0x45, 0, total_len, 1, 0, 64, proto_num, 0, src_ip, dst_ip
    ) + l4 + payload
    ether = b"\x02" * 6 + b"\x04" * 6
    if vlan:
        return ether + struct.pack(">HH", 0x8100, 100) + struct.pack(">H", 0x0800) + ip
    return ether + struct.pack(">H", 0x0800) + ip


def raw_frame(ethertype: int, payload: bytes = b"\x00" * 20) -> bytes:
    return b"\x02" * 6 + b"\x04" * 6 + struct.pack(">H", ethertype) + payload


def build_pcap(
    records: list[tuple[float, bytes]],
    byte_order: str = "<",
    nanos: bool = False,
    snaplen: int = 65535,
    orig_lengths: list[int] | None = None,
) -> bytes:
    """Classic pcap bytes: (timestamp seconds, frame) records, Ethernet link."""
    magic = MAGIC_NANOS if nanos else MAGIC_MICROS
    unit = 1_000_000_000 if nanos else 1_000_000
    blob = struct.pack(byte_order + "IHHiIII", magic, 2, 4, 0, 0, snaplen, 1)
    for idx, (ts, frame) in enumerate(records):
        sec = int(ts)
        sub = int(round((ts - sec) * unit))
        orig = orig_lengths[idx] if orig_lengths else len(frame)
        blob += struct.pack(byte_order + "IIII", sec, sub, len(frame), orig)
        blob += frame
    return blob
