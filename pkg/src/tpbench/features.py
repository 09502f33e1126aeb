"""Windowing and the 12 per-window statistical traffic indicators.

Packets are grouped either into bursts of exactly N packets or into
half-open time spans of width dt. For each retained window the extractor
computes endpoint/port uniqueness counts, protocol counts, inter-packet-time
statistics, TCP window statistics and packet length statistics. All standard
deviations use the population convention (divide by count), so single-value
subsets are well defined and oracle tests can agree bit-for-bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from tpbench.traffic import Protocol, Trace

FEATURE_NAMES: tuple[str, ...] = (
    "n_ip_unique",
    "n_port_unique",
    "n_pack_tcp",
    "n_pack_udp",
    "n_pack_icmp",
    "max_diff_time",
    "mean_window",
    "std_window",
    "mean_ipt",
    "std_ipt",
    "mean_len_pack",
    "std_len_pack",
)

FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
N_FEATURES = len(FEATURE_NAMES)

# Features that are integer counts at extraction time (transforms may break
# integrality; the optional clamp floors these at zero).
COUNT_FEATURES: tuple[str, ...] = (
    "n_ip_unique",
    "n_port_unique",
    "n_pack_tcp",
    "n_pack_udp",
    "n_pack_icmp",
)


class EmptySeriesError(ValueError):
    """Raised when windowing a trace yields no usable window."""


@dataclass(frozen=True)
class WindowSpec:
    """Packet grouping rule: bursts of N packets or time spans of dt seconds."""

    mode: str  # "burst" | "timespan"
    burst_size: int = 0
    timespan: float = 0.0

    def __post_init__(self):
        if self.mode == "burst":
            if self.burst_size < 2:
                raise ValueError("burst size must be >= 2")
        elif self.mode == "timespan":
            if self.timespan <= 0:
                raise ValueError("timespan must be positive")
        else:
            raise ValueError(f"unknown window mode {self.mode!r}")

    @classmethod
    def burst(cls, n: int) -> "WindowSpec":
        return cls(mode="burst", burst_size=n)

    @classmethod
    def time_span(cls, dt: float) -> "WindowSpec":
        return cls(mode="timespan", timespan=dt)

    @property
    def size(self) -> float:
        return self.burst_size if self.mode == "burst" else self.timespan

    def key(self) -> str:
        if self.mode == "burst":
            return f"burst:{self.burst_size}"
        return f"timespan:{self.timespan!r}"


class FeatureVector(NamedTuple):
    n_ip_unique: float
    n_port_unique: float
    n_pack_tcp: float
    n_pack_udp: float
    n_pack_icmp: float
    max_diff_time: float
    mean_window: float
    std_window: float
    mean_ipt: float
    std_ipt: float
    mean_len_pack: float
    std_len_pack: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


@dataclass
class FeatureSeries:
    """Per-trace feature time series: one row per retained window."""

    values: np.ndarray  # shape (n_windows, 12), float64
    label: str
    window_spec: WindowSpec | None
    trace_id: str = ""
    dropped_windows: int = 0
    transform: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != N_FEATURES:
            raise ValueError(f"feature matrix must be (n, {N_FEATURES})")
        if self.values.shape[0] == 0:
            raise EmptySeriesError("feature series must be non-empty")

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, FEATURE_INDEX[name]]

    def with_values(self, values: np.ndarray, transform: str | None = None) -> "FeatureSeries":
        return replace(self, values=values, transform=transform or self.transform)


@dataclass
class _PacketColumns:
    """Column view of a trace for vectorized window statistics."""

    timestamps: np.ndarray
    lengths: np.ndarray
    protocols: np.ndarray  # codes: 0 TCP, 1 UDP, 2 ICMP, 3 OTHER
    src_ip: np.ndarray
    dst_ip: np.ndarray
    src_port: np.ndarray
    dst_port: np.ndarray
    tcp_window: np.ndarray


_PROTO_CODE = {Protocol.TCP: 0, Protocol.UDP: 1, Protocol.ICMP: 2, Protocol.OTHER: 3}


def _columns(trace: Trace) -> _PacketColumns:
    n = len(trace.packets)
    ts = np.empty(n, dtype=np.float64)
    ln = np.empty(n, dtype=np.float64)
    pc = np.empty(n, dtype=np.int8)
    si = np.empty(n, dtype=np.int64)
    di = np.empty(n, dtype=np.int64)
    sp = np.empty(n, dtype=np.int64)
    dp = np.empty(n, dtype=np.int64)
    tw = np.empty(n, dtype=np.float64)
    for i, p in enumerate(trace.packets):
        ts[i] = p.timestamp
        ln[i] = p.length
        pc[i] = _PROTO_CODE[p.protocol]
        si[i] = p.src_ip
        di[i] = p.dst_ip
        sp[i] = p.src_port
        dp[i] = p.dst_port
        tw[i] = p.tcp_window
    return _PacketColumns(ts, ln, pc, si, di, sp, dp, tw)


def window_packets(trace: Trace, spec: WindowSpec) -> list[tuple[int, int]]:
    """Half-open packet-index ranges for each non-empty window.

    Burst mode yields consecutive ranges of exactly N packets and discards the
    trailing partial group. Time-span mode cuts [k*dt, (k+1)*dt) intervals and
    discards empty ones (windows with a single packet are kept here; the
    extractor drops them with its dropped-window counter).
    """
    if not trace.packets:
        raise ValueError("cannot window an empty trace")
    n = len(trace.packets)
    if spec.mode == "burst":
        size = spec.burst_size
        return [(i * size, (i + 1) * size) for i in range(n // size)]
    times = np.array([p.timestamp for p in trace.packets], dtype=np.float64)
    n_intervals = int(times[-1] // spec.timespan) + 1
    bounds = np.arange(n_intervals + 1, dtype=np.float64) * spec.timespan
    cuts = np.searchsorted(times, bounds, side="left")
    return [(int(a), int(b)) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


def _features_from_columns(cols: _PacketColumns, start: int, stop: int) -> FeatureVector:
    ts = cols.timestamps[start:stop]
    proto = cols.protocols[start:stop]

    ips = np.union1d(cols.src_ip[start:stop], cols.dst_ip[start:stop])
    ported = proto <= 1  # TCP or UDP only; port 0 means "no port"
    sport = cols.src_port[start:stop][ported]
    dport = cols.dst_port[start:stop][ported]
    ports = np.union1d(sport, dport)
    n_ports = int(np.count_nonzero(ports))  # drop port 0 if present

    n_tcp = int(np.count_nonzero(proto == 0))
    n_udp = int(np.count_nonzero(proto == 1))
    n_icmp = int(np.count_nonzero(proto == 2))

    gaps = np.diff(ts)
    if gaps.size == 0:
        raise ValueError("window must contain at least 2 packets")

    tcp_windows = cols.tcp_window[start:stop][proto == 0]
    if tcp_windows.size:
        mean_window = float(np.mean(tcp_windows))
        std_window = float(np.std(tcp_windows))
    else:
        mean_window = std_window = 0.0

    lengths = cols.lengths[start:stop]
    return FeatureVector(
        n_ip_unique=float(ips.size),
        n_port_unique=float(n_ports),
        n_pack_tcp=float(n_tcp),
        n_pack_udp=float(n_udp),
        n_pack_icmp=float(n_icmp),
        max_diff_time=float(np.max(gaps)),
        mean_window=mean_window,
        std_window=std_window,
        mean_ipt=float(np.mean(gaps)),
        std_ipt=float(np.std(gaps)),
        mean_len_pack=float(np.mean(lengths)),
        std_len_pack=float(np.std(lengths)),
    )


def compute_features(trace: Trace, index_range: tuple[int, int]) -> FeatureVector:
    """The 12 indicators over packets[start:stop]. Needs >= 2 packets."""
    start, stop = index_range
    if stop - start < 2:
        raise ValueError("window must contain at least 2 packets")
    return _features_from_columns(_columns(trace), start, stop)


def extract_series(
    trace: Trace, spec: WindowSpec, trace_id: str | None = None
) -> FeatureSeries:
    """One FeatureVector per retained window, in window order.

    Windows with fewer than 2 packets are dropped and counted. Raises
    EmptySeriesError when no window survives.
    """
    ranges = window_packets(trace, spec)
    cols = _columns(trace)
    rows = []
    dropped = 0
    for start, stop in ranges:
        if stop - start < 2:
            dropped += 1
            continue
        rows.append(_features_from_columns(cols, start, stop))
    if not rows:
        raise EmptySeriesError(
            f"trace {trace.trace_id or trace.label!r}: no window with >= 2 packets "
            f"under {spec.key()}"
        )
    return FeatureSeries(
        values=np.array(rows, dtype=np.float64),
        label=trace.label,
        window_spec=spec,
        trace_id=trace_id if trace_id is not None else trace.trace_id,
        dropped_windows=dropped,
    )


# --- CSV interchange --------------------------------------------------------

_BASE_COLUMNS = list(FEATURE_NAMES) + ["label", "window_index", "trace_id"]


def save_features_csv(series_list: Iterable[FeatureSeries], path: str | Path) -> None:
    """Stacked per-window rows; a `transform` column is added when any series
    carries transform metadata."""
    series_list = list(series_list)
    if not series_list:
        raise ValueError("nothing to write")
    with_transform = any(s.transform is not None for s in series_list)
    columns = _BASE_COLUMNS + (["transform"] if with_transform else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for series in series_list:
            for k, row in enumerate(series.values):
                record = [repr(float(v)) for v in row]
                record += [series.label, str(k), series.trace_id]
                if with_transform:
                    record.append(series.transform or "none")
                writer.writerow(record)


def load_features_csv(path: str | Path) -> list[FeatureSeries]:
    """Read back one FeatureSeries per trace_id, in first-appearance order.

    The CSV does not carry the window spec, so loaded series have
    window_spec=None.
    """
    groups: dict[str, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(
            name not in reader.fieldnames for name in _BASE_COLUMNS
        ):
            raise ValueError(f"{path}: missing feature CSV columns")
        for lineno, row in enumerate(reader, 2):
            try:
                vec = [float(row[name]) for name in FEATURE_NAMES]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            group = groups.setdefault(
                row["trace_id"],
                {"label": row["label"], "rows": [], "transform": row.get("transform")},
            )
            if group["label"] != row["label"]:
                raise ValueError(
                    f"{path}:{lineno}: trace {row['trace_id']!r} has conflicting labels"
                )
            group["rows"].append(vec)
    if not groups:
        raise ValueError(f"{path}: no feature rows")
    return [
        FeatureSeries(
            values=np.array(g["rows"], dtype=np.float64),
            label=g["label"],
            window_spec=None,
            trace_id=tid,
            transform=g["transform"] if g["transform"] not in (None, "none") else None,
        )
        for tid, g in groups.items()
    ]


def stack_series(series_list: list[FeatureSeries]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate series into one (X, labels) dataset, preserving order."""
    if not series_list:
        raise ValueError("no series to stack")
    X = np.concatenate([s.values for s in series_list], axis=0)
    y = np.concatenate([np.full(len(s), s.label, dtype=object) for s in series_list])
    return X, y
