import numpy as np
import pytest

from tpbench.traffic import (
    ClassProfile,
    PacketRecord,
    Protocol,
    Scenario,
    Trace,
    builtin_profiles,
    concat_traces,
    generate_dataset,
    generate_trace,
    load_trace,
    save_trace,
)


def profile(**overrides) -> ClassProfile:
    base = dict(
        label="a",
        rate=100.0,
        protocol_mix=(0.6, 0.3, 0.1),
        length_mean=500.0,
        length_std=120.0,
        window_mean=8000.0,
        window_std=2000.0,
        ip_pool_size=5,
        port_pool_size=10,
    )
    base.update(overrides)
    return ClassProfile(**base)


def test_packet_count_near_rate():
    trace = generate_trace(profile(rate=100.0), duration=10.0, seed=1)
    assert 900 <= len(trace.packets) <= 1100


def test_rate_within_five_percent_over_long_duration():
    trace = generate_trace(profile(rate=200.0), duration=100.0, seed=3)
    rate = len(trace.packets) / 100.0
    assert abs(rate / 200.0 - 1.0) < 0.05


def test_determinism_byte_identical():
    a = generate_trace(profile(), 10.0, seed=7)
    b = generate_trace(profile(), 10.0, seed=7)
    assert a.packets == b.packets


def test_pure_tcp_mix():
    trace = generate_trace(profile(protocol_mix=(1.0, 0.0, 0.0)), 5.0, seed=2)
    assert all(p.protocol is Protocol.TCP for p in trace.packets)
    assert any(p.tcp_window > 0 for p in trace.packets)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        generate_trace(profile(), 0.0, seed=1)
    with pytest.raises(ValueError):
        generate_trace(profile(protocol_mix=(0.5, 0.2, 0.2)), 5.0, seed=1)
    with pytest.raises(ValueError):
        generate_trace(profile(rate=-1.0), 5.0, seed=1)
    with pytest.raises(ValueError):
        generate_trace(profile(ip_pool_size=0), 5.0, seed=1)


def test_dataset_cardinality_two_classes():
    profiles = [profile(label="a"), profile(label="b")]
    traces = generate_dataset(profiles, 3, 10.0, seed=1)
    assert len(traces) == 6
    assert sum(t.label == "a" for t in traces) == 3
    assert sum(t.label == "b" for t in traces) == 3


def test_dataset_cardinality_three_classes():
    profiles = [profile(label=c) for c in ("utility", "media", "travel")]
    traces = generate_dataset(profiles, 5, 5.0, seed=1)
    assert len(traces) == 15
    for c in ("utility", "media", "travel"):
        assert sum(t.label == c for t in traces) == 5


def test_dataset_rejects_single_profile():
    with pytest.raises(ValueError):
        generate_dataset([profile()], 3, 10.0, seed=1)


def test_master_seed_changes_contents_not_shape():
    profiles = [profile(label="a"), profile(label="b")]
    first = generate_dataset(profiles, 2, 10.0, seed=1)
    second = generate_dataset(profiles, 2, 10.0, seed=2)
    assert len(first) == len(second)
    assert [t.label for t in first] == [t.label for t in second]
    assert any(a.packets != b.packets for a, b in zip(first, second))


def test_generated_traces_satisfy_invariants_random_profiles():
    rng = np.random.default_rng(99)
    for _ in range(25):
        mix = rng.dirichlet([2.0, 1.0, 0.5])
        prof = profile(
            rate=float(rng.uniform(20, 500)),
            protocol_mix=(float(mix[0]), float(mix[1]), float(1 - mix[0] - mix[1])),
            length_mean=float(rng.uniform(60, 1400)),
            length_std=float(rng.uniform(0, 400)),
            window_mean=float(rng.uniform(0, 60000)),
            window_std=float(rng.uniform(0, 9000)),
            ip_pool_size=int(rng.integers(1, 20)),
            port_pool_size=int(rng.integers(1, 40)),
            jitter_std=float(rng.uniform(0, 0.001)),
        )
        trace = generate_trace(prof, 3.0, seed=int(rng.integers(0, 2**63)))
        trace.validate()
        distinct_ips = {p.src_ip for p in trace.packets} | {
            p.dst_ip for p in trace.packets
        }
        assert len(distinct_ips) <= prof.ip_pool_size


def test_builtin_profiles_shapes():
    assert len(builtin_profiles(Scenario.MIC_ONOFF)) == 2
    assert len(builtin_profiles(Scenario.MIC_ON_NOISE)) == 2
    assert len(builtin_profiles(Scenario.UTILITY_MEDIA_TRAVEL)) == 3
    with pytest.raises(ValueError):
        builtin_profiles(Scenario.CUSTOM)


def test_trace_text_round_trip(tmp_path):
    trace = generate_trace(profile(), 2.0, seed=5)
    trace.scenario = Scenario.MIC_ONOFF
    trace.trace_id = "a-0"
    path = tmp_path / "t.trace"
    save_trace(trace, path)
    back = load_trace(path)
    assert back.packets == trace.packets
    assert back.label == trace.label
    assert back.scenario == trace.scenario
    assert back.trace_id == trace.trace_id


def test_load_trace_reports_bad_line(tmp_path):
    path = tmp_path / "bad.trace"
    path.write_text("0.1,100,TCP,1,2,5,6\n")  # 7 fields
    with pytest.raises(ValueError, match="bad.trace:1"):
        load_trace(path)


def test_concat_traces_keeps_order_and_shifts_time():
    a = generate_trace(profile(), 1.0, seed=1)
    b = generate_trace(profile(), 1.0, seed=2)
    joined = concat_traces([a, b])
    joined.validate()
    assert len(joined.packets) == len(a.packets) + len(b.packets)
    assert joined.packets[len(a.packets)].timestamp > a.packets[-1].timestamp


def test_packet_record_invariants():
    with pytest.raises(ValueError):
        PacketRecord(0.0, 100, Protocol.UDP, 1, 2, 5, 6, tcp_window=9).validate()
    with pytest.raises(ValueError):
        PacketRecord(0.0, 100, Protocol.ICMP, 1, 2, src_port=5).validate()
    with pytest.raises(ValueError):
        Trace([], label="x").validate()
