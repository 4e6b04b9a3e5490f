import numpy as np
import pytest

from roi_adapt.traces import (DEFAULT_MAX_MBPS, DEFAULT_MIN_MBPS,
                              ThroughputTrace, TraceParseError, load_trace,
                              save_trace, synth_trace)


def test_load_three_line_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("0.0,2.5\n1.0,3.5\n2.0,1.9\n")
    trace = load_trace(path)
    assert len(trace) == 3
    assert trace.at(1) == 3.5
    assert trace.source == "measured"


def test_load_accepts_header_and_comments(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("# generated\nt_seconds,throughput_mbps\n0.0,2.0\n1.0,2.5\n")
    assert len(load_trace(path)) == 2


def test_load_rejects_duplicate_timestamp_with_line_number(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("0.0,2.5\n1.0,3.5\n1.0,1.9\n")
    with pytest.raises(TraceParseError, match=":3:"):
        load_trace(path)


def test_load_rejects_nonpositive_throughput(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("0.0,2.5\n1.0,0.0\n")
    with pytest.raises(TraceParseError, match=":2:"):
        load_trace(path)


def test_load_rejects_malformed_number(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("0.0,fast\n")
    with pytest.raises(TraceParseError, match=":1:"):
        load_trace(path)


def test_load_rejects_empty(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("# nothing here\n")
    with pytest.raises(TraceParseError, match="no samples"):
        load_trace(path)


def test_synth_sigma_zero_is_midpoint():
    trace = synth_trace(seed=0, n=16, min_mbps=2.0, max_mbps=6.0, step_sigma=0.0)
    assert np.all(trace.mbps == 4.0)


def test_synth_within_paper_bounds():
    trace = synth_trace(seed=3, n=512)
    assert trace.min_mbps >= DEFAULT_MIN_MBPS
    assert trace.max_mbps <= DEFAULT_MAX_MBPS


def test_synth_deterministic_per_seed():
    a = synth_trace(seed=42, n=64)
    b = synth_trace(seed=42, n=64)
    assert np.array_equal(a.mbps, b.mbps)
    c = synth_trace(seed=43, n=64)
    assert not np.array_equal(a.mbps, c.mbps)


def test_synth_roundtrips_through_csv(tmp_path):
    trace = synth_trace(seed=5, n=100, step_sigma=0.7)
    path = tmp_path / "synth.csv"
    save_trace(trace, path)
    back = load_trace(path)
    assert np.array_equal(back.times, trace.times)
    assert np.array_equal(back.mbps, trace.mbps)


def test_at_wraps_cyclically():
    trace = synth_trace(seed=6, n=10)
    assert trace.at(0) == trace.mbps[0]
    assert trace.at(9) == trace.mbps[9]
    assert trace.at(10) == trace.mbps[0]
    assert trace.at(25) == trace.mbps[5]


def test_invariants_enforced():
    with pytest.raises(ValueError):
        ThroughputTrace(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        ThroughputTrace(np.array([0.0, 1.0]), np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        ThroughputTrace(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        synth_trace(seed=0, n=0)
    with pytest.raises(ValueError):
        synth_trace(seed=0, n=5, min_mbps=-1.0)
