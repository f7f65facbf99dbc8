import math

import pytest

import tiersim


def test_quiet_minute():
    spec = tiersim.TraceSpec()
    spec.duration_min = 1.0
    trace = tiersim.generate_trace(spec, 1)
    assert len(trace) == 745
    assert all(s.label == tiersim.Activity.REST for s in trace.samples)


def test_magnitude():
    assert tiersim.magnitude_sq(tiersim.AccelSample(0, 1.0, 2.0, 2.0)) == 9.0


def test_trace_text_round_trip():
    spec = tiersim.TraceSpec()
    spec.duration_min = 0.5
    spec.activity_fraction = 0.2
    spec.fall_count = 1
    trace = tiersim.generate_trace(spec, 4)
    back = tiersim.parse_trace(tiersim.format_trace(trace))
    assert back.samples == trace.samples


def test_tier3_on_reference_trace():
    trace = tiersim.generate_trace(tiersim.reference_profile(), 1)
    cfg = tiersim.NodeConfig()
    cfg.tier = tiersim.Tier.TIER3
    assert tiersim.run_node(trace, cfg).n_tx_alarm == 8


def test_calibration():
    p = tiersim.calibrate(tiersim.paper_targets())
    assert p.e_tx_mws == pytest.approx(1.97012401, rel=1e-8)
    assert p.p_base_mw == pytest.approx(18.34, rel=1e-10)
    log = tiersim.NodeLog()
    log.duration_ms, log.n_samples, log.n_tx_data = 300000, 3734, 3734
    assert tiersim.account(log, p).power_w == pytest.approx(0.1834, rel=1e-9)


def test_calibration_error():
    t = tiersim.paper_targets()
    t.p2_w = t.p1_w
    with pytest.raises(tiersim.CalibrationError):
        tiersim.calibrate(t)


def test_compare():
    r1, r2 = tiersim.EnergyReport(), tiersim.EnergyReport()
    r1.power_w, r2.power_w = 0.1834, 0.1601
    r1.duration_ms = r2.duration_ms = 60000
    r1.n_tx, r2.n_tx = 745, 37
    (pair,) = tiersim.compare({tiersim.Tier.TIER1: r1, tiersim.Tier.TIER2: r2})
    assert round(pair.power_reduction_pct, 2) == 12.70


def test_frames():
    frame = tiersim.encode_data_frame(1, 7, 1000, 0.0, 0.0, 1.0)
    assert len(frame) == 33
    assert tiersim.frame_to_record(frame) == (
        "node=0000000000000001 seq=7 t_ms=1000 kind=DATA x=0.000000 y=0.000000 z=1.000000"
    )
    assert tiersim.frame_to_record(tiersim.encode_frame(1, 7, 1000, 1)).endswith("kind=ALARM code=1")
    with pytest.raises(tiersim.FrameError):
        tiersim.frame_to_record(frame[:20])


def test_experiment_report():
    spec = tiersim.TraceSpec()
    spec.duration_min = 3.0
    spec.activity_fraction = 0.1
    spec.fall_count = 2
    a = tiersim.simulate(runs=2, seed=5, spec=spec)
    b = tiersim.simulate(runs=2, seed=5, spec=spec)
    assert a.report() == b.report()
    assert "power reduction T1→T2" in a.report()
    assert a.report("csv").count("tier,row,") == 3
    checks = a.verify()
    assert len(checks) == 9
    assert all(isinstance(c[3], bool) for c in checks)
    back = tiersim.result_from_json(a.to_json())
    assert back.report() == a.report()
    assert not math.isnan(checks[0][1])
