"""Tests for closed-form and Monte Carlo coherence decay under OU noise."""

import math

import numpy as np
import pytest

from spinbath.analysis import fit_stretched_exp
from spinbath.decoherence import (DecayCurve, OuNoiseModel, PulseSequence,
                                  chi, chi_short_time, filter_function,
                                  ou_monte_carlo, single_nv_signal)

FID = PulseSequence.RAMSEY
ECHO = PulseSequence.SPIN_ECHO


def test_sequence_aliases():
    assert PulseSequence.from_name("ramsey") is FID
    assert PulseSequence.from_name("FID") is FID
    assert PulseSequence.from_name("free-induction") is FID
    assert PulseSequence.from_name("echo") is ECHO
    assert PulseSequence.from_name("spin_echo") is ECHO
    assert PulseSequence.from_name("Hahn") is ECHO
    with pytest.raises(ValueError):
        PulseSequence.from_name("cpmg")


def test_noise_model_validation_and_times():
    m = OuNoiseModel(delta=1e5, tau_c=1e-3)
    assert m.t2_star == pytest.approx(math.sqrt(2.0) / 1e5, rel=1e-12)
    assert m.t2 == pytest.approx((12.0 * 1e-3 / 1e10) ** (1.0 / 3.0),
                                 rel=1e-12)
    with pytest.raises(ValueError):
        OuNoiseModel(delta=-1.0, tau_c=1.0)
    with pytest.raises(ValueError):
        OuNoiseModel(delta=1.0, tau_c=0.0)


def test_decay_curve_validation():
    t = np.linspace(0.0, 1.0, 5)
    DecayCurve(times=t, values=np.array([1.0, 0.9, 0.8, 0.7, 0.6]),
               sequence=FID)
    with pytest.raises(ValueError):
        DecayCurve(times=t[::-1], values=np.ones(5), sequence=FID)
    with pytest.raises(ValueError):
        DecayCurve(times=t, values=np.array([1.0, 0.9, 0.8, 0.7, 0.3]),
                   sequence=FID)  # probability below 1/2
    with pytest.raises(ValueError):
        DecayCurve(times=t, values=np.array([0.9, 0.8, 0.8, 0.7, 0.6]),
                   sequence=FID)  # t = 0 must map to 1
    with pytest.raises(ValueError):
        DecayCurve(times=t, values=np.ones(5), sequence=FID, kind="signal")
    # coherence curves may span [0, 1] and need not start at 1
    DecayCurve(times=t, values=np.array([0.8, 0.6, 0.4, 0.2, 0.1]),
               sequence=FID, kind="coherence")


def test_decay_curve_stderr_slack():
    t = np.linspace(0.0, 1.0, 3)
    # a Monte Carlo point may fluctuate slightly past 1 within 3 sigma
    DecayCurve(times=t, values=np.array([1.0, 1.002, 0.9]), sequence=FID,
               stderr=np.array([1e-4, 1e-3, 1e-3]))
    with pytest.raises(ValueError):
        DecayCurve(times=t, values=np.array([1.0, 1.02, 0.9]), sequence=FID,
                   stderr=np.array([1e-4, 1e-3, 1e-3]))


def test_as_coherence_view():
    t = np.linspace(0.0, 1.0, 4)
    p = np.array([1.0, 0.9, 0.75, 0.6])
    curve = DecayCurve(times=t, values=p, sequence=FID)
    assert np.allclose(curve.as_coherence(), 2.0 * p - 1.0)
    w = DecayCurve(times=t, values=2.0 * p - 1.0, sequence=FID,
                   kind="coherence")
    assert np.allclose(w.as_coherence(), 2.0 * p - 1.0)


def test_decay_curve_csv_roundtrip(tmp_path):
    model = OuNoiseModel(delta=2e5, tau_c=5e-5)
    curve = ou_monte_carlo(FID, np.linspace(0.0, 2e-5, 21), model,
                           n_traj=500, seed=1)
    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    assert (tmp_path / "curve.csv.json").exists()
    back = DecayCurve.from_csv(path)
    assert np.array_equal(back.times, curve.times)
    assert np.array_equal(back.values, curve.values)
    assert np.array_equal(back.stderr, curve.stderr)
    assert np.array_equal(back.reference, curve.reference)
    assert back.sequence is curve.sequence
    assert back.kind == curve.kind
    assert back.metadata["n_traj"] == 500
    header = path.read_text().splitlines()[0]
    assert header == "t_s,value,stderr,reference"


def test_filter_function_values():
    assert filter_function(FID, math.pi) == pytest.approx(2.0, rel=1e-12)
    assert filter_function(ECHO, 0.0) == 0.0
    assert filter_function(ECHO, 2.0 * math.pi) == pytest.approx(8.0,
                                                                 rel=1e-12)
    x = np.linspace(0.0, 10.0, 64)
    out = filter_function(FID, x)
    assert out.shape == x.shape
    assert np.all(out >= 0.0) and np.all(out <= 2.0)
    assert isinstance(filter_function(FID, 1.0), float)


def test_chi_closed_form_values():
    model = OuNoiseModel(delta=3.0, tau_c=2.0)
    scale = model.delta**2 * model.tau_c**2
    assert chi(FID, model.tau_c, model) == pytest.approx(scale * math.exp(-1),
                                                         rel=1e-12)
    bracket = 1.0 - 3.0 - math.exp(-1.0) + 4.0 * math.exp(-0.5)
    assert bracket == pytest.approx(0.0582431976790913, rel=1e-12)
    assert chi(ECHO, model.tau_c, model) == pytest.approx(scale * bracket,
                                                          rel=1e-12)
    # agrees with the rounded hand value at coarser precision
    assert chi(ECHO, model.tau_c, model) / scale == pytest.approx(0.058236,
                                                                  rel=2e-4)
    assert chi(FID, 0.0, model) == 0.0
    assert chi(ECHO, 0.0, model) == 0.0
    with pytest.raises(ValueError):
        chi(FID, -1.0, model)


def test_chi_series_crossover_continuity():
    model = OuNoiseModel(delta=1.0, tau_c=1.0)
    for seq in (FID, ECHO):
        below = chi(seq, 0.0099999, model)
        above = chi(seq, 0.0100001, model)
        assert above == pytest.approx(below, rel=1e-4)
    # deep in the series regime the exact form would cancel catastrophically;
    # the series stays monotone and positive
    tiny = np.geomspace(1e-12, 1e-3, 30)
    vals = chi(FID, tiny, model)
    assert np.all(np.diff(vals) > 0.0)
    assert np.allclose(vals, tiny**2 / 2.0, rtol=1e-5)


def test_chi_short_time_forms():
    model = OuNoiseModel(delta=math.sqrt(12.0), tau_c=1.0)
    assert chi_short_time(ECHO, 1.0, model) == pytest.approx(1.0, rel=1e-12)
    assert chi_short_time(FID, 2.0, model) == pytest.approx(0.5 * 12.0 * 4.0)
    assert chi_short_time(FID, 0.0, model) == 0.0

    # FID short-time error stays near 1% out to t = 0.03 tau_c; the exact
    # endpoint ratio overshoots the round 1% figure by 2.4e-5
    m = OuNoiseModel(delta=1.0, tau_c=1.0)
    t = np.linspace(1e-4, 0.029, 50)
    rel = chi_short_time(FID, t, m) / chi(FID, t, m) - 1.0
    assert np.max(np.abs(rel)) < 0.01
    end = chi_short_time(FID, 0.03, m) / chi(FID, 0.03, m) - 1.0
    assert end == pytest.approx(0.010024, abs=2e-5)


def test_chi_invariants():
    model = OuNoiseModel(delta=2.0, tau_c=0.7)
    t = np.linspace(0.0, 5.0, 200)
    for seq in (FID, ECHO):
        vals = chi(seq, t, model)
        assert np.all(vals >= 0.0)
        assert np.all(np.diff(vals) >= 0.0)
    stronger = OuNoiseModel(delta=3.0, tau_c=0.7)
    assert np.all(chi(FID, t[1:], stronger) > chi(FID, t[1:], model))
    # refocusing never hurts
    assert np.all(chi(ECHO, t, model) <= chi(FID, t, model) + 1e-15)


def test_single_nv_signal_characteristic_times():
    model = OuNoiseModel(delta=1e5, tau_c=1.0)  # delta tau = 1e5, quasistatic
    fid = single_nv_signal(FID, np.array([0.0, model.t2_star]), model)
    assert fid.values[0] == 1.0
    assert fid.values[1] == pytest.approx(0.5 * (1.0 + math.exp(-1)),
                                          abs=1e-4)
    echo = single_nv_signal(ECHO, np.array([0.0, model.t2]), model)
    assert echo.values[1] == pytest.approx(0.5 * (1.0 + math.exp(-1)),
                                           abs=1e-3)
    # full dephasing floor
    late = single_nv_signal(FID, np.array([0.0, 50.0 * model.t2_star]), model)
    assert late.values[1] == pytest.approx(0.5, abs=1e-9)
    assert fid.kind == "probability"
    assert fid.metadata["delta_rad_s"] == model.delta


def test_single_nv_stretch_exponents():
    # quadratic FID decay within the quasi-static window
    model = OuNoiseModel(delta=20.0, tau_c=1.0)
    t = np.linspace(0.0, 0.1, 80)
    fit = fit_stretched_exp(single_nv_signal(FID, t, model))
    assert fit.p == pytest.approx(2.0, abs=0.05)
    # cubic echo decay
    model = OuNoiseModel(delta=155.0, tau_c=1.0)
    fit = fit_stretched_exp(single_nv_signal(ECHO, t, model))
    assert fit.p == pytest.approx(3.0, abs=0.1)


def test_monte_carlo_is_deterministic():
    model = OuNoiseModel(delta=2e5, tau_c=2e-5)
    t = np.linspace(0.0, 3e-5, 16)
    a = ou_monte_carlo(FID, t, model, n_traj=300, seed=7)
    b = ou_monte_carlo(FID, t, model, n_traj=300, seed=7)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.stderr, b.stderr)
    c = ou_monte_carlo(FID, t, model, n_traj=300, seed=8)
    assert not np.array_equal(a.values, c.values)


def test_monte_carlo_input_validation():
    model = OuNoiseModel(delta=1e5, tau_c=1e-5)
    with pytest.raises(ValueError):
        ou_monte_carlo(FID, np.linspace(0.0, 1e-5, 8), model, n_traj=50)
    with pytest.raises(ValueError):
        ou_monte_carlo(FID, np.array([0.0, 1e-6, 3e-6]), model, n_traj=200)
    with pytest.raises(ValueError):
        ou_monte_carlo(FID, np.array([0.5e-6, 1.5e-6, 2.5e-6]), model,
                       n_traj=200)


def test_monte_carlo_zero_noise():
    model = OuNoiseModel(delta=0.0, tau_c=1e-5)
    curve = ou_monte_carlo(FID, np.linspace(0.0, 1e-4, 11), model, n_traj=200,
                           seed=0)
    assert np.all(curve.values == 1.0)


def test_monte_carlo_matches_closed_form_fid():
    model = OuNoiseModel(delta=4e5, tau_c=2.5e-5)  # delta tau = 10
    t = np.linspace(0.0, 3.0 * model.t2_star, 40)
    curve = ou_monte_carlo(FID, t, model, n_traj=10_000, seed=11)
    # pointwise three-sigma agreement and small overall rms
    assert np.all(np.abs(curve.values - curve.reference)
                  <= 3.0 * curve.stderr + 1e-12)
    rms = np.sqrt(np.mean((curve.values - curve.reference) ** 2))
    assert rms < 0.01


def test_monte_carlo_matches_closed_form_echo():
    model = OuNoiseModel(delta=4e5, tau_c=2.5e-5)
    t = np.linspace(0.0, 3.0 * model.t2, 40)
    curve = ou_monte_carlo(ECHO, t, model, n_traj=10_000, seed=12)
    assert np.all(np.abs(curve.values - curve.reference)
                  <= 3.0 * curve.stderr + 1e-12)
    rms = np.sqrt(np.mean((curve.values - curve.reference) ** 2))
    assert rms < 0.01


def test_monte_carlo_echo_refocuses_static_field():
    # correlation time far beyond the measurement window: the echo
    # cancels the (frozen) detuning almost perfectly
    t_max = 1e-3
    model = OuNoiseModel(delta=1e5, tau_c=1e6 * t_max)
    t = np.linspace(0.0, t_max, 26)
    curve = ou_monte_carlo(ECHO, t, model, n_traj=4000, seed=3)
    assert np.max(np.abs(curve.values - 1.0)) < 1e-3
    # while the free induction signal fully dephases over the same window
    fid = ou_monte_carlo(FID, t, model, n_traj=4000, seed=3)
    assert fid.values[-1] < 0.55
