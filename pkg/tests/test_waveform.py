import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from breathsim import waveform as wf
from breathsim.errors import InvalidSpec, SynthesisFailure
from breathsim.waveform import BreathingClass as BC

from oracles import count_local_maxima, naive_band_power_ratio, naive_dft

REGULAR = [c for c in BC if c is not BC.FAULTY]


def zero_jitter(cls, rate, depth, **kw):
    return wf.WaveformSpec(cls, rate, depth, period_jitter=0.0, amplitude_jitter=0.0, **kw)


def test_class_ids_follow_table_order():
    names = ["Eupnea", "Apnea", "Tachypnea", "Bradypnea", "Hyperpnea", "Hypopnea", "Kussmaul", "Faulty"]
    assert [c.label for c in BC] == names
    assert [int(c) for c in BC] == list(range(8))
    assert BC.parse("Kussmaul's") is BC.KUSSMAUL
    assert BC.parse("7") is BC.FAULTY


@pytest.mark.parametrize(
    "cls, expected",
    [
        (BC.EUPNEA, (12, 20, 0.30, 0.58)),
        (BC.APNEA, (0, 0, 0.0, 0.0)),
        (BC.TACHYPNEA, (21, 50, 0.30, 0.58)),
        (BC.BRADYPNEA, (1, 11, 0.30, 0.58)),
        (BC.HYPERPNEA, (12, 20, 0.59, 1.00)),
        (BC.HYPOPNEA, (12, 20, 0.01, 0.29)),
        (BC.KUSSMAUL, (21, 50, 0.59, 1.00)),
    ],
)
def test_class_ranges_match_table(cls, expected):
    assert tuple(wf.class_ranges(cls)) == pytest.approx(expected, abs=0)


def test_sample_spec_apnea_is_degenerate():
    spec = wf.sample_spec(BC.APNEA, 60, 20, rng_seed=123)
    assert spec.rate == 0 and spec.depth == 0


def test_sample_spec_eupnea_in_range_and_deterministic():
    a = wf.sample_spec(BC.EUPNEA, 60, 20, rng_seed=7)
    b = wf.sample_spec(BC.EUPNEA, 60, 20, rng_seed=7)
    assert 12 <= a.rate <= 20 and 0.30 <= a.depth <= 0.58
    assert a == b


@given(st.sampled_from(REGULAR), st.integers(0, 2**63 - 1))
def test_sampled_parameters_stay_in_class_ranges(cls, seed):
    spec = wf.sample_spec(cls, rng_seed=seed)
    r = wf.class_ranges(cls)
    assert r.rate_min <= spec.rate <= r.rate_max
    assert r.depth_min <= spec.depth <= r.depth_max
    spec.validate()


def test_apnea_trace_is_flat_zero():
    trace = wf.synth_chest_trace(wf.sample_spec(BC.APNEA, rng_seed=3))
    assert trace.samples.size == 1200
    assert np.all(trace.samples == 0)


def test_fifteen_bpm_has_four_second_period_and_depth_peak():
    trace = wf.synth_chest_trace(zero_jitter(BC.EUPNEA, 15, 0.4))
    x = trace.samples
    assert x.max() == pytest.approx(0.4, abs=1e-12)
    np.testing.assert_allclose(x[:-80], x[80:], atol=1e-9)


def test_fifteen_bpm_dominant_bin_from_naive_dft():
    trace = wf.synth_chest_trace(zero_jitter(BC.EUPNEA, 15, 0.4))
    x = trace.samples - trace.samples.mean()
    power = np.abs(naive_dft(x)[: x.size // 2 + 1]) ** 2
    resolution = 20 / x.size
    assert abs(np.argmax(power) * resolution - 0.25) <= resolution


@pytest.mark.parametrize("rate", [12, 15, 20, 24, 30, 40, 48])
def test_zero_jitter_periodicity(rate):
    # rates with an integer number of samples per cycle at 20 Hz
    trace = wf.synth_chest_trace(zero_jitter(BC.parse(0 if rate <= 20 else 2), rate, 0.5))
    step = round(60 / rate * 20)
    np.testing.assert_allclose(trace.samples[:-step], trace.samples[step:], atol=1e-9)


@pytest.mark.parametrize("rate", [1, 3, 7.5, 11, 12, 13.3, 17, 20, 21, 33.3, 50])
def test_zero_jitter_peak_count(rate):
    cls = BC.BRADYPNEA if rate < 12 else BC.EUPNEA if rate <= 20 else BC.TACHYPNEA
    trace = wf.synth_chest_trace(zero_jitter(cls, rate, 0.45))
    assert abs(count_local_maxima(trace.samples) - round(rate)) <= 1


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(REGULAR), st.integers(0, 2**32), st.floats(0, 0.49), st.floats(0, 0.49))
def test_trace_range_and_determinism(cls, seed, pj, aj):
    spec = wf.sample_spec(cls, rng_seed=seed, period_jitter=pj, amplitude_jitter=aj)
    a, b = wf.synth_chest_trace(spec), wf.synth_chest_trace(spec)
    assert np.array_equal(a.samples, b.samples)
    assert a.samples.size == 1200
    assert a.samples.min() >= 0
    assert a.samples.max() <= min(1.0, spec.depth * (1 + aj)) + 1e-12


def test_invalid_specs_rejected():
    with pytest.raises(InvalidSpec):
        wf.synth_chest_trace(wf.WaveformSpec(BC.FAULTY, 0, 0))
    with pytest.raises(InvalidSpec):
        wf.synth_chest_trace(wf.WaveformSpec(BC.EUPNEA, 30, 0.4))
    with pytest.raises(InvalidSpec):
        wf.synth_chest_trace(wf.WaveformSpec(BC.EUPNEA, 15, 0.4, period_jitter=0.5))
    with pytest.raises(InvalidSpec):
        wf.synth_chest_trace(wf.WaveformSpec(BC.EUPNEA, 15, 0.4, duration=0))


def test_full_saturation_is_constant_one():
    x = wf.saturation_trace(1200, 20.0, clip_level=1.0, offset=1.0, amplitude=2.0, frequency=0.02)
    assert np.all(x == 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_faulty_samples_clamped(seed):
    trace = wf.synth_faulty_trace(60, 20, seed)
    assert trace.label is BC.FAULTY
    assert trace.mode in wf.FAULTY_MODES
    assert 0.0 <= trace.samples.min() and trace.samples.max() <= 1.0


@pytest.mark.parametrize("mode", wf.FAULTY_MODES)
def test_faulty_modes_have_large_excursions_or_saturation(mode):
    for seed in range(10):
        x = wf.synth_faulty_trace(60, 20, seed, mode=mode).samples
        if mode == "drift":
            assert np.ptp(x) > 0.5
        elif mode == "steps":
            assert 3 <= np.count_nonzero(np.diff(x)) <= 8
        else:
            assert np.mean((x == 0) | (x == 1)) >= 0.5


def test_faulty_drift_has_weak_breathing_band():
    fs, band, pad = 20.0, (0.05, 1.0), 4096
    eupnea = wf.synth_chest_trace(zero_jitter(BC.EUPNEA, 15, 0.4)).samples
    reference = naive_band_power_ratio(eupnea - eupnea.mean(), fs, band, pad)
    drift = wf.synth_faulty_trace(60, fs, seed=3, mode="drift").samples
    from breathsim.dsp import detrend

    ratio = naive_band_power_ratio(detrend(drift, fs), fs, band, pad)
    assert ratio < 0.5 * reference


def test_faulty_gives_up_after_retries(monkeypatch):
    monkeypatch.setattr(wf, "FAULTY_MAX_BAND_RATIO", 0.0)
    with pytest.raises(SynthesisFailure):
        wf.synth_faulty_trace(60, 20, seed=1, mode="drift")


def test_synthesize_dispatch_and_faulty_metadata():
    t = wf.synthesize(BC.FAULTY, seed=5)
    assert t.true_rate is None and t.true_depth is None
    t = wf.synthesize(BC.KUSSMAUL, seed=5)
    assert 21 <= t.true_rate <= 50 and 0.59 <= t.true_depth <= 1.0
