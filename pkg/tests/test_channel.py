import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from breathsim import channel as ch
from breathsim import waveform as wf
from breathsim.errors import LengthMismatch
from breathsim.waveform import BreathingClass as BC

from oracles import raised_cosine_variance

QUIET = dict(noise_sigma=0.0, drift_amplitude=0.0, adc_bits=None)


def eupnea(rate=15.0, depth=0.4):
    return wf.synth_chest_trace(
        wf.WaveformSpec(BC.EUPNEA, rate, depth, period_jitter=0.0, amplitude_jitter=0.0)
    )


@pytest.mark.parametrize("distance, expected", [(0.5, 1.0), (1.0, 0.25), (1.5, 1 / 9)])
def test_path_gain_values(distance, expected):
    assert ch.path_gain(ch.ChannelConfig(distance=distance)) == pytest.approx(expected, abs=1e-12)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0, 6))
def test_path_gain_monotone(d1, d2, n):
    lo, hi = sorted((d1, d2))
    g = lambda d: ch.path_gain(ch.ChannelConfig(distance=d, path_loss_exponent=n))
    assert g(hi) <= g(lo) * (1 + 1e-12)


def test_config_validation():
    for bad in (dict(distance=0), dict(reference_distance=-1), dict(path_loss_exponent=-0.1),
                dict(noise_sigma=-1), dict(adc_bits=0), dict(adc_bits=25), dict(adc_bits=2.5)):
        with pytest.raises(ValueError):
            ch.ChannelConfig(**bad)


def test_noiseless_identity_channel():
    chest = eupnea()
    sensor = ch.transduce(chest, ch.ChannelConfig(**QUIET))
    np.testing.assert_allclose(sensor.samples, 0.5 + chest.samples, atol=1e-15)
    assert sensor.sample_rate == chest.sample_rate and sensor.label is BC.EUPNEA


def test_apnea_without_noise_is_dc():
    chest = wf.synthesize(BC.APNEA, seed=1)
    sensor = ch.record(chest, ch.ChannelConfig(noise_sigma=0, drift_amplitude=0))
    assert np.ptp(sensor.samples) == 0
    assert sensor.samples[0] == pytest.approx(0.5, abs=2 / 4095)


def test_linearity_without_noise():
    chest = eupnea()
    scaled = wf.ChestTrace(0.5 * chest.samples, 20.0, BC.EUPNEA, 15, 0.2)
    cfg = ch.ChannelConfig(distance=1.2, drift_amplitude=0.0, noise_sigma=0.0, adc_bits=None)
    a = ch.transduce(scaled, cfg).samples - cfg.dc_offset
    b = ch.transduce(chest, cfg).samples - cfg.dc_offset
    np.testing.assert_allclose(a, 0.5 * b, atol=1e-12)


def test_transduce_deterministic():
    chest = eupnea()
    cfg = ch.ChannelConfig(distance=1.0, seed=99)
    assert np.array_equal(ch.record(chest, cfg).samples, ch.record(chest, cfg).samples)
    assert not np.array_equal(ch.record(chest, cfg).samples, ch.record(chest, cfg.replace(seed=98)).samples)


def test_quantize_idempotent_and_two_level():
    rng = np.random.default_rng(0)
    trace = ch.SensorTrace(rng.uniform(-0.5, 2.5, 500), 20.0, BC.EUPNEA, 0.5, 0)
    cfg = ch.ChannelConfig()
    once = ch.quantize(trace, cfg)
    assert np.array_equal(ch.quantize(once, cfg).samples, once.samples)
    two = ch.quantize(trace, cfg.replace(adc_bits=1))
    assert set(np.unique(two.samples)) <= {0.0, 2.0}


def test_quantize_error_bound_on_dense_grid():
    grid = np.linspace(0, 2.0, 2_000_001)
    err = np.abs(ch.quantize_samples(grid, 12, 2.0) - grid)
    # levels include both rails, so the half-step is full_scale / (2 * (2**12 - 1))
    assert err.max() <= 2.0 / (2 * 4095) + 1e-15
    assert err.max() >= 0.999 * 2.0 / (2 * 4095)
    assert len(np.unique(ch.quantize_samples(grid, 12, 2.0))) == 4096


def test_snr_sentinels():
    chest = eupnea()
    cfg = ch.ChannelConfig(**QUIET)
    assert ch.measure_snr(chest, ch.transduce(chest, cfg), cfg) == math.inf
    apnea = wf.synthesize(BC.APNEA, seed=0)
    noisy = ch.ChannelConfig()
    assert ch.measure_snr(apnea, ch.record(apnea, noisy), noisy) == -math.inf


def test_snr_length_mismatch():
    chest = eupnea()
    sensor = ch.transduce(chest, ch.ChannelConfig())
    with pytest.raises(LengthMismatch):
        ch.measure_snr(chest, sensor.with_samples(sensor.samples[:-1]), ch.ChannelConfig())


def test_snr_matches_analytic_at_reference_distance():
    chest = eupnea(depth=0.4)
    cfg = ch.ChannelConfig(seed=4)
    measured = ch.measure_snr(chest, ch.record(chest, cfg), cfg)
    analytic = 10 * math.log10(raised_cosine_variance(0.4) / cfg.noise_sigma**2)
    assert abs(measured - analytic) <= 1.0


def test_snr_drop_from_half_to_one_and_half_metres():
    chest = eupnea()
    near = ch.ChannelConfig(distance=0.5, seed=11)
    far = near.replace(distance=1.5)
    drop = ch.measure_snr(chest, ch.record(chest, near), near) - ch.measure_snr(chest, ch.record(chest, far), far)
    assert abs(drop - 20 * math.log10(9)) <= 1.5
