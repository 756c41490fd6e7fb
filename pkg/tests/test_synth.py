from __future__ import annotations

import numpy as np
import pytest

from stackgen.synth import (
    LED_PATTERNS,
    Led24Params,
    WaveformParams,
    gen_led24,
    gen_waveform,
    led_pattern,
    waveform_base,
    waveform_values,
)

# chi-squared critical value, 9 degrees of freedom, alpha = 0.001
CHI2_CRIT_9DF = 27.877


class TestLed24:
    def test_schema_shape(self):
        data = gen_led24(Led24Params(n=5, seed=0))
        assert data.schema.n_attributes == 24
        assert data.n_classes == 10
        assert all(a.kind.is_binary for a in data.schema.attributes)

    def test_zero_noise_matches_canonical_patterns(self):
        data = gen_led24(Led24Params(n=300, noise=0.0, seed=1))
        for i in range(len(data)):
            assert np.array_equal(data.x[i, :7], led_pattern(int(data.y[i])))

    def test_digit_eight_lights_every_segment(self):
        assert np.array_equal(led_pattern(8), np.ones(7, dtype=np.int64))

    def test_noise_rate_matches_flip_probability(self):
        # 35000 segment bits flipped at 0.1: observed rate within the stated band
        data = gen_led24(Led24Params(n=5000, noise=0.1, seed=2))
        flips = data.x[:, :7] != LED_PATTERNS[data.y]
        assert abs(flips.mean() - 0.10) < 0.013

    def test_empty_dataset(self):
        data = gen_led24(Led24Params(n=0, seed=0))
        assert len(data) == 0
        assert data.schema.n_attributes == 24

    def test_determinism(self):
        a = gen_led24(Led24Params(n=100, seed=5))
        b = gen_led24(Led24Params(n=100, seed=5))
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_class_prior_uniform(self):
        data = gen_led24(Led24Params(n=10000, seed=3))
        counts = np.bincount(data.y, minlength=10)
        expected = len(data) / 10
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < CHI2_CRIT_9DF

    def test_noise_out_of_range(self):
        with pytest.raises(ValueError):
            Led24Params(n=1, noise=1.5)


class TestWaveform:
    def test_schema_shapes(self):
        assert gen_waveform(WaveformParams(n=3, variant=21, seed=0)).schema.n_attributes == 21
        assert gen_waveform(WaveformParams(n=3, variant=40, seed=0)).schema.n_attributes == 40
        assert gen_waveform(WaveformParams(n=3, seed=0)).n_classes == 3

    def test_base_waves_are_triangles(self):
        for which, center in enumerate((7, 11, 15)):
            wave = waveform_base(which)
            assert wave[center - 1] == 6.0
            assert wave.max() == 6.0
            assert wave.min() == 0.0

    def test_degenerate_mixture_equals_first_base_wave(self):
        # u = 1 and no noise collapses the mixture onto one base wave
        for cls, (a, _) in enumerate(((0, 1), (0, 2), (1, 2))):
            assert np.array_equal(waveform_values(cls, u=1.0, eps=0.0), waveform_base(a))

    def test_irrelevant_attributes_are_standard_normal(self):
        data = gen_waveform(WaveformParams(n=10000, variant=40, seed=4))
        means = data.x[:, 21:].mean(axis=0)
        assert np.all(np.abs(means) < 0.05)

    def test_class_counts_near_uniform(self):
        n = 9999
        data = gen_waveform(WaveformParams(n=n, seed=5))
        counts = np.bincount(data.y, minlength=3)
        sigma = np.sqrt(n * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts - n / 3) < 4 * sigma)

    def test_determinism(self):
        a = gen_waveform(WaveformParams(n=50, seed=6))
        b = gen_waveform(WaveformParams(n=50, seed=6))
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_variant_must_be_21_or_40(self):
        with pytest.raises(ValueError):
            WaveformParams(n=1, variant=30)
