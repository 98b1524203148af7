import numpy as np
import pytest

from nirspain.dataio import PainClass, save_dataset
from nirspain.synthgen import (
    INITIAL_REST_S,
    INTER_TEST_REST_S,
    INTER_TRIAL_REST_S,
    ProtocolTimeline,
    StimulusEvent,
    SynthConfig,
    build_timeline,
    double_gamma_hrf,
    generate_dataset,
    stimulus_response,
)


def small_config(**kw):
    defaults = dict(n_subjects=2, trial_seconds=60.0, stim_onset_seconds=5.0,
                    stim_seconds=30.0, seed=11)
    defaults.update(kw)
    return SynthConfig(**defaults)


class TestTimeline:
    def test_first_onset_is_initial_rest(self):
        tl = build_timeline(SynthConfig(), np.random.default_rng(0))
        assert tl.events[0].onset == INITIAL_REST_S

    def test_inter_trial_rests_are_60s(self):
        tl = build_timeline(SynthConfig(), np.random.default_rng(0))
        low = [e for e in tl.events if e.intensity == "low"]
        for a, b in zip(low, low[1:]):
            assert b.onset - a.end == INTER_TRIAL_REST_S

    def test_inter_test_rest_is_120s(self):
        tl = build_timeline(SynthConfig(), np.random.default_rng(0))
        low_end = max(e.end for e in tl.events if e.intensity == "low")
        high_start = min(e.onset for e in tl.events if e.intensity == "high")
        assert high_start - low_end == INTER_TEST_REST_S

    def test_three_consecutive_trials_per_modality(self):
        tl = build_timeline(SynthConfig(), np.random.default_rng(3))
        for intensity in ("low", "high"):
            stims = [e.stimulus for e in tl.events if e.intensity == intensity]
            assert len(stims) == 6
            assert stims[:3] == [stims[0]] * 3 and stims[3:] == [stims[3]] * 3
            assert stims[0] != stims[3]

    def test_deterministic_for_seed(self):
        a = build_timeline(SynthConfig(), np.random.default_rng(42))
        b = build_timeline(SynthConfig(), np.random.default_rng(42))
        assert a == b

    def test_timeline_validates_order_and_rest(self):
        ev = StimulusEvent(10.0, 5.0, "cold", "low")
        with pytest.raises(ValueError, match="60-s rest"):
            ProtocolTimeline([ev], 100.0)
        with pytest.raises(ValueError, match="overlap"):
            ProtocolTimeline(
                [StimulusEvent(60.0, 30.0, "cold", "low"),
                 StimulusEvent(70.0, 30.0, "heat", "low")],
                200.0,
            )


class TestConfigValidation:
    def test_high_must_exceed_low(self):
        amps = {PainClass.LOW_COLD: 1.0, PainClass.LOW_HEAT: 0.5,
                PainClass.HIGH_COLD: 1.0, PainClass.HIGH_HEAT: 1.0}
        with pytest.raises(ValueError, match="must exceed"):
            SynthConfig(response_amplitudes=amps)

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError, match="pink_sd"):
            SynthConfig(pink_sd=-0.1)

    def test_trial_must_cover_a_window(self):
        with pytest.raises(ValueError, match="300 samples"):
            SynthConfig(trial_seconds=20.0, stim_onset_seconds=1.0, stim_seconds=5.0)

    def test_gain_count(self):
        with pytest.raises(ValueError, match="24"):
            SynthConfig(channel_gains=np.ones(5))


class TestHrf:
    def test_sustained_response_plateaus_at_one(self):
        resp = stimulus_response(1200, onset_s=10.0, duration_s=80.0)
        assert abs(resp.max() - 1.0) < 1e-12

    def test_kernel_peak_near_6s(self):
        h = double_gamma_hrf()
        assert abs(np.argmax(h) / 10.0 - 6.0) < 0.5

    def test_undershoot_exists(self):
        h = double_gamma_hrf()
        assert h.min() < 0


class TestGenerateDataset:
    def test_default_counts(self):
        recs = generate_dataset(small_config())
        # 2 subjects x 4 classes x 3 trials
        assert len(recs) == 24
        labels = [int(r.label) for r in recs]
        assert all(labels.count(c) == 6 for c in range(4))

    def test_zero_noise_peak_matches_amplitude(self):
        cfg = small_config(pink_sd=0.0, mayer_amp=0.0, resp_amp=0.0,
                           cardiac_amp=0.0, drift_slope=0.0)
        recs = generate_dataset(cfg)
        cold_low = next(r for r in recs if r.label == PainClass.LOW_COLD)
        # all channels identical for a cold class with unit gains
        for ch in range(1, 24):
            np.testing.assert_array_equal(cold_low.channels[:, ch], cold_low.channels[:, 0])
        peak = cold_low.channels[:, 0].max()
        amp = cfg.response_amplitudes[PainClass.LOW_COLD]
        assert abs(peak - amp) / amp < 0.01
        # independent convolution oracle at the configured onset
        oracle = amp * stimulus_response(
            cold_low.n_samples, cfg.stim_onset_seconds, cfg.stim_seconds
        )
        np.testing.assert_allclose(cold_low.channels[:, 0], oracle, atol=1e-12)

    def test_zero_noise_high_exceeds_low_during_stimulation(self):
        cfg = small_config(pink_sd=0.0, mayer_amp=0.0, resp_amp=0.0,
                           cardiac_amp=0.0, drift_slope=0.0)
        recs = generate_dataset(cfg)
        lo = next(r for r in recs if r.label == PainClass.LOW_COLD)
        hi = next(r for r in recs if r.label == PainClass.HIGH_COLD)
        i0 = int(cfg.stim_onset_seconds * 10)
        i1 = int((cfg.stim_onset_seconds + cfg.stim_seconds) * 10)
        for ch in range(24):
            assert hi.channels[i0:i1, ch].mean() > lo.channels[i0:i1, ch].mean()

    def test_heat_weights_first_half_of_channels(self):
        cfg = small_config(pink_sd=0.0, mayer_amp=0.0, resp_amp=0.0,
                           cardiac_amp=0.0, drift_slope=0.0)
        recs = generate_dataset(cfg)
        heat = next(r for r in recs if r.label == PainClass.LOW_HEAT)
        assert heat.channels[:, 0].max() > heat.channels[:, 23].max()

    def test_generation_is_pure(self):
        a = generate_dataset(small_config())
        b = generate_dataset(small_config())
        for ra, rb in zip(a, b):
            np.testing.assert_array_equal(ra.channels, rb.channels)

    def test_csv_output_byte_identical(self, tmp_path):
        cfg = small_config()
        save_dataset(generate_dataset(cfg), tmp_path / "a")
        save_dataset(generate_dataset(cfg), tmp_path / "b")
        for fa in sorted((tmp_path / "a").iterdir()):
            fb = tmp_path / "b" / fa.name
            assert fa.read_bytes() == fb.read_bytes()

    def test_default_config_row_counts(self):
        cfg = SynthConfig()
        assert cfg.n_subjects * len(PainClass) * cfg.trials_per_class == 216
