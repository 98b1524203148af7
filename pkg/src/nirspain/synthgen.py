"""Synthetic 24-channel HbO recordings following a thermal-stimulation session.

A session applies a pain-threshold (low) test and then a pain-tolerance
(high) test. Each test runs three consecutive trials of cold and of heat
stimulation in a randomized modality order, with a 60-s rest before the
first trial, 60-s rests between trials, and a 120-s rest separating the
two tests. Each trial becomes one labeled recording: a stimulus boxcar
convolved with a double-gamma haemodynamic response, plus pink noise,
Mayer/respiratory/cardiac sinusoids, and linear drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .dataio import N_CHANNELS, SAMPLE_RATE_HZ, PainClass, Recording

INITIAL_REST_S = 60.0
INTER_TRIAL_REST_S = 60.0
INTER_TEST_REST_S = 120.0

MAYER_HZ = 0.1
RESPIRATORY_HZ = 0.3
CARDIAC_HZ = 1.2

HRF_PEAK_S = 6.0
HRF_UNDERSHOOT_S = 16.0
HRF_RATIO = 1.0 / 6.0
HRF_DURATION_S = 32.0


@dataclass(frozen=True)
class StimulusEvent:
    onset: float  # seconds from session start
    duration: float
    stimulus: str  # 'cold' | 'heat'
    intensity: str  # 'low' | 'high'

    @property
    def end(self) -> float:
        return self.onset + self.duration

    @property
    def pain_class(self) -> PainClass:
        return PainClass.from_name(f"{self.intensity}_{self.stimulus}")


@dataclass
class ProtocolTimeline:
    events: list[StimulusEvent]
    total_duration: float

    def __post_init__(self):
        if not self.events:
            raise ValueError("timeline has no events")
        prev_end = 0.0
        for ev in self.events:
            if ev.onset < prev_end:
                raise ValueError("timeline events overlap or are out of order")
            prev_end = ev.end
        if self.events[0].onset < INITIAL_REST_S:
            raise ValueError(
                f"first event must start after a {INITIAL_REST_S:.0f}-s rest"
            )


def _default_amplitudes() -> dict:
    return {
        PainClass.LOW_COLD: 0.5,
        PainClass.LOW_HEAT: 0.5,
        PainClass.HIGH_COLD: 1.0,
        PainClass.HIGH_HEAT: 1.0,
    }


def _default_gains() -> np.ndarray:
    return np.ones(N_CHANNELS)


@dataclass
class SynthConfig:
    """Generator parameters. Defaults give a learnable, non-trivial benchmark.

    Trial length, stimulus timing, amplitudes, and noise levels are declared
    defaults, tuned so the four classes are separable at the default noise
    floor (high > low by amplitude; heat gets extra weight on the first 12
    channels so cold and heat are spatially distinct).
    """

    n_subjects: int = 18
    trials_per_class: int = 3
    trial_seconds: float = 300.0
    stim_onset_seconds: float = 30.0
    stim_seconds: float = 180.0
    response_amplitudes: dict = field(default_factory=_default_amplitudes)
    heat_channel_gain: float = 1.3
    pink_sd: float = 0.3
    mayer_amp: float = 0.1
    resp_amp: float = 0.05
    cardiac_amp: float = 0.02
    drift_slope: float = 0.001
    channel_gains: np.ndarray = field(default_factory=_default_gains)
    seed: int = 7

    def __post_init__(self):
        self.channel_gains = np.asarray(self.channel_gains, dtype=np.float64)
        if self.channel_gains.shape != (N_CHANNELS,):
            raise ValueError(f"channel_gains must have {N_CHANNELS} entries")
        amps = self.response_amplitudes
        for low, high in (
            (PainClass.LOW_COLD, PainClass.HIGH_COLD),
            (PainClass.LOW_HEAT, PainClass.HIGH_HEAT),
        ):
            if not amps[high] > amps[low]:
                raise ValueError("high-pain amplitude must exceed matching low-pain")
        for name in ("pink_sd", "mayer_amp", "resp_amp", "cardiac_amp", "drift_slope"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.trial_seconds * SAMPLE_RATE_HZ < 300:
            raise ValueError("trial must cover at least 300 samples")
        if self.stim_onset_seconds + self.stim_seconds > self.trial_seconds:
            raise ValueError("stimulus does not fit inside the trial")


def double_gamma_hrf(sample_rate: float = SAMPLE_RATE_HZ) -> np.ndarray:
    """Canonical double-gamma haemodynamic response kernel.

    Peak at 6 s, undershoot at 16 s, undershoot ratio 1/6. Normalized so a
    sustained stimulus plateaus at 1.0, i.e. the running integral has max 1.
    """
    t = np.arange(0.0, HRF_DURATION_S, 1.0 / sample_rate)
    peak = (t / HRF_PEAK_S) ** HRF_PEAK_S * np.exp(HRF_PEAK_S - t)
    under = (t / HRF_UNDERSHOOT_S) ** HRF_UNDERSHOOT_S * np.exp(HRF_UNDERSHOOT_S - t)
    h = peak - HRF_RATIO * under
    return h / np.cumsum(h).max()


def stimulus_response(n_samples, onset_s, duration_s, sample_rate=SAMPLE_RATE_HZ):
    """Unit boxcar convolved with the HRF kernel, peak value 1.0."""
    box = np.zeros(n_samples)
    i0 = int(round(onset_s * sample_rate))
    i1 = int(round((onset_s + duration_s) * sample_rate))
    box[i0:i1] = 1.0
    return np.convolve(box, double_gamma_hrf(sample_rate))[:n_samples]


def build_timeline(config: SynthConfig, rng: np.random.Generator) -> ProtocolTimeline:
    """One subject's session: low test then high test, modality order random.

    Within each test the randomly chosen first modality runs its three
    consecutive trials, then the other; consecutive trials are separated by
    60-s rests, the two tests by a 120-s rest, and the session opens with a
    60-s rest.
    """
    events = []
    clock = INITIAL_REST_S
    for test_i, intensity in enumerate(("low", "high")):
        if test_i > 0:
            clock += INTER_TEST_REST_S - INTER_TRIAL_REST_S  # replaces a trial rest
        first_cold = bool(rng.integers(0, 2))
        modalities = ("cold", "heat") if first_cold else ("heat", "cold")
        for stimulus in modalities:
            for _ in range(config.trials_per_class):
                events.append(
                    StimulusEvent(clock, config.stim_seconds, stimulus, intensity)
                )
                clock += config.stim_seconds + INTER_TRIAL_REST_S
    total = events[-1].end + INITIAL_REST_S
    return ProtocolTimeline(events, total)


def _pink_noise(rng, n, sd):
    """1/f-power noise via spectral shaping, rescaled to the target sd."""
    if sd == 0.0:
        return np.zeros(n)
    freqs = np.fft.rfftfreq(n)
    profile = np.zeros_like(freqs)
    profile[1:] = freqs[1:] ** -0.5
    spec = (rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size))
    spec *= profile
    x = np.fft.irfft(spec, n)
    x_sd = x.std()
    return x * (sd / x_sd) if x_sd > 0 else x


def _synth_trial(config: SynthConfig, rng, pain_class: PainClass) -> np.ndarray:
    n = int(round(config.trial_seconds * SAMPLE_RATE_HZ))
    t = np.arange(n) / SAMPLE_RATE_HZ
    resp = stimulus_response(n, config.stim_onset_seconds, config.stim_seconds)
    amp = config.response_amplitudes[pain_class]
    gains = config.channel_gains.copy()
    if pain_class in (PainClass.LOW_HEAT, PainClass.HIGH_HEAT):
        gains[: N_CHANNELS // 2] *= config.heat_channel_gain
    channels = np.empty((n, N_CHANNELS))
    for ch in range(N_CHANNELS):
        sig = amp * gains[ch] * resp
        sig = sig + _pink_noise(rng, n, config.pink_sd)
        for hz, a in (
            (MAYER_HZ, config.mayer_amp),
            (RESPIRATORY_HZ, config.resp_amp),
            (CARDIAC_HZ, config.cardiac_amp),
        ):
            phase = rng.uniform(0.0, 2.0 * np.pi)
            sig = sig + a * np.sin(2.0 * np.pi * hz * t + phase)
        slope = config.drift_slope * rng.uniform(-1.0, 1.0)
        sig = sig + slope * t
        channels[:, ch] = sig
    return channels


def generate_dataset(config: SynthConfig) -> list[Recording]:
    """All subjects' trials as independent recordings, labels from the timeline.

    Every trial draws from its own RNG stream keyed by (seed, subject, trial),
    so generation is a pure function of the config and is order-independent.
    Default config yields n_subjects * 4 * trials_per_class = 216 recordings.
    """
    recordings = []
    for subj in range(config.n_subjects):
        subject_id = f"s{subj + 1:02d}"
        timeline = build_timeline(
            config, np.random.default_rng([config.seed, subj, 0xA11CE])
        )
        for trial_i, event in enumerate(timeline.events):
            rng = np.random.default_rng([config.seed, subj, trial_i])
            channels = _synth_trial(config, rng, event.pain_class)
            recordings.append(
                Recording(subject_id, f"t{trial_i + 1:02d}", channels, event.pain_class)
            )
    return recordings
