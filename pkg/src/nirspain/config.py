"""Flat ``key = value`` configuration files shared by the CLI commands.

Lines are ``key = value`` with ``#`` comments, UTF-8. Every key is validated
against the schema below; unknown keys are rejected. Defaults reproduce the
reference protocol (300 epochs, patience 50, batch 64, lr 0.001, 70/30 split,
10 folds, 300-sample windows with 50% overlap).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .dataio import N_CHANNELS
from .synthgen import SynthConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    """Bad config file: unknown key, bad type, or malformed line."""


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_gains(text):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) == 1:
        return np.full(N_CHANNELS, vals[0])
    if len(vals) == N_CHANNELS:
        return np.asarray(vals)
    raise ValueError(f"channel_gains needs 1 or {N_CHANNELS} values, got {len(vals)}")


# key -> (parser, default, description)
SCHEMA = {
    "seed": (int, 7, "RNG seed for generation, splitting, and training"),
    # synthetic dataset
    "n_subjects": (int, 18, "subjects in the synthetic cohort"),
    "trials_per_class": (int, 3, "trials per pain class per subject"),
    "trial_seconds": (float, 300.0, "length of each trial recording"),
    "stim_onset_seconds": (float, 30.0, "stimulus onset within a trial"),
    "stim_seconds": (float, 180.0, "stimulus duration within a trial"),
    "amp_low": (float, 0.5, "peak HbO response for low-pain classes"),
    "amp_high": (float, 1.0, "peak HbO response for high-pain classes"),
    "heat_channel_gain": (float, 1.3, "extra gain on channels 1-12 for heat"),
    "pink_sd": (float, 0.3, "1/f noise standard deviation"),
    "mayer_amp": (float, 0.1, "0.1 Hz Mayer-wave amplitude"),
    "resp_amp": (float, 0.05, "0.3 Hz respiratory amplitude"),
    "cardiac_amp": (float, 0.02, "1.2 Hz cardiac amplitude"),
    "drift_slope": (float, 0.001, "linear drift magnitude per second"),
    "channel_gains": (_parse_gains, np.ones(N_CHANNELS), "1 or 24 channel gains"),
    # windowing and splits
    "window": (int, 300, "samples per window"),
    "overlap": (float, 0.5, "fractional overlap between windows"),
    "train_fraction": (float, 0.7, "share of windows assigned to training"),
    "n_folds": (int, 10, "cross-validation folds over the train trials"),
    "standardize": (_parse_bool, False, "per-channel standardization (off = raw)"),
    # training
    "max_epochs": (int, 300, "epoch budget per fold"),
    "patience": (int, 50, "early-stopping patience in epochs"),
    "batch_size": (int, 64, "minibatch size"),
    "learning_rate": (float, 0.001, "Adam learning rate"),
    "beta1": (float, 0.9, "Adam first-moment decay"),
    "beta2": (float, 0.999, "Adam second-moment decay"),
}


@dataclass
class CliConfig:
    values: dict

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key) from None

    def synth_config(self) -> SynthConfig:
        v = self.values
        from .dataio import PainClass

        return SynthConfig(
            n_subjects=v["n_subjects"],
            trials_per_class=v["trials_per_class"],
            trial_seconds=v["trial_seconds"],
            stim_onset_seconds=v["stim_onset_seconds"],
            stim_seconds=v["stim_seconds"],
            response_amplitudes={
                PainClass.LOW_COLD: v["amp_low"],
                PainClass.LOW_HEAT: v["amp_low"],
                PainClass.HIGH_COLD: v["amp_high"],
                PainClass.HIGH_HEAT: v["amp_high"],
            },
            heat_channel_gain=v["heat_channel_gain"],
            pink_sd=v["pink_sd"],
            mayer_amp=v["mayer_amp"],
            resp_amp=v["resp_amp"],
            cardiac_amp=v["cardiac_amp"],
            drift_slope=v["drift_slope"],
            channel_gains=v["channel_gains"],
            seed=v["seed"],
        )

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(
            max_epochs=v["max_epochs"],
            patience=v["patience"],
            batch_size=v["batch_size"],
            n_folds=v["n_folds"],
            train_fraction=v["train_fraction"],
            learning_rate=v["learning_rate"],
            beta1=v["beta1"],
            beta2=v["beta2"],
            seed=v["seed"],
        )


def default_config() -> CliConfig:
    return CliConfig({k: spec[1] for k, spec in SCHEMA.items()})


def parse_config(path=None, overrides=None) -> CliConfig:
    """Read a config file (or just defaults) and apply explicit overrides."""
    values = {k: spec[1] for k, spec in SCHEMA.items()}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"missing config file: {path}")
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, text = line.partition("=")
            key = key.strip()
            if key not in SCHEMA:
                raise ConfigError(
                    f"{path}:{lineno}: unknown key {key!r} "
                    f"(valid keys: {', '.join(sorted(SCHEMA))})"
                )
            parser = SCHEMA[key][0]
            try:
                values[key] = parser(text.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    if overrides:
        values.update(overrides)
    return CliConfig(values)


def describe_keys() -> str:
    lines = ["config keys (key = value, '#' comments):"]
    for key, (_, default, help_text) in SCHEMA.items():
        if isinstance(default, np.ndarray):
            default = default[0] if np.all(default == default[0]) else "<24 values>"
        lines.append(f"  {key:<20} default {default!r:<12} {help_text}")
    return "\n".join(lines)
