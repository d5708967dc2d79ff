"""Synthetic band-identification task: desk-scale stand-in for corpus work.

Each example is band-limited noise (a dense sum of random-phase sinusoids
inside one class's frequency band) plus white noise at a configured SNR.
The classifier's job is to tell which band carried the energy, which is
exactly the regime where learned filter cutoffs should migrate toward the
class bands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class SyntheticTask:
    n_classes: int = 3
    bands: tuple[tuple[float, float], ...] = ((0.03, 0.08), (0.14, 0.19), (0.28, 0.33))
    snr_db: float = 20.0
    sample_rate: float = 16000.0
    chunk: int = 512

    def __post_init__(self):
        if len(self.bands) != self.n_classes:
            raise ParameterError(
                f"{self.n_classes} classes need {self.n_classes} bands, got {len(self.bands)}"
            )
        for lo, hi in self.bands:
            if not (0.0 < lo < hi < 0.5):
                raise ParameterError(f"band ({lo}, {hi}) outside (0, 0.5)")
        ordered = sorted(self.bands)
        for (_, hi), (lo2, _) in zip(ordered[:-1], ordered[1:]):
            if lo2 < hi:
                raise ParameterError(f"class bands overlap near {lo2}")

    def band_hz(self) -> list[tuple[float, float]]:
        return [(lo * self.sample_rate, hi * self.sample_rate) for lo, hi in self.bands]


@dataclass(frozen=True)
class LabeledWaveforms:
    x: np.ndarray  # [n, 1, chunk] float64
    y: np.ndarray  # [n] int64


@dataclass(frozen=True)
class SplitData:
    train: LabeledWaveforms
    valid: LabeledWaveforms
    test: LabeledWaveforms


def _band_noise(rng: np.random.Generator, band: tuple[float, float],
                chunk: int, snr_db: float) -> np.ndarray:
    lo, hi = band
    # enough random tones to cover every DFT bin of the band about twice over
    n_comp = max(16, int(round(2.0 * (hi - lo) * chunk)))
    freqs = rng.uniform(lo, hi, size=n_comp)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_comp)
    t = np.arange(chunk)
    sig = np.cos(2.0 * np.pi * freqs[:, None] * t + phases[:, None]).sum(axis=0)
    sig /= np.sqrt(np.mean(sig ** 2))
    noise = rng.normal(size=chunk) * 10.0 ** (-snr_db / 20.0)
    return sig + noise


def _make_split(rng: np.random.Generator, task: SyntheticTask, n: int) -> LabeledWaveforms:
    labels = np.arange(n, dtype=np.int64) % task.n_classes  # balanced within +-1
    x = np.empty((n, 1, task.chunk))
    for i, lab in enumerate(labels):
        x[i, 0] = _band_noise(rng, task.bands[lab], task.chunk, task.snr_db)
    order = rng.permutation(n)
    return LabeledWaveforms(x=x[order], y=labels[order])


def generate_synthetic(task: SyntheticTask, n_train: int, n_valid: int,
                       n_test: int, seed: int) -> SplitData:
    """Three disjoint labeled splits drawn from independent seed streams."""
    for name, n in (("n_train", n_train), ("n_valid", n_valid), ("n_test", n_test)):
        if n < 1:
            raise ParameterError(f"{name} must be >= 1, got {n}")
    streams = np.random.SeedSequence(seed).spawn(3)
    gens = [np.random.default_rng(s) for s in streams]
    return SplitData(
        train=_make_split(gens[0], task, n_train),
        valid=_make_split(gens[1], task, n_valid),
        test=_make_split(gens[2], task, n_test),
    )
