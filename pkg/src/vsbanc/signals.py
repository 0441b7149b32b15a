"""Deterministic test signals: tones, band-limited white Gaussian noise and
WAV-backed recordings. Samples are sound pressure in pascals."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy import signal as sps

from .errors import FrequencyRangeError
from .wavio import read_wav, write_wav

__all__ = [
    "SampleBuffer",
    "SignalSpec",
    "gen_tone",
    "gen_multitone",
    "gen_bandlimited_wgn",
    "gen_chirp",
    "gen_white_noise",
    "read_wav",
    "write_wav",
]


@dataclass(frozen=True)
class SampleBuffer:
    """Uniformly sampled multichannel signal.

    ``samples`` has shape ``(channels, n)`` and is stored read-only.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"samples must be (channels, n), got shape {arr.shape}")
        sr = self.sample_rate
        if isinstance(sr, float) and sr.is_integer():
            sr = int(sr)
        if not isinstance(sr, (int, np.integer)) or sr <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(sr))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @property
    def mono(self) -> np.ndarray:
        """First channel as a 1-D array."""
        return self.samples[0]

    def slice(self, start: float = 0.0, stop: float | None = None) -> "SampleBuffer":
        """Sub-buffer between ``start`` and ``stop`` seconds."""
        i0 = int(round(start * self.sample_rate))
        i1 = len(self) if stop is None else int(round(stop * self.sample_rate))
        return SampleBuffer(self.samples[:, i0:i1], self.sample_rate)

    def scaled(self, factor: float) -> "SampleBuffer":
        return SampleBuffer(self.samples * factor, self.sample_rate)


def _check_freq(freq, sample_rate, name="freq"):
    if not 0 <= freq < sample_rate / 2:
        raise FrequencyRangeError(
            f"{name}={freq} Hz must lie in [0, Nyquist={sample_rate / 2}) Hz"
        )


def _n_samples(duration, sample_rate):
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    return int(round(duration * sample_rate))


def gen_tone(freq, amplitude=1.0, phase=0.0, duration=1.0, sample_rate=16000) -> SampleBuffer:
    """Sine tone ``amplitude * sin(2*pi*freq*n/sample_rate + phase)``."""
    _check_freq(freq, sample_rate)
    n = np.arange(_n_samples(duration, sample_rate))
    x = amplitude * np.sin(2 * np.pi * freq * n / sample_rate + phase)
    return SampleBuffer(x, sample_rate)


def gen_multitone(freqs, amplitudes, phases=None, duration=1.0, sample_rate=16000) -> SampleBuffer:
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    amplitudes = np.broadcast_to(np.asarray(amplitudes, dtype=float), freqs.shape)
    phases = np.zeros_like(freqs) if phases is None else np.broadcast_to(phases, freqs.shape)
    for f in freqs:
        _check_freq(f, sample_rate)
    n = np.arange(_n_samples(duration, sample_rate))
    x = np.zeros(n.size)
    for f, a, p in zip(freqs, amplitudes, phases):
        x += a * np.sin(2 * np.pi * f * n / sample_rate + p)
    return SampleBuffer(x, sample_rate)


def gen_chirp(f0, f1, amplitude=1.0, duration=1.0, sample_rate=16000) -> SampleBuffer:
    """Linear chirp from ``f0`` to ``f1`` Hz."""
    _check_freq(f0, sample_rate, "f0")
    _check_freq(f1, sample_rate, "f1")
    t = np.arange(_n_samples(duration, sample_rate)) / sample_rate
    return SampleBuffer(amplitude * sps.chirp(t, f0, duration, f1), sample_rate)


def gen_white_noise(rms=1.0, duration=1.0, sample_rate=16000, seed=0) -> SampleBuffer:
    """Full-band white Gaussian noise with standard deviation ``rms``."""
    rng = np.random.default_rng(seed)
    return SampleBuffer(rms * rng.standard_normal(_n_samples(duration, sample_rate)), sample_rate)


def gen_bandlimited_wgn(low, high, rms=1.0, duration=1.0, sample_rate=16000, seed=0) -> SampleBuffer:
    """White Gaussian noise band-limited to ``[low, high]`` Hz, scaled to ``rms``.

    Band-limiting zeroes every DFT bin of the whole buffer outside the band, so
    the output is exactly band-limited as a periodic signal: no power leaks
    outside the band and the buffer loops without a discontinuity.
    """
    if not 0 < low < high < sample_rate / 2:
        raise FrequencyRangeError(
            f"band edges must satisfy 0 < low < high < {sample_rate / 2}, got ({low}, {high})"
        )
    n = _n_samples(duration, sample_rate)
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1 / sample_rate)
    spec[(freqs < low) | (freqs > high)] = 0
    y = np.fft.irfft(spec, n)
    power = np.mean(y**2)
    if power == 0:
        raise FrequencyRangeError(f"band ({low}, {high}) Hz holds no frequency bin at {duration} s")
    y *= rms / np.sqrt(power)
    return SampleBuffer(y, sample_rate)


@dataclass(frozen=True)
class SignalSpec:
    """Declarative stimulus description, as used by scenario files.

    ``params`` carries the per-kind fields: ``frequency``/``amplitude``/``phase``
    for tones, ``frequencies``/``amplitudes`` for multitones, ``low``/``high``/
    ``rms``/``seed`` for band-limited noise and ``path`` for WAV files.
    """

    kind: str
    params: Mapping[str, Any]
    duration: float
    sample_rate: int = 16000

    KINDS = ("tone", "multitone", "bandlimited_wgn", "wav_file")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {self.KINDS}")
        p = self.params
        if self.kind == "tone":
            _check_freq(p["frequency"], self.sample_rate, "frequency")
        elif self.kind == "multitone":
            for f in p["frequencies"]:
                _check_freq(f, self.sample_rate, "frequencies")
        elif self.kind == "bandlimited_wgn":
            if not 0 < p["low"] < p["high"] < self.sample_rate / 2:
                raise FrequencyRangeError(
                    f"band edges must satisfy 0 < low < high < {self.sample_rate / 2}"
                )

    def generate(self, base_dir: str | Path | None = None) -> SampleBuffer:
        p = self.params
        if self.kind == "tone":
            return gen_tone(p["frequency"], p.get("amplitude", 1.0), p.get("phase", 0.0),
                            self.duration, self.sample_rate)
        if self.kind == "multitone":
            return gen_multitone(p["frequencies"], p.get("amplitudes", 1.0), p.get("phases"),
                                 self.duration, self.sample_rate)
        if self.kind == "bandlimited_wgn":
            return gen_bandlimited_wgn(p["low"], p["high"], p.get("rms", 1.0), self.duration,
                                       self.sample_rate, p.get("seed", 0))
        path = Path(p["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        buf = read_wav(path, full_scale=p.get("full_scale", 1.0))
        if buf.sample_rate != self.sample_rate:
            raise ValueError(
                f"{path}: sample rate {buf.sample_rate} Hz does not match {self.sample_rate} Hz "
                "(resampling is not supported)"
            )
        x = buf.samples[p.get("channel", 0)]
        n = min(x.size, _n_samples(self.duration, self.sample_rate))
        return SampleBuffer(x[:n] * p.get("gain", 1.0), self.sample_rate)
