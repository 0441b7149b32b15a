"""Level and spectral analysis: SPL, A-weighting, 1/3-octave bands,
spectrograms and noise-reduction summaries."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ResolutionError
from .signals import SampleBuffer

P_REF = 20e-6

NOMINAL_THIRD_OCTAVE = (
    10, 12.5, 16, 20, 25, 31.5, 40, 50, 63, 80, 100, 125, 160, 200, 250, 315, 400, 500,
    630, 800, 1000, 1250, 1600, 2000, 2500, 3150, 4000, 5000, 6300, 8000, 10000, 12500,
    16000, 20000,
)
_FIRST_BAND_INDEX = -20  # 1000 * 10**(-20/10) = 10 Hz


def _ra(f):
    f2 = np.asarray(f, dtype=float) ** 2
    return (12194.0**2 * f2**2) / (
        (f2 + 20.6**2) * np.sqrt((f2 + 107.7**2) * (f2 + 737.9**2)) * (f2 + 12194.0**2)
    )


def a_weight_gain(freq):
    """A-weighting in dB (IEC 61672 analytic curve), exactly 0 dB at 1 kHz."""
    f = np.asarray(freq, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    g = 20 * np.log10(_ra(f) / _ra(1000.0))
    return float(g) if g.ndim == 0 else g


def _a_weight_linear(freqs):
    """Linear magnitude of the A curve, zero at DC."""
    out = np.zeros_like(freqs, dtype=float)
    pos = freqs > 0
    out[pos] = _ra(freqs[pos]) / _ra(1000.0)
    return out


def _check_weighting(weighting):
    if weighting not in ("flat", "A"):
        raise ValueError(f"weighting must be 'flat' or 'A', got {weighting!r}")


def power_spectrum(buffer: SampleBuffer, weighting="flat"):
    """One-sided periodogram whose bins sum to the mean square, averaged over channels."""
    _check_weighting(weighting)
    x = buffer.samples
    n = x.shape[1]
    X = np.fft.rfft(x, axis=1)
    freqs = np.fft.rfftfreq(n, 1 / buffer.sample_rate)
    p = np.abs(X) ** 2 / n**2
    p[:, 1:] *= 2
    if n % 2 == 0:
        p[:, -1] /= 2
    if weighting == "A":
        p = p * _a_weight_linear(freqs) ** 2
    return freqs, p.mean(axis=0)


def mean_square(buffer: SampleBuffer, weighting="flat") -> float:
    if len(buffer) == 0:
        raise ValueError("empty buffer")
    if weighting == "flat":
        return float(np.mean(buffer.samples**2))
    return float(np.sum(power_spectrum(buffer, weighting)[1]))


def spl_db(buffer: SampleBuffer, weighting="flat") -> float:
    """Whole-buffer SPL ``20 log10(rms / 20 uPa)``; channels are energy-averaged.

    An all-zero buffer yields ``-inf``.
    """
    _check_weighting(weighting)
    ms = mean_square(buffer, weighting)
    return -math.inf if ms == 0 else 10 * math.log10(ms / P_REF**2)


@dataclass
class BandSpectrum:
    centers: list
    spl: list
    weighting: str = "flat"
    exact_centers: list = field(default_factory=list)

    def power(self) -> np.ndarray:
        return P_REF**2 * 10 ** (np.asarray(self.spl) / 10)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["center_hz", f"spl_db_{self.weighting}"])
        for c, s in zip(self.centers, self.spl):
            w.writerow([c, _fmt(s)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=_json_default)


def third_octave_edges(sample_rate):
    """Exact base-10 centres and edges of the bands lying entirely below Nyquist."""
    bands = []
    for i, nominal in enumerate(NOMINAL_THIRD_OCTAVE):
        fc = 1000.0 * 10 ** ((i + _FIRST_BAND_INDEX) / 10)
        lo, hi = fc * 10 ** (-1 / 20), fc * 10 ** (1 / 20)
        if hi > sample_rate / 2:
            break
        bands.append((nominal, fc, lo, hi))
    return bands


def third_octave_bands(buffer: SampleBuffer, weighting="flat") -> BandSpectrum:
    """Band SPL from rectangular integration of the periodogram over exact band edges."""
    if buffer.duration < 1.0:
        raise ResolutionError(f"need at least 1 s of signal for band analysis, got {buffer.duration:.3f} s")
    freqs, p = power_spectrum(buffer, weighting)
    centers, spl, exact = [], [], []
    for nominal, fc, lo, hi in third_octave_edges(buffer.sample_rate):
        band = float(np.sum(p[(freqs >= lo) & (freqs < hi)]))
        centers.append(nominal)
        exact.append(fc)
        spl.append(-math.inf if band == 0 else 10 * math.log10(band / P_REF**2))
    return BandSpectrum(centers, spl, weighting, exact)


@dataclass
class Spectrogram:
    """``magnitude[i, j]`` is frame ``i`` (starting at ``times[i]`` s) and bin ``j`` (``freqs[j]`` Hz)."""

    times: np.ndarray
    freqs: np.ndarray
    magnitude: np.ndarray
    window_len: int
    hop: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_s"] + [repr(float(f)) for f in self.freqs])
        for t, row in zip(self.times, self.magnitude):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()


def spectrogram(buffer: SampleBuffer, window_len=1024, hop=256, channel=0) -> Spectrogram:
    """Hann-windowed short-time magnitude spectrum, frames without padding."""
    if not window_len >= hop >= 1:
        raise ValueError(f"need window_len >= hop >= 1, got {window_len}, {hop}")
    x = buffer.samples[channel]
    if window_len > x.size:
        raise ValueError(f"window of {window_len} samples is longer than the buffer ({x.size})")
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop]
    win = np.hanning(window_len + 1)[:-1]
    mag = np.abs(np.fft.rfft(frames * win, axis=1))
    times = np.arange(len(frames)) * hop / buffer.sample_rate
    freqs = np.fft.rfftfreq(window_len, 1 / buffer.sample_rate)
    return Spectrogram(times, freqs, mag, window_len, hop)


@dataclass
class NrRow:
    label: str
    spl_off: float
    spl_on: float
    nr: float
    provisional: bool = False
    band_nr: dict = field(default_factory=dict)


@dataclass
class NrReport:
    rows: list = field(default_factory=list)
    weighting: str = "flat"

    def add(self, row: NrRow) -> None:
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", f"anc_off_db_{self.weighting}", f"anc_on_db_{self.weighting}",
                    "noise_reduction_db", "provisional"])
        for r in self.rows:
            w.writerow([r.label, _fmt(r.spl_off), _fmt(r.spl_on), _fmt(r.nr), int(r.provisional)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"weighting": self.weighting, "rows": [asdict(r) for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_json_default)


def broadband_nr(e_off: SampleBuffer, e_on: SampleBuffer, weighting="flat", label="",
                 converged=True, bands=True) -> NrRow:
    """ANC-off/on levels and their difference; per-band NR when the buffers are >= 1 s."""
    off = spl_db(e_off, weighting)
    on = spl_db(e_on, weighting)
    nr = 0.0 if off == on else off - on
    band_nr = {}
    if bands and e_off.duration >= 1.0 and e_on.duration >= 1.0:
        b_off = third_octave_bands(e_off, weighting)
        b_on = third_octave_bands(e_on, weighting)
        for c, a, b in zip(b_off.centers, b_off.spl, b_on.spl):
            if math.isfinite(a) and math.isfinite(b):
                band_nr[str(c)] = a - b
    return NrRow(label, off, on, nr, not converged, band_nr)


def _fmt(v):
    return repr(float(v)) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o)!r}")
