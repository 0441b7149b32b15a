"""FIR path synthesis and the PathSet container used by the time-domain loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ..errors import GeometryError
from .geometry import Medium

INTERP_HALF_WIDTH = 8  # 16-point fractional-delay interpolator


def fir_from_frequency_response(H, taps, sample_rate=None):
    """Real FIR whose response approximates ``H * exp(-j*omega*(taps//2)/fs)``.

    ``H`` is sampled on a uniform grid from 0 to Nyquist inclusive. The
    response is extended conjugate-symmetrically, inverse transformed, shifted
    by ``taps // 2`` and truncated with a periodic Hann window.
    """
    H = np.asarray(H, dtype=complex)
    if not np.all(np.isfinite(H)):
        raise ValueError("frequency response contains non-finite entries")
    nfft = 2 * (H.size - 1)
    if taps > nfft:
        raise ValueError(f"taps={taps} exceeds 2*(grid size - 1)={nfft}")
    h = np.fft.irfft(H, nfft)
    h = np.roll(h, taps // 2)[:taps]
    return h * sps.get_window("hann", taps, fftbins=True)


def fractional_delay_fir(delay, taps, scale=1.0):
    """Hann-windowed sinc interpolator placing ``scale`` at fractional index ``delay``.

    Interpolator taps that would fall before index 0 are dropped.
    """
    if delay + INTERP_HALF_WIDTH >= taps:
        raise GeometryError(
            f"delay of {delay:.2f} samples plus interpolator half-width {INTERP_HALF_WIDTH} "
            f"exceeds the {taps}-tap budget"
        )
    h = np.zeros(taps)
    lo = max(int(np.ceil(delay)) - INTERP_HALF_WIDTH, 0)
    hi = int(np.floor(delay)) + INTERP_HALF_WIDTH
    n = np.arange(lo, hi + 1)
    t = n - delay
    w = 0.5 * (1 + np.cos(np.pi * t / INTERP_HALF_WIDTH))
    h[n] = scale * np.sinc(t) * w
    return h


def fir_point_to_point(distance, gain, taps, sample_rate, medium: Medium = Medium()):
    """Free-field path: delay ``distance/c0`` with amplitude ``gain / (4*pi*distance)``."""
    if not distance > 0:
        raise GeometryError(f"distance must be positive, got {distance}")
    delay = distance * sample_rate / medium.c0
    return fractional_delay_fir(delay, taps, gain / (4 * np.pi * distance))


@dataclass(frozen=True)
class PathSet:
    """Primary FIRs ``(M, taps)`` and secondary FIRs ``(K, M, taps)``."""

    primary_irs: np.ndarray
    secondary_irs: np.ndarray
    sample_rate: int

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.primary_irs, dtype=float))
        s = np.asarray(self.secondary_irs, dtype=float)
        if s.ndim != 3:
            raise ValueError(f"secondary_irs must be (K, M, taps), got shape {s.shape}")
        if s.shape[1] != p.shape[0] or s.shape[2] != p.shape[1]:
            raise ValueError(f"shape mismatch: primary {p.shape}, secondary {s.shape}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(s))):
            raise ValueError("impulse responses must be finite")
        p.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "primary_irs", p)
        object.__setattr__(self, "secondary_irs", s)

    @property
    def taps(self) -> int:
        return self.primary_irs.shape[1]

    @property
    def n_secondaries(self) -> int:
        return self.secondary_irs.shape[0]

    @property
    def n_errors(self) -> int:
        return self.primary_irs.shape[0]

    def primary_response(self, x) -> np.ndarray:
        """Disturbance at every error microphone, ``(M, N)``."""
        x = np.asarray(x, dtype=float)
        return np.stack([sps.lfilter(h, 1.0, x) for h in self.primary_irs])

    def secondary_response(self, k, y) -> np.ndarray:
        """Response at every error microphone to secondary ``k`` driven by ``y``."""
        y = np.asarray(y, dtype=float)
        return np.stack([sps.lfilter(h, 1.0, y) for h in self.secondary_irs[k]])

    __call__ = secondary_response
