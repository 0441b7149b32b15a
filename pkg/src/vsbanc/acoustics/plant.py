"""Time-domain plant construction from the geometric model.

Time-domain paths carry the baffled Green's function ``2*exp(-j*k*r)/(4*pi*r)``
per unit source signal; the common ``j*rho0*omega`` factor of the pressure
transfer functions is absorbed into the source signal. It scales primary and
secondary paths alike and so leaves the optimal controller unchanged.
"""

from __future__ import annotations

import numpy as np

from ..errors import GeometryError
from .fir import INTERP_HALF_WIDTH, PathSet, fir_from_frequency_response, fractional_delay_fir
from .geometry import Medium, SourceLayout
from .radiation import BAFFLE_FACTOR, equivalent_primary_strength

PLANT_MODES = ("analytic-freefield", "modal-synthesized")


def _distances(layout: SourceLayout, mics):
    mics = np.asarray(mics, dtype=float).reshape(-1, 3)
    if np.any(mics[:, 1] <= layout.opening.plane_y):
        raise GeometryError("error microphones must lie in front of the opening plane")
    r_p = np.linalg.norm(mics - np.asarray(layout.opening.center), axis=1)
    r_s = np.linalg.norm(mics[None, :, :] - layout.secondaries[:, None, :], axis=2)
    if np.any(r_s < 1e-6):
        raise GeometryError("an error microphone coincides with a secondary source")
    return r_p, r_s


def build_pathset(layout: SourceLayout, mics, taps=128, sample_rate=16000,
                  medium: Medium = Medium(), mode="analytic-freefield") -> PathSet:
    """Primary and secondary FIRs between the sources of ``layout`` and ``mics``."""
    if mode not in PLANT_MODES:
        raise ValueError(f"unknown plant mode {mode!r}; expected one of {PLANT_MODES}")
    r_p, r_s = _distances(layout, mics)
    if mode == "analytic-freefield":
        d_in = layout.opening.plane_y - layout.primary[1]
        prim = np.stack([
            fractional_delay_fir((d_in + r) * sample_rate / medium.c0, taps,
                                 BAFFLE_FACTOR / (4 * np.pi * r))
            for r in r_p
        ])
        sec = np.stack([
            [fractional_delay_fir(r * sample_rate / medium.c0, taps, BAFFLE_FACTOR / (4 * np.pi * r))
             for r in row]
            for row in r_s
        ])
        return PathSet(prim, sec, sample_rate)
    return _modal_pathset(layout, r_p, r_s, taps, sample_rate, medium)


def _modal_pathset(layout, r_p, r_s, taps, sample_rate, medium):
    nfft = max(1024, 4 * taps)
    freqs = np.fft.rfftfreq(nfft, 1 / sample_rate)
    k = medium.wavenumber(freqs)
    unit = layout.with_strengths(q_p=1.0)
    q_eq = np.array([equivalent_primary_strength(unit, f, medium) for f in freqs])
    d_in = layout.opening.plane_y - layout.primary[1]
    delays_p = (r_p + d_in) * sample_rate / medium.c0
    delays_s = r_s * sample_rate / medium.c0
    # a common bulk delay is removed; each path keeps its relative delay
    bulk = np.floor(min(delays_p.min(), delays_s.min()))
    spread = max(delays_p.max(), delays_s.max()) - bulk
    if spread + INTERP_HALF_WIDTH >= taps // 2:
        raise GeometryError(f"path delay spread of {spread:.1f} samples does not fit in {taps} taps")

    def synth(H, delay):
        # centre the window on the path's own arrival, then move it to its offset
        own = int(round(delay))
        h = fir_from_frequency_response(H * np.exp(2j * np.pi * freqs * own / sample_rate), taps)
        out = np.zeros(taps)
        off = own - int(bulk)
        out[off:] = h[:taps - off]
        return out

    def green(r):
        return BAFFLE_FACTOR * np.exp(-1j * k * r) / (4 * np.pi * r)

    prim = np.stack([synth(q_eq * green(r), d) for r, d in zip(r_p, delays_p)])
    sec = np.stack([[synth(green(r), d) for r, d in zip(row, drow)]
                    for row, drow in zip(r_s, delays_s)])
    return PathSet(prim, sec, sample_rate)


def fir_response(h, freq, sample_rate):
    """Complex response of FIR(s) ``h`` (last axis = taps) at ``freq``."""
    h = np.asarray(h)
    n = np.arange(h.shape[-1])
    return h @ np.exp(-2j * np.pi * freq * n / sample_rate)
