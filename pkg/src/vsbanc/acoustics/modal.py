"""Rigid-wall modal expansion of the pressure field inside the open cavity.

Time convention is ``exp(+j*omega*t)``: a wave travelling towards +y carries
``exp(-j*k_y*y)``. Evanescent wavenumbers are therefore returned with a
negative imaginary part so that the +y component decays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GeometryError
from .geometry import CavitySpec, Medium, Opening


def eigenfunction(n, m, x, z, cavity: CavitySpec):
    """``cos(n*pi*x/l_x) * cos(m*pi*z/l_z)``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    tol = 1e-12
    if np.any(x < -tol) or np.any(x > cavity.l_x + tol) or np.any(z < -tol) or np.any(z > cavity.l_z + tol):
        raise GeometryError(f"(x, z) outside the cavity cross-section [0,{cavity.l_x}]x[0,{cavity.l_z}]")
    val = np.cos(n * np.pi * x / cavity.l_x) * np.cos(m * np.pi * z / cavity.l_z)
    return float(val) if val.ndim == 0 else val


def cutoff_wavenumber(n, m, cavity: CavitySpec):
    return np.hypot(np.asarray(n) * np.pi / cavity.l_x, np.asarray(m) * np.pi / cavity.l_z)


def wavenumber_y(n, m, k, cavity: CavitySpec):
    """Axial wavenumber ``sqrt(k**2 - (n*pi/l_x)**2 - (m*pi/l_z)**2)``.

    Propagating modes get the positive real root; evanescent modes the root
    with negative imaginary part. Complex ``k`` (lossy medium) is accepted.
    """
    kc = cutoff_wavenumber(n, m, cavity)
    ky = np.sqrt(np.asarray(k, dtype=complex) ** 2 - kc**2)
    ky = np.where(ky.imag > 0, -ky, ky)
    return complex(ky) if ky.ndim == 0 else ky


def _mode_grid(cavity: CavitySpec):
    n = np.arange(cavity.n_max + 1)[:, None]
    m = np.arange(cavity.m_max + 1)[None, :]
    return n, m


def _norm(n, m):
    """Mean square of the eigenfunction over the cross-section."""
    return np.where(n == 0, 1.0, 0.5) * np.where(m == 0, 1.0, 0.5)


@dataclass(frozen=True)
class ModalField:
    """Modal amplitudes ``p_plus[n, m]`` and ``p_minus[n, m]`` at wavenumber ``k``."""

    p_plus: np.ndarray
    p_minus: np.ndarray
    k: complex
    cavity: CavitySpec

    def __post_init__(self):
        shape = (self.cavity.n_max + 1, self.cavity.m_max + 1)
        pp = np.zeros(shape, dtype=complex)
        pm = np.zeros(shape, dtype=complex)
        a = np.asarray(self.p_plus, dtype=complex)
        b = np.asarray(self.p_minus, dtype=complex)
        if a.shape[0] > shape[0] or a.shape[1] > shape[1] or b.shape[0] > shape[0] or b.shape[1] > shape[1]:
            raise GeometryError(f"modal amplitudes exceed truncation orders {shape}")
        pp[:a.shape[0], :a.shape[1]] = a
        pm[:b.shape[0], :b.shape[1]] = b
        if not (np.all(np.isfinite(pp)) and np.all(np.isfinite(pm))):
            raise GeometryError("modal amplitudes must be finite")
        object.__setattr__(self, "p_plus", pp)
        object.__setattr__(self, "p_minus", pm)

    @property
    def k_y(self):
        n, m = _mode_grid(self.cavity)
        return wavenumber_y(n, m, self.k, self.cavity)


def cavity_pressure(field: ModalField, position, cavity: CavitySpec | None = None) -> complex:
    """Truncated modal sum of the +y and -y travelling components at ``position``."""
    cavity = field.cavity if cavity is None else cavity
    x, y, z = map(float, position)
    if not cavity.contains((x, y, z)):
        raise GeometryError(f"position {position} is outside the cavity")
    n, m = _mode_grid(cavity)
    ky = wavenumber_y(n, m, field.k, cavity)
    phi = eigenfunction(n, m, x, z, cavity)
    terms = (field.p_plus * np.exp(-1j * ky * y) + field.p_minus * np.exp(1j * ky * y)) * phi
    return complex(terms.sum())


def primary_modal_field(position, q_p, freq, cavity: CavitySpec, medium: Medium = Medium()) -> ModalField:
    """Field of a point source in the cavity, valid between the source and the opening.

    The source is a monopole of volume velocity ``q_p`` inside a semi-infinite
    rigid duct closed by the back wall ``y = 0``; the back-wall reflection is
    folded into the +y amplitudes. Reflection at the opening is neglected.
    """
    x0, y0, z0 = map(float, position)
    if not cavity.contains((x0, y0, z0)):
        raise GeometryError(f"primary position {position} is outside the cavity")
    n, m = _mode_grid(cavity)
    k = float(medium.wavenumber(freq))
    omega = 2 * np.pi * freq
    ky = wavenumber_y(n, m, k, cavity)
    phi0 = eigenfunction(n, m, x0, z0, cavity)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = medium.rho0 * omega * q_p * phi0 / (2 * cavity.cross_section * _norm(n, m) * ky)
    p_plus = 2 * a * np.cos(ky * y0)
    return ModalField(p_plus, np.zeros_like(p_plus), k, cavity)


def _segment_integral(order, lo, hi, length):
    """Integral of ``cos(order*pi*s/length)`` over ``[lo, hi]``."""
    order = np.asarray(order, dtype=float)
    safe = np.where(order == 0, 1.0, order)
    a = safe * np.pi / length
    val = (np.sin(a * hi) - np.sin(a * lo)) / a
    return np.where(order == 0, hi - lo, val)


def opening_volume_velocity(position, q_p, freq, cavity: CavitySpec, opening: Opening,
                            medium: Medium = Medium()) -> complex:
    """Net volume velocity through ``opening`` produced by a primary of strength ``q_p``.

    Each mode contributes ``q_p * phi(x0, z0) / (S * norm) * cos(k_y*y0) *
    exp(-j*k_y*l_y) * integral(phi over the opening)``; the ``1/k_y`` of the
    modal amplitude cancels against the ``k_y`` of the particle velocity, so
    the expression is regular at the mode cut-offs.
    """
    x0, y0, z0 = map(float, position)
    if not cavity.contains((x0, y0, z0)):
        raise GeometryError(f"primary position {position} is outside the cavity")
    n, m = _mode_grid(cavity)
    k = float(medium.wavenumber(freq))
    ky = wavenumber_y(n, m, k, cavity)
    phi0 = eigenfunction(n, m, x0, z0, cavity)
    ix = _segment_integral(n, *opening.x_range, cavity.l_x)
    iz = _segment_integral(m, *opening.z_range, cavity.l_z)
    u = (q_p * phi0 / (cavity.cross_section * _norm(n, m)) * np.cos(ky * y0)
         * np.exp(-1j * ky * cavity.l_y) * ix * iz)
    return complex(u.sum())


def volume_velocity_from_field(field: ModalField, opening: Opening, medium: Medium = Medium()) -> complex:
    """Volume velocity through ``opening`` from the +y field components (Euler's equation)."""
    cavity = field.cavity
    n, m = _mode_grid(cavity)
    ky = field.k_y
    omega = float(np.real(field.k)) * medium.c0
    ix = _segment_integral(n, *opening.x_range, cavity.l_x)
    iz = _segment_integral(m, *opening.z_range, cavity.l_z)
    v = ky / (medium.rho0 * omega) * (field.p_plus * np.exp(-1j * ky * cavity.l_y)
                                       - field.p_minus * np.exp(1j * ky * cavity.l_y))
    return complex((v * ix * iz).sum())
