"""Exterior field of the baffled opening: primary equivalent source plus secondaries.

The opening plane is treated as a rigid baffle. Sources on it radiate into
the half-space with pressure doubling (their image coincides with them), and
scattering by the enclosure edges is neglected.
"""

from __future__ import annotations

import numpy as np

from ..errors import GeometryError, SingularityError
from .geometry import EvalGrid, Medium, SourceLayout
from .modal import opening_volume_velocity

BAFFLE_FACTOR = 2.0


def monopole_transfer(source_pos, receiver_pos, freq, medium: Medium = Medium()):
    """Free-field pressure per unit volume velocity: ``j*rho0*omega*exp(-j*k*r)/(4*pi*r)``.

    ``receiver_pos`` may be a single point or an ``(N, 3)`` array.
    """
    src = np.asarray(source_pos, dtype=float)
    rcv = np.asarray(receiver_pos, dtype=float)
    r = np.linalg.norm(rcv - src, axis=-1)
    if np.any(r < 1e-12):
        raise SingularityError("source and receiver coincide")
    omega = 2 * np.pi * freq
    k = omega / medium.c0
    z = 1j * medium.rho0 * omega * np.exp(-1j * k * r) / (4 * np.pi * r)
    return complex(z) if np.ndim(z) == 0 else z


def equivalent_primary_strength(layout: SourceLayout, freq, medium: Medium = Medium()) -> complex:
    """Volume velocity of the equivalent monopole at the opening centroid."""
    if layout.equivalent == "modal":
        return opening_volume_velocity(layout.primary, layout.q_p, freq, layout.cavity,
                                       layout.opening, medium)
    d_in = layout.opening.plane_y - layout.primary[1]
    return layout.q_p * np.exp(-1j * medium.wavenumber(freq) * d_in)


def _check_grid(layout: SourceLayout, grid: EvalGrid):
    behind = grid.points[:, 1] <= layout.opening.plane_y
    if np.any(behind):
        raise GeometryError(
            f"grid points {np.flatnonzero(behind)[:8].tolist()} are not in front of the baffle "
            f"plane y={layout.opening.plane_y}"
        )


def transfer_matrices(layout: SourceLayout, grid: EvalGrid, freq, medium: Medium = Medium()):
    """Return ``(P_vec, S_mat)``: exterior pressure per unit primary / secondary strength."""
    _check_grid(layout, grid)
    centroid = layout.opening.center
    unit = layout.with_strengths(q_p=1.0)
    p_vec = (BAFFLE_FACTOR * equivalent_primary_strength(unit, freq, medium)
             * monopole_transfer(centroid, grid.points, freq, medium))
    s_mat = np.empty((len(grid), layout.n_secondaries), dtype=complex)
    for k, pos in enumerate(layout.secondaries):
        s_mat[:, k] = BAFFLE_FACTOR * monopole_transfer(pos, grid.points, freq, medium)
    return np.atleast_1d(p_vec), s_mat


def outside_pressure(layout: SourceLayout, grid: EvalGrid, freq, medium: Medium = Medium()):
    """Total exterior pressure ``p_i + p_r`` at each grid point (scattering neglected)."""
    p_vec, s_mat = transfer_matrices(layout, grid, freq, medium)
    return p_vec * layout.q_p + s_mat @ layout.q_s
