"""Frequency-domain optimal control and the noise-reduction metric."""

from __future__ import annotations

import math

import numpy as np

from ..errors import IllPosedControlError
from .geometry import Medium

RCOND = 1e-10


def control_cost(p_total, medium: Medium = Medium()) -> float:
    """Acoustic potential-energy cost ``sum |p|^2 / (2 rho0 c0^2)``."""
    p = np.asarray(p_total)
    return float(np.sum(np.abs(p) ** 2) / (2 * medium.rho0 * medium.c0**2))


def condition_number(s_mat) -> float:
    sv = np.linalg.svd(np.atleast_2d(s_mat), compute_uv=False)
    return math.inf if sv[-1] == 0 else float(sv[0] / sv[-1])


def optimal_source_strengths(p_vec, s_mat, q_p=1.0):
    """Secondary strengths minimising ``sum |P q_p + S q_S|^2``.

    Solves the normal equations ``(S^H S) q_S = -S^H P q_p``. Raises
    :class:`IllPosedControlError` when ``S`` is numerically rank deficient.
    """
    s = np.atleast_2d(np.asarray(s_mat, dtype=complex))
    p = np.asarray(p_vec, dtype=complex).reshape(s.shape[0])
    cond = condition_number(s)
    if s.shape[1] > s.shape[0] or not cond < 1 / RCOND:
        raise IllPosedControlError("secondary transfer matrix is rank deficient", cond)
    sh = s.conj().T
    return -np.linalg.solve(sh @ s, sh @ p) * q_p


def noise_reduction(p_without, p_with) -> float:
    """``10 log10( sum|p_without|^2 / sum|p_with|^2 )`` in dB; ``inf`` for perfect cancellation."""
    a = np.asarray(p_without).ravel()
    b = np.asarray(p_with).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty pressure lists")
    num = float(np.sum(np.abs(a) ** 2))
    den = float(np.sum(np.abs(b) ** 2))
    if den == 0:
        return math.inf
    if num == 0:
        return -math.inf
    return 10 * math.log10(num / den)
