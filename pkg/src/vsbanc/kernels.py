"""Sample-recursive inner loops.

Each kernel has a numba implementation and a vectorised-per-sample numpy
implementation with identical semantics. ``fxlms_loop`` and ``lms_loop`` are
bound to whichever backend :mod:`vsbanc._backend` selected; both variants stay
importable for equivalence tests and benchmarks.
"""

import numpy as np

from ._backend import BACKEND, HAVE_NUMBA, njit


# overflow is expected on divergence, which the loop reports by index
@np.errstate(over="ignore", invalid="ignore")
def _fxlms_loop_py(x, d, xf, s, W, mu, leak, limit, start, snap_every, snaps):
    """Closed-loop multichannel FxLMS.

    x: (N,) reference; d: (M, N) disturbance; xf: (K, M, N) filtered reference;
    s: (K, M, Ls) physical secondary paths; W: (K, L) weights, updated in place.
    Before sample ``start`` the controller is silent and frozen. ``limit > 0``
    clamps the outputs. Returns ``(e, y, diverged_at)`` with ``diverged_at = -1``
    when every error sample stayed finite.
    """
    K, L = W.shape
    M, N = d.shape
    Ls = s.shape[2]
    xp = np.concatenate((np.zeros(L - 1), x))
    xfp = np.concatenate((np.zeros((K, M, L - 1)), xf), axis=2)
    yp = np.zeros((K, Ls - 1 + N))
    e = np.empty((M, N))
    decay = 1.0 - mu * leak
    snap = 0
    for n in range(N):
        if n >= start:
            yn = W @ xp[n:n + L][::-1]
            if limit > 0:
                yn = np.clip(yn, -limit, limit)
            yp[:, n + Ls - 1] = yn
        ywin = yp[:, n:n + Ls][:, ::-1]
        en = d[:, n] - np.einsum("kmj,kj->m", s, ywin)
        e[:, n] = en
        if not np.all(np.isfinite(en)):
            return e, yp[:, Ls - 1:], n
        if n >= start:
            xfwin = xfp[:, :, n:n + L][:, :, ::-1]
            W *= decay
            W += mu * np.einsum("kml,m->kl", xfwin, en)
        if snap_every > 0 and (n + 1) % snap_every == 0:
            snaps[snap] = W
            snap += 1
    return e, yp[:, Ls - 1:], -1


def _fxlms_loop_nb(x, d, xf, s, W, mu, leak, limit, start, snap_every, snaps):
    K, L = W.shape
    M, N = d.shape
    Ls = s.shape[2]
    e = np.empty((M, N))
    y = np.zeros((K, N))
    decay = 1.0 - mu * leak
    snap = 0
    for n in range(N):
        if n >= start:
            for k in range(K):
                acc = 0.0
                for l in range(min(L, n + 1)):
                    acc += W[k, l] * x[n - l]
                if limit > 0:
                    if acc > limit:
                        acc = limit
                    elif acc < -limit:
                        acc = -limit
                y[k, n] = acc
        finite = True
        for m in range(M):
            acc = d[m, n]
            for k in range(K):
                for j in range(min(Ls, n + 1)):
                    acc -= s[k, m, j] * y[k, n - j]
            e[m, n] = acc
            if not np.isfinite(acc):
                finite = False
        if not finite:
            return e, y, n
        if n >= start:
            for k in range(K):
                for l in range(L):
                    g = 0.0
                    if l <= n:
                        for m in range(M):
                            g += xf[k, m, n - l] * e[m, n]
                    W[k, l] = decay * W[k, l] + mu * g
        if snap_every > 0 and (n + 1) % snap_every == 0:
            for k in range(K):
                for l in range(L):
                    snaps[snap, k, l] = W[k, l]
            snap += 1
    return e, y, -1


@np.errstate(over="ignore", invalid="ignore")
def _lms_loop_py(u, t, h, mu, passes):
    """Joint LMS identification of ``M`` FIRs driven by the same input.

    u: (N,) excitation; t: (M, N) measured outputs; h: (M, Ls) updated in place.
    Returns the per-output error energy of the final pass and the index of the
    first non-finite update (``-1`` if none).
    """
    M, Ls = h.shape
    N = u.size
    up = np.concatenate((np.zeros(Ls - 1), u))
    err_energy = np.zeros(M)
    for p in range(passes):
        err_energy[:] = 0.0
        for n in range(N):
            uwin = up[n:n + Ls][::-1]
            err = t[:, n] - h @ uwin
            if not np.all(np.isfinite(err)):
                return err_energy, p * N + n
            h += mu * err[:, None] * uwin[None, :]
            err_energy += err * err
    return err_energy, -1


def _lms_loop_nb(u, t, h, mu, passes):
    M, Ls = h.shape
    N = u.size
    err_energy = np.zeros(M)
    for p in range(passes):
        for m in range(M):
            err_energy[m] = 0.0
        for n in range(N):
            jmax = min(Ls, n + 1)
            for m in range(M):
                acc = t[m, n]
                for j in range(jmax):
                    acc -= h[m, j] * u[n - j]
                if not np.isfinite(acc):
                    return err_energy, p * N + n
                g = mu * acc
                for j in range(jmax):
                    h[m, j] += g * u[n - j]
                err_energy[m] += acc * acc
    return err_energy, -1


fxlms_loop_numpy = _fxlms_loop_py
lms_loop_numpy = _lms_loop_py

if HAVE_NUMBA:
    fxlms_loop_numba = njit(cache=True)(_fxlms_loop_nb)
    lms_loop_numba = njit(cache=True)(_lms_loop_nb)
    fxlms_loop = fxlms_loop_numba
    lms_loop = lms_loop_numba
else:
    fxlms_loop_numba = lms_loop_numba = None
    fxlms_loop = fxlms_loop_numpy
    lms_loop = lms_loop_numpy

__all__ = ["BACKEND", "fxlms_loop", "lms_loop", "fxlms_loop_numpy", "lms_loop_numpy",
           "fxlms_loop_numba", "lms_loop_numba"]
