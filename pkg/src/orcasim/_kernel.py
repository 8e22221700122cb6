"""Compiled RK4 loop for the ladder equations.

Arithmetic mirrors the numpy reference path in :mod:`orcasim.memory`
stage for stage; velocity-class reductions run in ascending index order.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _stage(k, P, B, S_in, half_rabi, J, w, a, b, g, dP, dB, S, p):
    nz, nv = P.shape
    for i in range(nz):
        acc = 0j
        for j in range(nv):
            acc += P[i, j] * w[j]
        p[i] = acc
    for i in range(nz):
        acc = 0j
        for m in range(nz):
            acc += J[i, m] * p[m]
        S[i] = S_in[k] + 1j * g * acc
    hr = half_rabi[k]
    hrc = np.conj(hr)
    for i in range(nz):
        src = 1j * g * S[i]
        for j in range(nv):
            dP[i, j] = -a[j] * P[i, j] + src + 1j * hr * B[i, j]
            dB[i, j] = -b[j] * B[i, j] + 1j * hrc * P[i, j]


@njit(cache=True)
def _record(i, P, B, S_in, J, w, cc, g, gs, out, sw, pe, decay, p):
    nz, nv = P.shape
    for r in range(nz):
        acc = 0j
        for j in range(nv):
            acc += P[r, j] * w[j]
        p[r] = acc
    acc = 0j
    for m in range(nz):
        acc += J[nz - 1, m] * p[m]
    out[i] = S_in[2 * i] + 1j * g * acc
    ep = 0.0
    eb = 0.0
    for r in range(nz):
        sp = 0.0
        sb = 0.0
        for j in range(nv):
            sp += (P[r, j].real ** 2 + P[r, j].imag ** 2) * w[j]
            sb += (B[r, j].real ** 2 + B[r, j].imag ** 2) * w[j]
        ep += cc[r] * sp
        eb += cc[r] * sb
    pe[i] = ep
    sw[i] = eb
    decay[i] = 2 * ep + 2 * gs * eb


@njit(cache=True)
def integrate(S_in, half_rabi, J, cc, w, a, b, g, gs, dtau, P0, B0):
    n_steps = (S_in.shape[0] - 1) // 2
    nz, nv = P0.shape
    P = P0.copy()
    B = B0.copy()
    out = np.empty(n_steps + 1, dtype=np.complex128)
    sw = np.empty(n_steps + 1)
    pe = np.empty(n_steps + 1)
    decay = np.empty(n_steps + 1)
    p = np.empty(nz, dtype=np.complex128)
    S = np.empty(nz, dtype=np.complex128)
    k1P = np.empty((nz, nv), dtype=np.complex128)
    k1B = np.empty_like(k1P)
    k2P = np.empty_like(k1P)
    k2B = np.empty_like(k1P)
    k3P = np.empty_like(k1P)
    k3B = np.empty_like(k1P)
    k4P = np.empty_like(k1P)
    k4B = np.empty_like(k1P)
    tP = np.empty_like(k1P)
    tB = np.empty_like(k1P)
    h = dtau
    _record(0, P, B, S_in, J, w, cc, g, gs, out, sw, pe, decay, p)
    for n in range(n_steps):
        k = 2 * n
        _stage(k, P, B, S_in, half_rabi, J, w, a, b, g, k1P, k1B, S, p)
        for i in range(nz):
            for j in range(nv):
                tP[i, j] = P[i, j] + 0.5 * h * k1P[i, j]
                tB[i, j] = B[i, j] + 0.5 * h * k1B[i, j]
        _stage(k + 1, tP, tB, S_in, half_rabi, J, w, a, b, g, k2P, k2B, S, p)
        for i in range(nz):
            for j in range(nv):
                tP[i, j] = P[i, j] + 0.5 * h * k2P[i, j]
                tB[i, j] = B[i, j] + 0.5 * h * k2B[i, j]
        _stage(k + 1, tP, tB, S_in, half_rabi, J, w, a, b, g, k3P, k3B, S, p)
        for i in range(nz):
            for j in range(nv):
                tP[i, j] = P[i, j] + h * k3P[i, j]
                tB[i, j] = B[i, j] + h * k3B[i, j]
        _stage(k + 2, tP, tB, S_in, half_rabi, J, w, a, b, g, k4P, k4B, S, p)
        finite = True
        for i in range(nz):
            for j in range(nv):
                P[i, j] = P[i, j] + (h / 6.0) * (k1P[i, j] + 2.0 * k2P[i, j] + 2.0 * k3P[i, j] + k4P[i, j])
                B[i, j] = B[i, j] + (h / 6.0) * (k1B[i, j] + 2.0 * k2B[i, j] + 2.0 * k3B[i, j] + k4B[i, j])
                if not (np.isfinite(P[i, j].real) and np.isfinite(P[i, j].imag)
                        and np.isfinite(B[i, j].real) and np.isfinite(B[i, j].imag)):
                    finite = False
        if not finite:
            return P, B, out, sw, pe, decay, n + 1
        _record(n + 1, P, B, S_in, J, w, cc, g, gs, out, sw, pe, decay, p)
    return P, B, out, sw, pe, decay, -1
