"""Numba-compiled versions of the batched 2x2 grid kernels.

Import fails cleanly when numba is unavailable; the package then falls back
to the numpy backend."""

import numpy as np
from numba import njit, prange

NAME = "numba"


@njit(cache=True)
def _det2_flat(a, out):
    for i in range(a.shape[0]):
        out[i] = a[i, 0, 0] * a[i, 1, 1] - a[i, 0, 1] * a[i, 1, 0]


def det2(a):
    a = np.ascontiguousarray(a)
    flat = a.reshape(-1, 2, 2)
    out = np.empty(flat.shape[0], dtype=flat.dtype)
    _det2_flat(flat, out)
    return out.reshape(a.shape[:-2])


@njit(cache=True, parallel=True)
def _inv2_flat(a, out):
    for i in prange(a.shape[0]):
        d = a[i, 0, 0] * a[i, 1, 1] - a[i, 0, 1] * a[i, 1, 0]
        out[i, 0, 0] = a[i, 1, 1] / d
        out[i, 1, 1] = a[i, 0, 0] / d
        out[i, 0, 1] = -a[i, 0, 1] / d
        out[i, 1, 0] = -a[i, 1, 0] / d


def inv2(a):
    a = np.ascontiguousarray(a)
    flat = a.reshape(-1, 2, 2)
    out = np.empty_like(flat)
    _inv2_flat(flat, out)
    return out.reshape(a.shape)


@njit(cache=True, parallel=True)
def _mul2_flat(a, b, out):
    for i in prange(a.shape[0]):
        for r in range(2):
            for c in range(2):
                out[i, r, c] = a[i, r, 0] * b[i, 0, c] + a[i, r, 1] * b[i, 1, c]


def mul2(a, b):
    a = np.ascontiguousarray(a)
    b = np.ascontiguousarray(np.broadcast_to(b, a.shape))
    flat_a = a.reshape(-1, 2, 2)
    flat_b = b.reshape(-1, 2, 2)
    out = np.empty_like(flat_a)
    _mul2_flat(flat_a, flat_b, out)
    return out.reshape(a.shape)


@njit(cache=True, parallel=True)
def _herm_sqrt2_flat(a, out):
    for i in prange(a.shape[0]):
        d = a[i, 0, 0] * a[i, 1, 1] - a[i, 0, 1] * a[i, 1, 0]
        s = np.sqrt(d)
        t = np.sqrt(a[i, 0, 0] + a[i, 1, 1] + 2 * s)
        out[i, 0, 0] = (a[i, 0, 0] + s) / t
        out[i, 0, 1] = a[i, 0, 1] / t
        out[i, 1, 0] = a[i, 1, 0] / t
        out[i, 1, 1] = (a[i, 1, 1] + s) / t


def herm_sqrt2(a):
    a = np.ascontiguousarray(a)
    flat = a.reshape(-1, 2, 2)
    out = np.empty_like(flat)
    _herm_sqrt2_flat(flat, out)
    return out.reshape(a.shape)


@njit(cache=True)
def _b_block(gm, g0, i):
    """b with b g0 = -gm and b gm = 0 by normal equations, at block i."""
    # N = conj(g0) g0^T + conj(gm) gm^T
    n00 = (
        np.conj(g0[i, 0, 0]) * g0[i, 0, 0]
        + np.conj(g0[i, 0, 1]) * g0[i, 0, 1]
        + np.conj(gm[i, 0, 0]) * gm[i, 0, 0]
        + np.conj(gm[i, 0, 1]) * gm[i, 0, 1]
    )
    n01 = (
        np.conj(g0[i, 0, 0]) * g0[i, 1, 0]
        + np.conj(g0[i, 0, 1]) * g0[i, 1, 1]
        + np.conj(gm[i, 0, 0]) * gm[i, 1, 0]
        + np.conj(gm[i, 0, 1]) * gm[i, 1, 1]
    )
    n10 = np.conj(n01)
    n11 = (
        np.conj(g0[i, 1, 0]) * g0[i, 1, 0]
        + np.conj(g0[i, 1, 1]) * g0[i, 1, 1]
        + np.conj(gm[i, 1, 0]) * gm[i, 1, 0]
        + np.conj(gm[i, 1, 1]) * gm[i, 1, 1]
    )
    # rhs = -conj(g0) gm^T
    r00 = -(np.conj(g0[i, 0, 0]) * gm[i, 0, 0] + np.conj(g0[i, 0, 1]) * gm[i, 0, 1])
    r01 = -(np.conj(g0[i, 0, 0]) * gm[i, 1, 0] + np.conj(g0[i, 0, 1]) * gm[i, 1, 1])
    r10 = -(np.conj(g0[i, 1, 0]) * gm[i, 0, 0] + np.conj(g0[i, 1, 1]) * gm[i, 0, 1])
    r11 = -(np.conj(g0[i, 1, 0]) * gm[i, 1, 0] + np.conj(g0[i, 1, 1]) * gm[i, 1, 1])
    d = n00 * n11 - n01 * n10
    # bT = N^{-1} rhs, then transpose
    bt00 = (n11 * r00 - n01 * r10) / d
    bt01 = (n11 * r01 - n01 * r11) / d
    bt10 = (-n10 * r00 + n00 * r10) / d
    bt11 = (-n10 * r01 + n00 * r11) / d
    return bt00, bt10, bt01, bt11  # b00, b01, b10, b11


@njit(cache=True, parallel=True)
def _j_from_modes_flat(gm, g0, gp, out):
    for i in prange(g0.shape[0]):
        b00, b01, b10, b11 = _b_block(gm, g0, i)
        out[i, 0, 0] = g0[i, 0, 0] + b00 * gp[i, 0, 0] + b01 * gp[i, 1, 0]
        out[i, 0, 1] = g0[i, 0, 1] + b00 * gp[i, 0, 1] + b01 * gp[i, 1, 1]
        out[i, 1, 0] = g0[i, 1, 0] + b10 * gp[i, 0, 0] + b11 * gp[i, 1, 0]
        out[i, 1, 1] = g0[i, 1, 1] + b10 * gp[i, 0, 1] + b11 * gp[i, 1, 1]


def j_from_modes(g_m1, g_0, g_p1):
    gm = np.ascontiguousarray(g_m1).reshape(-1, 2, 2)
    g0 = np.ascontiguousarray(g_0).reshape(-1, 2, 2)
    gp = np.ascontiguousarray(g_p1).reshape(-1, 2, 2)
    out = np.empty_like(g0)
    _j_from_modes_flat(gm, g0, gp, out)
    return out.reshape(np.asarray(g_0).shape)


@njit(cache=True, parallel=True)
def _split_residual_flat(gm, g0, out):
    for i in prange(g0.shape[0]):
        b00, b01, b10, b11 = _b_block(gm, g0, i)
        r = abs(b00 * gm[i, 0, 0] + b01 * gm[i, 1, 0])
        r = max(r, abs(b00 * gm[i, 0, 1] + b01 * gm[i, 1, 1]))
        r = max(r, abs(b10 * gm[i, 0, 0] + b11 * gm[i, 1, 0]))
        r = max(r, abs(b10 * gm[i, 0, 1] + b11 * gm[i, 1, 1]))
        r = max(r, abs(b00 * g0[i, 0, 0] + b01 * g0[i, 1, 0] + gm[i, 0, 0]))
        r = max(r, abs(b00 * g0[i, 0, 1] + b01 * g0[i, 1, 1] + gm[i, 0, 1]))
        r = max(r, abs(b10 * g0[i, 0, 0] + b11 * g0[i, 1, 0] + gm[i, 1, 0]))
        r = max(r, abs(b10 * g0[i, 0, 1] + b11 * g0[i, 1, 1] + gm[i, 1, 1]))
        out[i] = r


def split_residual_modes(g_m1, g_0, g_p1):
    gm = np.ascontiguousarray(g_m1).reshape(-1, 2, 2)
    g0 = np.ascontiguousarray(g_0).reshape(-1, 2, 2)
    out = np.empty(g0.shape[0], dtype=np.float64)
    _split_residual_flat(gm, g0, out)
    return out.reshape(np.asarray(g_0).shape[:-2])
