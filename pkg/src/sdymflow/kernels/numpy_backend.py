"""Reference implementations of the batched 2x2 grid kernels.

Everything here takes arrays of shape (..., 2, 2) and is written with
explicit cofactor formulas so the numba backend can mirror it loop-for-loop."""

import numpy as np

NAME = "numpy"


def det2(a):
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def inv2(a):
    d = det2(a)
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out / d[..., None, None]


def mul2(a, b):
    return a @ b


def herm_sqrt2(a):
    """Principal square root of hermitian positive definite 2x2 blocks."""
    s = np.sqrt(det2(a))
    t = np.sqrt(a[..., 0, 0] + a[..., 1, 1] + 2 * s)
    out = a.copy()
    out[..., 0, 0] += s
    out[..., 1, 1] += s
    return out / t[..., None, None]


def _b_minus1(g_m1, g_0):
    """Least-squares b with b g_0 = -g_{-1} and b g_{-1} = 0, via the 2x2
    normal equations.  Stays finite where g_0 alone is singular."""
    g0T = np.swapaxes(g_0, -1, -2)
    gm1T = np.swapaxes(g_m1, -1, -2)
    N = np.conj(g_0) @ g0T + np.conj(g_m1) @ gm1T
    rhs = -np.conj(g_0) @ gm1T
    return np.swapaxes(inv2(N) @ rhs, -1, -2)


def j_from_modes(g_m1, g_0, g_p1):
    """Zero mode g_0 + b_{-1} g_{+1} of Psi_inf G for bandwidth-one loops,
    with Psi_inf = I + b_{-1}/z."""
    return g_0 + _b_minus1(g_m1, g_0) @ g_p1


def split_residual_modes(g_m1, g_0, g_p1):
    """Max block norm of the defining equations for b_{-1} (modes -1 and -2)."""
    b = _b_minus1(g_m1, g_0)
    r1 = b @ g_0 + g_m1
    r2 = b @ g_m1
    r = np.maximum(np.abs(r1), np.abs(r2))
    return r.reshape(r.shape[:-2] + (4,)).max(axis=-1)
