"""Coordinate isomorphisms R^4 = C^2, the antipodal involutions, twistor
incidence coordinates, annulus sampling parameters and the star conjugation
on matrix-valued functions of (x, z)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfiniteChart

DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class R4Point:
    """A point of Euclidean R^4."""

    x1: float
    x2: float
    x3: float
    x4: float

    def __post_init__(self):
        if not all(np.isfinite([self.x1, self.x2, self.x3, self.x4])):
            raise ValueError("coordinates must be finite")

    @property
    def u(self) -> complex:
        return complex(self.x1, self.x2)

    @property
    def v(self) -> complex:
        return complex(self.x3, -self.x4)

    @staticmethod
    def from_complex(u: complex, v: complex) -> "R4Point":
        return R4Point(u.real, u.imag, v.real, -v.imag)

    def shifted(self, du: complex, dv: complex) -> "R4Point":
        return R4Point.from_complex(self.u + du, self.v + dv)

    @property
    def norm(self) -> float:
        return float(np.hypot(np.hypot(self.x1, self.x2), np.hypot(self.x3, self.x4)))


class SpectralPoint:
    """A point of the Riemann sphere.  Infinity is a tagged value, never an
    IEEE inf, so arithmetic on the finite chart can't silently overflow."""

    __slots__ = ("value", "is_infinity")

    def __init__(self, value=0j, is_infinity=False):
        self.is_infinity = bool(is_infinity)
        self.value = None if self.is_infinity else complex(value)
        if self.value is not None and not np.isfinite(self.value):
            raise ValueError("finite chart value must be finite; use INF_POINT")

    def __repr__(self):
        return "SpectralPoint(inf)" if self.is_infinity else f"SpectralPoint({self.value})"

    def __eq__(self, other):
        other = as_spectral(other)
        if self.is_infinity or other.is_infinity:
            return self.is_infinity and other.is_infinity
        return self.value == other.value

    def __hash__(self):
        return hash(("inf",)) if self.is_infinity else hash(self.value)


INF_POINT = SpectralPoint(is_infinity=True)


def as_spectral(z) -> SpectralPoint:
    if isinstance(z, SpectralPoint):
        return z
    return SpectralPoint(complex(z))


def to_complex(x: R4Point):
    """(x1, x2, x3, x4) -> (u, v) = (x1 + i x2, x3 - i x4)."""
    return x.u, x.v


def sigma_cp1(z) -> SpectralPoint:
    """Antipodal map z -> -1/conj(z), exchanging 0 and infinity."""
    z = as_spectral(z)
    if z.is_infinity:
        return SpectralPoint(0j)
    if z.value == 0:
        return INF_POINT
    return SpectralPoint(-1.0 / np.conj(z.value))


def sigma_c4(zvec):
    """Componentwise (z1, z2, z3, z4) -> (-conj z2, conj z1, -conj z4, conj z3).

    Squares to minus the identity on C^4."""
    z = np.asarray(zvec, dtype=complex)
    zc = np.conj(z)
    return np.array([-zc[1], zc[0], -zc[3], zc[2]])


def incidence(x: R4Point, z) -> tuple:
    """Coordinates (w1, w2) = (u - z conj(v), v + z conj(u)) of the point of
    the line over x at spectral parameter z, in the z1 != 0 chart."""
    z = as_spectral(z)
    if z.is_infinity:
        raise InfiniteChart("use incidence_inf_chart for z = infinity")
    u, v = x.u, x.v
    return u - z.value * np.conj(v), v + z.value * np.conj(u)


def incidence_inf_chart(x: R4Point, z) -> tuple:
    """The z2-chart incidence coordinates (-conj v + u/z, conj u + v/z, 1/z),
    valid near z = infinity.  Returns (w1', w2', 1/z)."""
    z = as_spectral(z)
    u, v = x.u, x.v
    if z.is_infinity:
        zinv = 0j
    else:
        if z.value == 0:
            raise InfiniteChart("z = 0 is outside the z2-chart")
        zinv = 1.0 / z.value
    return -np.conj(v) + zinv * u, np.conj(u) + zinv * v, zinv


def homogeneous(x: R4Point, z) -> np.ndarray:
    """Homogeneous C^4 coordinates (1, z, w1, w2) of the point on L_x at z."""
    w1, w2 = incidence(x, z)
    z = as_spectral(z)
    return np.array([1.0, z.value, w1, w2], dtype=complex)


@dataclass(frozen=True)
class AnnulusSpec:
    """Sampling parameters for loop matrices on the unit circle."""

    epsilon: float = 0.1
    n_samples: int = 128

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        n = self.n_samples
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError("n_samples must be a power of two >= 8")

    @property
    def circle(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.n_samples) / self.n_samples)


def star_fn(f):
    """Pointwise star conjugate of a matrix function: f*(x, z) = f(x, sigma(z))^dagger.

    An anti-involution: (f*)* = f and (fg)* = g* f*."""

    def fstar(x, z):
        m = np.asarray(f(x, sigma_cp1(z)), dtype=complex)
        return m.conj().T

    return fstar


def _partials(f, x: R4Point, z, h: float):
    """Central-difference gradient of f(x, z) along the four real axes."""
    out = []
    coords = (x.x1, x.x2, x.x3, x.x4)
    for axis in range(4):
        c = list(coords)
        c[axis] = coords[axis] + h
        fp = np.asarray(f(R4Point(*c), z), dtype=complex)
        c[axis] = coords[axis] - h
        fm = np.asarray(f(R4Point(*c), z), dtype=complex)
        out.append((fp - fm) / (2 * h))
    return out


def complex_derivatives(f, x: R4Point, z, h: float = DEFAULT_FD_STEP):
    """Central-difference (d_u, d_ubar, d_v, d_vbar) of f at (x, z)."""
    d1, d2, d3, d4 = _partials(f, x, z, h)
    du = 0.5 * (d1 - 1j * d2)
    dubar = 0.5 * (d1 + 1j * d2)
    dv = 0.5 * (d3 + 1j * d4)
    dvbar = 0.5 * (d3 - 1j * d4)
    return du, dubar, dv, dvbar


def twistor_derivative(f, which: str, x: R4Point, z, h: float = DEFAULT_FD_STEP):
    """Apply X(z) = d_ubar - z d_v or Y(z) = d_vbar + z d_u to f by central
    differences.  Incidence functions are annihilated to O(h^2)."""
    z = as_spectral(z)
    if z.is_infinity:
        raise InfiniteChart("twistor derivative at infinity is not supported")
    du, dubar, dv, dvbar = complex_derivatives(f, x, z, h)
    if which == "X":
        return dubar - z.value * dv
    if which == "Y":
        return dvbar + z.value * du
    raise ValueError("which must be 'X' or 'Y'")
