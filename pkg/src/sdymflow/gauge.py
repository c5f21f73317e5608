"""Connection reconstruction from split patching fields, curvature and
self-duality residuals, the Yang equation residual, and action integrals.

The constant matrices psi_0, psi_inf of the factorization depend only on x,
and the gauge potential is built from their lattice derivatives:
A_u = -(d_u psi_inf) psi_inf^{-1}, A_ubar = -(d_ubar psi_0) psi_0^{-1}, and
likewise for v.  In the hermitian gauge psi_inf = psi_0^{-1} = J^{-1/2}."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .adhm import PatchingField
from .errors import NontrivialSplittingType, QuadratureDiverged
from .geometry import R4Point, as_spectral
from .kernels import herm_sqrt2, inv2, j_from_modes, split_residual_modes
from .rhsplit import LoopMatrix, birkhoff_split, j_function


@dataclass(frozen=True)
class GridSpec:
    """Uniform 4D lattice, the same interval on every axis by default."""

    mins: tuple
    maxs: tuple
    counts: tuple

    @staticmethod
    def cube(lo: float, hi: float, n: int) -> "GridSpec":
        return GridSpec((lo,) * 4, (hi,) * 4, (n,) * 4)

    def __post_init__(self):
        if any(c < 5 for c in self.counts):
            raise ValueError("need at least 5 points per axis for central differences")
        if any(hi <= lo for lo, hi in zip(self.mins, self.maxs)):
            raise ValueError("empty axis interval")

    @property
    def spacings(self) -> tuple:
        return tuple(
            (hi - lo) / (c - 1) for lo, hi, c in zip(self.mins, self.maxs, self.counts)
        )

    @property
    def axes(self) -> tuple:
        return tuple(
            np.linspace(lo, hi, c) for lo, hi, c in zip(self.mins, self.maxs, self.counts)
        )

    def meshes(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def to_json(self):
        return {"mins": list(self.mins), "maxs": list(self.maxs), "counts": list(self.counts)}


def j_field(fieldF: PatchingField, u, v):
    """J at a batch of line centers; uses the Fourier-mode fast path when the
    field carries one, else splits each line."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if fieldF.modes_fn is not None and fieldF.bandwidth == 1:
        m = fieldF.modes_fn(u, v)
        resid = split_residual_modes(m[..., 0, :, :], m[..., 1, :, :], m[..., 2, :, :])
        if resid.max() > 1e-8:
            bad = np.unravel_index(int(np.argmax(resid)), resid.shape)
            raise NontrivialSplittingType(
                f"fast-path split residual {resid.max():.2e} at index {bad}"
            )
        return j_from_modes(m[..., 0, :, :], m[..., 1, :, :], m[..., 2, :, :])
    out = np.empty(u.shape + (2, 2), dtype=complex)
    it = np.nditer(u, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        x = R4Point.from_complex(complex(u[idx]), complex(v[idx]))
        try:
            out[idx] = j_function(birkhoff_split(LoopMatrix.from_field(fieldF, x)))
        except NontrivialSplittingType as exc:
            raise NontrivialSplittingType(f"at x = {x}: {exc}") from exc
    return out


def _complex_derivs(f, spacings):
    """d_u, d_ubar, d_v, d_vbar of a (n1,n2,n3,n4,2,2) array by central
    differences (numpy.gradient; one-sided rows at the boundary)."""
    g1 = np.gradient(f, spacings[0], axis=0)
    g2 = np.gradient(f, spacings[1], axis=1)
    g3 = np.gradient(f, spacings[2], axis=2)
    g4 = np.gradient(f, spacings[3], axis=3)
    du = 0.5 * (g1 - 1j * g2)
    dubar = 0.5 * (g1 + 1j * g2)
    dv = 0.5 * (g3 + 1j * g4)
    dvbar = 0.5 * (g3 - 1j * g4)
    return du, dubar, dv, dvbar


def _sh(f, axis, k):
    """f shifted so index i reads f[i + k] along axis (wraparound rows are
    discarded by the interior margin)."""
    return np.roll(f, -k, axis=axis)


def _d1(f, axis, h):
    """Fourth-order central first derivative (radius-2 stencil)."""
    return (
        -_sh(f, axis, 2) + 8 * _sh(f, axis, 1) - 8 * _sh(f, axis, -1) + _sh(f, axis, -2)
    ) / (12 * h)


def _d2(f, axis, h):
    """Fourth-order central second derivative (radius-2 stencil)."""
    return (
        -_sh(f, axis, 2)
        + 16 * _sh(f, axis, 1)
        - 30 * f
        + 16 * _sh(f, axis, -1)
        - _sh(f, axis, -2)
    ) / (12 * h * h)


def _d2m(f, ax1, h1, ax2, h2):
    """Mixed second derivative as nested fourth-order first derivatives."""
    return _d1(_d1(f, ax2, h2), ax1, h1)


def _complex_first(f, sp):
    g1, g2, g3, g4 = (_d1(f, i, sp[i]) for i in range(4))
    return {
        "u": 0.5 * (g1 - 1j * g2),
        "ubar": 0.5 * (g1 + 1j * g2),
        "v": 0.5 * (g3 + 1j * g4),
        "vbar": 0.5 * (g3 - 1j * g4),
    }


def _complex_second(f, sp):
    """The six mixed complex-pair second derivatives of f, each from a
    radius-one stencil (no nested differencing)."""
    H11 = _d2(f, 0, sp[0])
    H22 = _d2(f, 1, sp[1])
    H33 = _d2(f, 2, sp[2])
    H44 = _d2(f, 3, sp[3])
    H13 = _d2m(f, 0, sp[0], 2, sp[2])
    H14 = _d2m(f, 0, sp[0], 3, sp[3])
    H23 = _d2m(f, 1, sp[1], 2, sp[2])
    H24 = _d2m(f, 1, sp[1], 3, sp[3])
    return {
        ("u", "v"): 0.25 * (H13 + 1j * H14 - 1j * H23 + H24),
        ("u", "ubar"): 0.25 * (H11 + H22),
        ("u", "vbar"): 0.25 * (H13 - 1j * H14 - 1j * H23 - H24),
        ("v", "ubar"): 0.25 * (H13 + 1j * H14 + 1j * H23 - H24),
        ("v", "vbar"): 0.25 * (H33 + H44),
        ("ubar", "vbar"): 0.25 * (H13 - 1j * H14 + 1j * H23 + H24),
    }


def _pair(a, b):
    return (a, b) if (a, b) in _SECOND_KEYS else (b, a)


_SECOND_KEYS = {
    ("u", "v"),
    ("u", "ubar"),
    ("u", "vbar"),
    ("v", "ubar"),
    ("v", "vbar"),
    ("ubar", "vbar"),
}


def _connection_curvature(psi0, psiInf, sp):
    """A and F from the split constants.  A_u, A_v come from psi_inf and
    A_ubar, A_vbar from psi_0; derivatives of A are expanded through the
    product rule so that only radius-one stencils of the psi fields appear."""
    p, q = psiInf, psi0
    pinv, qinv = psi0, psiInf  # hermitian gauge: inverse pairs
    dp = _complex_first(p, sp)
    dq = _complex_first(q, sp)
    d2p = _complex_second(p, sp)
    d2q = _complex_second(q, sp)

    src = {"u": (p, pinv, dp, d2p), "v": (p, pinv, dp, d2p),
           "ubar": (q, qinv, dq, d2q), "vbar": (q, qinv, dq, d2q)}

    def A(b):
        _, finv, df, _ = src[b]
        return -df[b] @ finv

    def dA(a, b):
        """d_a A_b = -(d_a d_b f) f^{-1} + (d_b f) f^{-1} (d_a f) f^{-1}."""
        f, finv, df, d2f = src[b]
        return -d2f[_pair(a, b)] @ finv + df[b] @ finv @ df[a] @ finv

    Acomp = {b: A(b) for b in ("u", "v", "ubar", "vbar")}

    def F_of(a, b):
        return dA(a, b) - dA(b, a) + Acomp[a] @ Acomp[b] - Acomp[b] @ Acomp[a]

    F = {
        "uv": F_of("u", "v"),
        "uubar": F_of("u", "ubar"),
        "uvbar": F_of("u", "vbar"),
        "vubar": F_of("v", "ubar"),
        "vvbar": F_of("v", "vbar"),
        "ubarvbar": F_of("ubar", "vbar"),
    }
    return Acomp, F


@dataclass
class GaugeGrid:
    """Connection and curvature sampled on a 4D lattice."""

    grid: GridSpec
    psi0: np.ndarray
    psiInf: np.ndarray
    Au: np.ndarray
    Av: np.ndarray
    Aubar: np.ndarray
    Avbar: np.ndarray
    F: dict = field(default_factory=dict)  # keys uv, uubar, uvbar, vubar, vvbar, ubarvbar

    @property
    def interior(self):
        """Slices where every nested central difference is genuinely central."""
        return tuple(slice(2, c - 2) for c in self.grid.counts)

    def action_density(self) -> np.ndarray:
        """|F|^2 = -sum_{mu<nu} tr(F_mn F_mn) in the real orthonormal frame."""
        return action_density_from_F(self.F)


def _curvature(Au, Av, Aubar, Avbar, spacings):
    dAu = _complex_derivs(Au, spacings)
    dAv = _complex_derivs(Av, spacings)
    dAub = _complex_derivs(Aubar, spacings)
    dAvb = _complex_derivs(Avbar, spacings)
    A = {"u": Au, "v": Av, "ubar": Aubar, "vbar": Avbar}
    D = {"u": dAu, "v": dAv, "ubar": dAub, "vbar": dAvb}
    ax = {"u": 0, "ubar": 1, "v": 2, "vbar": 3}

    def comm(a, b):
        return a @ b - b @ a

    def F_of(a, b):
        return D[b][ax[a]] - D[a][ax[b]] + comm(A[a], A[b])

    return {
        "uv": F_of("u", "v"),
        "uubar": F_of("u", "ubar"),
        "uvbar": F_of("u", "vbar"),
        "vubar": F_of("v", "ubar"),
        "vvbar": F_of("v", "vbar"),
        "ubarvbar": F_of("ubar", "vbar"),
    }


def action_density_from_F(F) -> np.ndarray:
    """Real-frame |F|^2 from the complex-frame curvature components.

    The normalization is |F|^2 = -sum_{mu<nu} tr(F_mn^2), which makes the
    one-instanton density the textbook profile 48 lam^4/(lam^2+r^2)^4 and the
    total action 8 pi^2 k.  With u = x1 + ix2, v = x3 - ix4 it expands in the
    complex frame as
    -8 tr(F_uv F_ubarvbar) + 8 tr(F_uvbar F_vubar)
    + 4 tr(F_uubar^2) + 4 tr(F_vvbar^2)."""
    t = (
        -8.0 * F["uv"] @ F["ubarvbar"]
        + 8.0 * F["uvbar"] @ F["vubar"]
        + 4.0 * F["uubar"] @ F["uubar"]
        + 4.0 * F["vvbar"] @ F["vvbar"]
    )
    return np.real(np.trace(t, axis1=-2, axis2=-1))


def reconstruct_connection(fieldF: PatchingField, grid: GridSpec) -> GaugeGrid:
    """Split on every line of the lattice and build A and F by central
    differences of the gauge-fixed constant factors."""
    X1, X2, X3, X4 = grid.meshes()
    U = X1 + 1j * X2
    V = X3 - 1j * X4
    J = j_field(fieldF, U, V)
    psi0 = herm_sqrt2(J)
    psiInf = inv2(psi0)
    A, F = _connection_curvature(psi0, psiInf, grid.spacings)
    return GaugeGrid(
        grid=grid, psi0=psi0, psiInf=psiInf,
        Au=A["u"], Av=A["v"], Aubar=A["ubar"], Avbar=A["vbar"], F=F,
    )


def sd_residual(g: GaugeGrid):
    """Max norms of (F_uv, F_uubar + F_vvbar, F_ubarvbar) over interior sites."""
    sl = g.interior

    def mx(a):
        return float(np.abs(a[sl]).max())

    return mx(g.F["uv"]), mx(g.F["uubar"] + g.F["vvbar"]), mx(g.F["ubarvbar"])


def sd_residual_twistor(g: GaugeGrid, z_samples) -> float:
    """Max over sites and z of ||F(X(z), Y(z))|| assembled from stored
    components: F_ubarvbar - z (F_uubar + F_vvbar) + z^2 F_uv."""
    sl = g.interior
    a = g.F["ubarvbar"][sl]
    b = g.F["uubar"][sl] + g.F["vvbar"][sl]
    c = g.F["uv"][sl]
    worst = 0.0
    for z in z_samples:
        zz = as_spectral(z).value
        worst = max(worst, float(np.abs(a - zz * b + zz * zz * c).max()))
    return worst


def yang_residual(J_grid: np.ndarray, spacings) -> float:
    """Max norm of d_u(J_ubar J^{-1}) + d_v(J_vbar J^{-1}) on the doubly
    interior region (nested central differences)."""
    Jinv = inv2(J_grid)
    _, dub, _, dvb = _complex_derivs(J_grid, spacings)
    cur_u = dub @ Jinv
    cur_v = dvb @ Jinv
    du1, _, _, _ = _complex_derivs(cur_u, spacings)
    _, _, dv1, _ = _complex_derivs(cur_v, spacings)
    r = du1 + dv1
    sl = tuple(slice(2, s - 2) for s in J_grid.shape[:4])
    return float(np.abs(r[sl]).max())


def action_density_at(fieldF: PatchingField, x: R4Point, h: float = 1e-2) -> float:
    """|F|^2 at a single point via a local 5^4 stencil of lines."""
    offs = h * np.arange(-2, 3)
    X1 = x.x1 + offs[:, None, None, None]
    X2 = x.x2 + offs[None, :, None, None]
    X3 = x.x3 + offs[None, None, :, None]
    X4 = x.x4 + offs[None, None, None, :]
    U = (X1 + 1j * X2) + 0 * X3 + 0 * X4
    V = (X3 - 1j * X4) + 0 * X1 + 0 * X2
    J = j_field(fieldF, U, V)
    psi0 = herm_sqrt2(J)
    psiInf = inv2(psi0)
    _, F = _connection_curvature(psi0, psiInf, (h, h, h, h))
    dens = action_density_from_F(F)
    return float(dens[2, 2, 2, 2])


def _adaptive_simpson(f, a, b, tol, fa=None, fm=None, fb=None, depth=20):
    fa = f(a) if fa is None else fa
    fb = f(b) if fb is None else fb
    m = 0.5 * (a + b)
    fm = f(m) if fm is None else fm
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4 * frm + fb)
    if depth <= 0 or abs(left + right - whole) < 15 * tol:
        return left + right + (left + right - whole) / 15.0
    return _adaptive_simpson(f, a, m, tol / 2, fa, flm, fm, depth - 1) + _adaptive_simpson(
        f, m, b, tol / 2, fm, frm, fb, depth - 1
    )


def action_integral(
    fieldF: PatchingField,
    quadrature: str = "radial",
    center: R4Point = None,
    radius: float = None,
    grid: GridSpec = None,
    tol: float = 1e-4,
) -> float:
    """Total action int |F|^2 d^4x.

    Radial mode assumes the density is spherically symmetric about `center`
    (exact for a single instanton) and integrates density(r) 2 pi^2 r^3 dr by
    adaptive Simpson, adding an O(r^{-8}) tail estimate.  Lattice mode is a
    plain Riemann sum over `grid` as a slow cross-check."""
    if quadrature == "lattice":
        grid = grid if grid is not None else GridSpec.cube(-2.0, 2.0, 17)
        g = reconstruct_connection(fieldF, grid)
        dens = g.action_density()
        sl = g.interior
        h4 = float(np.prod(grid.spacings))
        return float(dens[sl].sum() * h4)
    if quadrature != "radial":
        raise ValueError("quadrature must be 'radial' or 'lattice'")

    center = center if center is not None else R4Point(0, 0, 0, 0)

    def integrand(r):
        d = action_density_at(fieldF, center.shifted(r + 0j, 0j))
        return d * 2 * np.pi**2 * r**3

    # pick R from the density scale: density(0) = 48/lam_eff^4 for one instanton
    d0 = action_density_at(fieldF, center)
    if d0 <= 0:
        return 0.0
    lam_eff = (48.0 / d0) ** 0.25
    R = radius if radius is not None else max(8.0 * lam_eff, 8.0)
    bulk = _adaptive_simpson(integrand, 0.0, R, tol)
    c_inf = action_density_at(fieldF, center.shifted(R + 0j, 0j)) * R**8
    tail = 2 * np.pi**2 * c_inf / (4 * R**4)
    if tail > 0.1 * abs(bulk):
        raise QuadratureDiverged(f"tail estimate {tail:.3e} exceeds 10% of bulk {bulk:.3e}")
    return float(bulk + tail)


def effective_scale(fieldF: PatchingField, center: R4Point) -> float:
    """Instanton scale from the peak density: density(center) = 48/lam^4."""
    d0 = action_density_at(fieldF, center)
    if d0 <= 0:
        raise QuadratureDiverged("density vanishes at the proposed center")
    return float((48.0 / d0) ** 0.25)


def export_grid_csv(g: GaugeGrid, path):
    """Per-site CSV: coordinates, action density, and the three sd residuals."""
    X1, X2, X3, X4 = g.grid.meshes()
    dens = g.action_density()
    r1 = np.abs(g.F["uv"]).max(axis=(-2, -1))
    r2 = np.abs(g.F["uubar"] + g.F["vvbar"]).max(axis=(-2, -1))
    r3 = np.abs(g.F["ubarvbar"]).max(axis=(-2, -1))
    sl = g.interior
    cols = [X1[sl], X2[sl], X3[sl], X4[sl], dens[sl], r1[sl], r2[sl], r3[sl]]
    flat = [c.ravel() for c in cols]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "x3", "x4", "action_density", "r1", "r2", "r3"])
        for row in zip(*flat):
            w.writerow([f"{val:.17g}" for val in row])


def grid_summary(fieldF: PatchingField, grid: GridSpec, out_json=None):
    """Reconstruct, measure residuals and the lattice action, return and
    optionally write the JSON summary."""
    t0 = time.time()
    g = reconstruct_connection(fieldF, grid)
    r1, r2, r3 = sd_residual(g)
    dens = g.action_density()
    sl = g.interior
    action = float(dens[sl].sum() * np.prod(grid.spacings))
    summary = {
        "action": action,
        "residuals": {"r1": r1, "r2": r2, "r3": r3},
        "grid": grid.to_json(),
        "runtime": time.time() - t0,
    }
    if out_json is not None:
        with open(out_json, "w") as fh:
            json.dump(summary, fh, indent=2)
    return g, summary
