"""Birkhoff factorization of loop matrices on the annulus.

A patching matrix restricted to a line gives a loop G on the unit circle;
this module factors it as G = Psi_inf^{-1} Psi_0 with Psi_0 analytic inside,
Psi_inf analytic outside, normalized so that psi_0 = Psi_0(z = 0) is
hermitian positive definite.  The constant matrices psi_0, psi_inf feed the
connection reconstruction, and the chi functions feed the symmetry flows."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .adhm import PatchingField
from .errors import NontrivialSplittingType, NotReal, PoleOutsideAnnulus
from .geometry import INF_POINT, AnnulusSpec, R4Point, as_spectral

TAIL_TOL = 1e-8
SV_RTOL = 1e-6
RESID_TOL = 1e-8


class LoopMatrix:
    """2x2 matrix function on the annulus, held as circle samples with their
    Fourier coefficients."""

    def __init__(self, samples, spec: AnnulusSpec = None):
        self.samples = np.asarray(samples, dtype=complex)
        n = self.samples.shape[0]
        if self.samples.shape != (n, 2, 2):
            raise ValueError("samples must have shape (n, 2, 2)")
        self.spec = spec if spec is not None else AnnulusSpec(n_samples=n)
        if self.spec.n_samples != n:
            raise ValueError("spec.n_samples disagrees with samples")
        # samples live at z_k = exp(2 pi i k / n), so the z^m coefficient sits
        # at index m of the forward transform divided by n
        self._modes = np.fft.fft(self.samples, axis=0) / n

    @staticmethod
    def from_field(field, x: R4Point, spec: AnnulusSpec = None):
        spec = spec if spec is not None else AnnulusSpec()
        if isinstance(field, PatchingField) and field.modes_fn is not None:
            m = field.modes_fn(np.array([x.u]), np.array([x.v]))[0]
            B = (m.shape[0] - 1) // 2
            return LoopMatrix.from_modes({k - B: m[k] for k in range(m.shape[0])}, spec)
        samples = np.array([field(x, z) for z in spec.circle])
        return LoopMatrix(samples, spec)

    @staticmethod
    def from_modes(mode_dict, spec: AnnulusSpec = None):
        spec = spec if spec is not None else AnnulusSpec()
        n = spec.n_samples
        modes = np.zeros((n, 2, 2), dtype=complex)
        for m, c in mode_dict.items():
            modes[m % n] += np.asarray(c, dtype=complex)
        return LoopMatrix(np.fft.ifft(modes, axis=0) * n, spec)

    @staticmethod
    def constant(mat, spec: AnnulusSpec = None):
        return LoopMatrix.from_modes({0: mat}, spec)

    def mode(self, m) -> np.ndarray:
        """Fourier coefficient of z^m (wraparound indexing)."""
        return self._modes[m % self.spec.n_samples]

    @property
    def fourier(self) -> np.ndarray:
        """Coefficients arranged for modes -n/2 .. n/2 - 1."""
        return np.fft.fftshift(self._modes, axes=0)

    @property
    def mode_index(self) -> np.ndarray:
        n = self.spec.n_samples
        return np.fft.fftshift(np.fft.fftfreq(n, 1.0 / n)).astype(int)

    def tail_norm(self, band=None) -> float:
        """Largest coefficient with |m| above band (default n/4)."""
        n = self.spec.n_samples
        band = n // 4 if band is None else band
        idx = np.abs(np.fft.fftfreq(n, 1.0 / n)) > band
        return float(np.abs(self._modes[idx]).max()) if idx.any() else 0.0

    def side_tail(self, side: str, cutoff=0) -> float:
        """Largest coefficient with m < cutoff ('neg') or m > cutoff ('pos')."""
        mi = np.fft.fftfreq(self.spec.n_samples, 1.0 / self.spec.n_samples)
        idx = mi < cutoff if side == "neg" else mi > cutoff
        return float(np.abs(self._modes[idx]).max()) if idx.any() else 0.0

    def eval(self, z) -> np.ndarray:
        """Laurent evaluation.  On the annulus all stored modes are summed; at
        z = 0 (resp. infinity) the opposite-side tail must vanish."""
        z = as_spectral(z)
        n = self.spec.n_samples
        mi = np.fft.fftfreq(n, 1.0 / n)
        if z.is_infinity or abs(z.value) > 10 * (1 + self.spec.epsilon):
            if self.side_tail("pos") > TAIL_TOL:
                raise PoleOutsideAnnulus("positive modes present; no limit at infinity")
            if z.is_infinity:
                return self.mode(0).copy()
            keep = mi <= 0
        elif abs(z.value) < 0.1 / (1 + self.spec.epsilon):
            if self.side_tail("neg") > TAIL_TOL:
                raise PoleOutsideAnnulus("negative modes present; no limit at 0")
            if z.value == 0:
                return self.mode(0).copy()
            keep = mi >= 0
        else:
            keep = np.ones(n, dtype=bool)
        # away from the circle, |z|^m amplifies round-off in dead modes; drop them
        mag = np.abs(self._modes).max(axis=(1, 2))
        keep = keep & (mag > 1e-13 * max(mag.max(), 1e-300))
        zz = z.value
        pw = zz ** mi[keep]
        return np.einsum("m,mij->ij", pw, self._modes[keep])

    def __call__(self, z):
        return self.eval(z)

    def star(self) -> "LoopMatrix":
        """The loop z -> G(sigma(z))^dagger; on the circle sigma(z) = -z."""
        n = self.spec.n_samples
        rolled = np.roll(self.samples, -n // 2, axis=0)
        return LoopMatrix(np.conj(np.swapaxes(rolled, 1, 2)), self.spec)

    def reality_residual(self) -> float:
        return float(np.abs(self.samples - self.star().samples).max())

    def det_residual(self) -> float:
        d = np.linalg.det(self.samples)
        return float(np.abs(d - 1).max())

    def matmul(self, other: "LoopMatrix") -> "LoopMatrix":
        return LoopMatrix(self.samples @ other.samples, self.spec)

    def to_json(self) -> list:
        return np.stack([self.samples.real, self.samples.imag], axis=-1).tolist()

    @staticmethod
    def from_json(obj, spec: AnnulusSpec = None) -> "LoopMatrix":
        arr = np.asarray(obj, dtype=float)
        return LoopMatrix(arr[..., 0] + 1j * arr[..., 1], spec)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def _herm_sqrt(a):
    """Principal square root of a hermitian positive definite 2x2 matrix."""
    s = np.sqrt(np.linalg.det(a).real)
    t = np.sqrt((a[0, 0] + a[1, 1]).real + 2 * s)
    return (a + s * np.eye(2)) / t


@dataclass
class Splitting:
    """Factorization G = psiInf^{-1} psi0 with the hermitian gauge fixed."""

    psi0: LoopMatrix
    psiInf: LoopMatrix
    psi0_at0: np.ndarray
    psiInf_atInf: np.ndarray
    x: R4Point = None  # base point, when split along a line

    def reconstruction_residual(self, loop: LoopMatrix) -> float:
        rec = np.linalg.solve(self.psiInf.samples, self.psi0.samples)
        return float(np.abs(rec - loop.samples).max())

    def analyticity_tails(self):
        return self.psi0.side_tail("neg"), self.psiInf.side_tail("pos")

    def reality_residual(self) -> float:
        """Residual of Psi_inf = (Psi_0*)^{-1} on the circle."""
        star = self.psi0.star().samples
        return float(np.abs(self.psiInf.samples @ star - np.eye(2)).max())


def birkhoff_split(loop: LoopMatrix, M: int = 32, tol: float = 1e-10) -> Splitting:
    """Factor a real, unimodular loop.

    Solves for the nonpositive modes b_m of Psi_inf (b_0 = Id) by least
    squares, imposing that every negative mode of Psi_inf G vanishes, then
    fixes the constant left freedom so psi_0 is hermitian positive definite
    and det Psi_inf = 1."""
    n = loop.spec.n_samples
    if loop.det_residual() > 1e-8:
        raise NotReal(f"input loop is not unimodular ({loop.det_residual():.2e})")
    M = min(M, n // 2 - 1)

    # product mode p of (sum_m b_m z^m) G: sum_m b_m g_{p-m}.  Unknown blocks
    # b_{-1}..b_{-M}; equations p = -1 .. -n/2; b_0 = Id contributes g_p.
    prows = np.arange(-1, -(n // 2) - 1, -1)
    mcols = np.arange(-1, -M - 1, -1)
    g = lambda m: loop.mode(m)
    A = np.zeros((2 * len(prows), 2 * M), dtype=complex)
    rhs = np.zeros((2 * len(prows), 2), dtype=complex)
    for i, p in enumerate(prows):
        rhs[2 * i : 2 * i + 2] = -g(p).T
        for j, m in enumerate(mcols):
            A[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = g(p - m).T
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0 or sv[-1] < SV_RTOL * sv[0]:
        raise NontrivialSplittingType(
            f"factorization system rank-deficient (sv ratio {sv[-1] / max(sv[0], 1e-300):.2e})"
        )
    bT, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = np.abs(A @ bT - rhs).max()
    if resid > max(RESID_TOL, 100 * tol):
        raise NontrivialSplittingType(
            f"negative modes cannot be cancelled (residual {resid:.2e}); nonzero partial indices"
        )
    if loop.reality_residual() > 1e-8:
        raise NotReal(f"input loop violates G* = G ({loop.reality_residual():.2e})")
    b = bT.reshape(M, 2, 2).transpose(0, 2, 1)

    circle = loop.spec.circle
    powers = circle[:, None] ** (-np.arange(1, M + 1))
    psi_inf_raw = np.eye(2) + np.einsum("zm,mij->zij", powers, b)
    psi0_raw_samples = psi_inf_raw @ loop.samples

    raw0 = np.fft.ifft(psi0_raw_samples, axis=0)[0]
    herm_err = np.abs(raw0 - raw0.conj().T).max()
    if herm_err > 1e-6:
        raise NotReal(f"gauge constant not hermitian ({herm_err:.2e}); input not real")
    h = 0.5 * (raw0 + raw0.conj().T)
    if np.linalg.eigvalsh(h).min() <= 0:
        raise NotReal("gauge constant not positive definite")
    C = np.linalg.inv(_herm_sqrt(h))

    psi_inf = LoopMatrix(C @ psi_inf_raw, loop.spec)
    psi0_samples = C @ psi0_raw_samples
    # zero the numerically-dead negative tail so stored psi0 is exactly analytic
    modes = np.fft.fft(psi0_samples, axis=0) / n
    mi = np.fft.fftfreq(n, 1.0 / n)
    neg = np.abs(modes[mi < 0]).max() if (mi < 0).any() else 0.0
    if neg > max(TAIL_TOL, 100 * tol):
        raise NontrivialSplittingType(f"psi0 negative tail {neg:.2e} after solve")
    modes[mi < 0] = 0
    psi0 = LoopMatrix(np.fft.ifft(modes, axis=0) * n, loop.spec)

    return Splitting(
        psi0=psi0,
        psiInf=psi_inf,
        psi0_at0=psi0.mode(0),
        psiInf_atInf=C,
    )


def j_function(s: Splitting) -> np.ndarray:
    """J = psi_inf^{-1} psi_0; hermitian positive definite with det 1."""
    return np.linalg.inv(s.psiInf_atInf) @ s.psi0_at0


def chi_functions(s: Splitting):
    """chi_0 = psi_0^{-1} Psi_0 and chi_inf = psi_inf^{-1} Psi_inf; both equal
    the identity at their respective normalization points."""
    p0inv = np.linalg.inv(s.psi0_at0)
    pinfinv = np.linalg.inv(s.psiInf_atInf)
    chi0 = LoopMatrix(p0inv @ s.psi0.samples, s.psi0.spec)
    chiInf = LoopMatrix(pinfinv @ s.psiInf.samples, s.psiInf.spec)
    return chi0, chiInf


def split_line(field, x: R4Point, spec: AnnulusSpec = None, M: int = 32) -> Splitting:
    """Build the loop of a patching field on the line over x and factor it."""
    loop = LoopMatrix.from_field(field, x, spec)
    s = birkhoff_split(loop, M=M)
    s.x = x
    return s


def j_on_line(field, x: R4Point, spec: AnnulusSpec = None) -> np.ndarray:
    return j_function(split_line(field, x, spec))
