"""Quaternionic linear-algebra data for instantons, basis construction on
lines, and the resulting transition (patching) matrices.

The rank-k datum consists of four (2k+2) x k matrices A_i, a symplectic form
on V = C^(2k+2), and anti-linear maps sigma_V, sigma_W represented by fixed
matrices applied after complex conjugation.  The k = 1 case is also available
in closed form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLine, PoleAtChartBoundary, ShapeMismatch, SingularSystem
from .geometry import R4Point, SpectralPoint, as_spectral, homogeneous, sigma_c4, sigma_cp1

RANK_RTOL = 1e-8
CHECK_TOL = 1e-10

EPS2 = np.array([[0.0, 1.0], [-1.0, 0.0]])  # eps^{AB}, eps^{12} = 1


@dataclass(frozen=True)
class OneInstantonParams:
    """Scale and center of a single instanton."""

    lam: float
    alpha: complex = 0j
    beta: complex = 0j

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("scale must be positive")

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "alpha": [self.alpha.real, self.alpha.imag],
            "beta": [self.beta.real, self.beta.imag],
        }

    @staticmethod
    def from_json(obj: dict) -> "OneInstantonParams":
        return OneInstantonParams(
            lam=float(obj["lambda"]),
            alpha=complex(*obj.get("alpha", (0.0, 0.0))),
            beta=complex(*obj.get("beta", (0.0, 0.0))),
        )


@dataclass
class ADHMData:
    """Rank-k datum A(z) = sum_i z_i A_i with reality and isotropy structure."""

    k: int
    A: list  # four (2k+2) x k complex matrices
    omega: np.ndarray  # antisymmetric (2k+2) x (2k+2)
    JV: np.ndarray  # sigma_V(v) = JV @ conj(v), JV^2 = -Id
    JW: np.ndarray  # sigma_W(w) = JW @ conj(w), JW^2 = +Id

    def __post_init__(self):
        n = 2 * self.k + 2
        self.A = [np.asarray(a, dtype=complex) for a in self.A]
        self.omega = np.asarray(self.omega, dtype=complex)
        self.JV = np.asarray(self.JV, dtype=float)
        self.JW = np.asarray(self.JW, dtype=float)
        if len(self.A) != 4 or any(a.shape != (n, self.k) for a in self.A):
            raise ShapeMismatch(f"expected four {n}x{self.k} matrices")
        if self.omega.shape != (n, n) or self.JV.shape != (n, n):
            raise ShapeMismatch("omega/JV shape inconsistent with k")
        if self.JW.shape != (self.k, self.k):
            raise ShapeMismatch("JW shape inconsistent with k")

    def A_of(self, zvec) -> np.ndarray:
        zvec = np.asarray(zvec, dtype=complex)
        return sum(zvec[i] * self.A[i] for i in range(4))

    def pair(self, a, b):
        """Symplectic pairing (a, b) = a^T omega b; matrix arguments pair columnwise."""
        return np.asarray(a).T @ self.omega @ np.asarray(b)

    def sigma_V(self, v):
        return self.JV @ np.conj(v)

    def sigma_W(self, w):
        return self.JW @ np.conj(w)

    def to_json(self) -> dict:
        def cplx(m):
            m = np.asarray(m, dtype=complex)
            return np.stack([m.real, m.imag], axis=-1).tolist()

        return {
            "k": self.k,
            "A": [cplx(a) for a in self.A],
            "omega": cplx(self.omega),
            "JV": np.asarray(self.JV).tolist(),
            "JW": np.asarray(self.JW).tolist(),
        }

    @staticmethod
    def from_json(obj: dict) -> "ADHMData":
        def uncplx(m):
            m = np.asarray(m, dtype=float)
            return m[..., 0] + 1j * m[..., 1]

        return ADHMData(
            k=int(obj["k"]),
            A=[uncplx(a) for a in obj["A"]],
            omega=uncplx(obj["omega"]),
            JV=np.asarray(obj["JV"], dtype=float),
            JW=np.asarray(obj["JW"], dtype=float),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @staticmethod
    def load(path) -> "ADHMData":
        with open(path) as fh:
            return ADHMData.from_json(json.load(fh))


def one_instanton_data(p: OneInstantonParams) -> ADHMData:
    """k = 1 datum with A(z) column (lam z1, lam z2, a z1 - conj(b) z2 - z3,
    b z1 + conj(a) z2 - z4)."""
    lam, a, b = p.lam, p.alpha, p.beta
    A1 = np.array([[lam], [0], [a], [b]], dtype=complex)
    A2 = np.array([[0], [lam], [-np.conj(b)], [np.conj(a)]], dtype=complex)
    A3 = np.array([[0], [0], [-1], [0]], dtype=complex)
    A4 = np.array([[0], [0], [0], [-1]], dtype=complex)
    omega = np.array(
        [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], dtype=complex
    )
    JV = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
    JW = np.eye(1)
    return ADHMData(k=1, A=[A1, A2, A3, A4], omega=omega, JV=JV, JW=JW)


@dataclass
class ValidationCheck:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tol


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, name, residual, tol=CHECK_TOL):
        self.checks.append(ValidationCheck(name, float(residual), tol))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> list:
        return [
            {"name": c.name, "residual": c.residual, "tol": c.tol, "passed": c.passed}
            for c in self.checks
        ]


def validate(data: ADHMData, n_samples: int = 20, rng=None) -> ValidationReport:
    """Evaluate every structural condition on the datum at random samples.

    Returns a report; it does not raise on failed conditions."""
    rng = np.random.default_rng(rng if rng is not None else 0)
    n = 2 * data.k + 2
    rep = ValidationReport()

    rep.add("omega_antisymmetric", np.abs(data.omega + data.omega.T).max())
    sv = np.linalg.svd(data.omega, compute_uv=False)
    nondeg = 0.0 if sv[0] > 0 and sv[-1] > RANK_RTOL * sv[0] else 1.0
    rep.add("omega_nondegenerate", nondeg, tol=0.5)
    rep.add("JV_squares_to_minus_id", np.abs(data.JV @ data.JV + np.eye(n)).max())
    rep.add("JW_squares_to_id", np.abs(data.JW @ data.JW - np.eye(data.k)).max())

    def cvec(m):
        return rng.standard_normal(m) + 1j * rng.standard_normal(m)

    r = 0.0
    for _ in range(n_samples):
        uu, vv = cvec(n), cvec(n)
        r = max(r, abs(data.pair(data.sigma_V(uu), data.sigma_V(vv)) - np.conj(data.pair(uu, vv))))
    rep.add("sigma_compatibility", r)

    r = 0.0
    for _ in range(n_samples):
        z, w = cvec(4), cvec(data.k)
        lhs = data.sigma_V(data.A_of(z) @ w)
        rhs = data.A_of(sigma_c4(z)) @ data.sigma_W(w)
        r = max(r, np.abs(lhs - rhs).max())
    rep.add("A_reality", r)

    rank_fail = 0.0
    directions = [np.eye(4)[i] for i in range(4)] + [cvec(4) for _ in range(n_samples)]
    for z in directions:
        Az = data.A_of(z)
        s = np.linalg.svd(Az, compute_uv=False)
        if s[0] == 0 or s[-1] <= RANK_RTOL * s[0]:
            rank_fail = 1.0
    rep.add("A_rank_k", rank_fail, tol=0.5)

    r = 0.0
    for _ in range(n_samples):
        z, a, b = cvec(4), cvec(data.k), cvec(data.k)
        Az = data.A_of(z)
        r = max(r, abs(data.pair(Az @ a, Az @ b)))
    rep.add("isotropy", r)
    return rep


@dataclass
class LineBasis:
    """Bases for the 2-dimensional quotient on a line point, plus the spanning
    and dual vectors of the image subspace."""

    e1: np.ndarray
    e2: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    v: np.ndarray  # (2k+2) x k, columns span U_z
    w: np.ndarray  # (2k+2) x k dual vectors
    lambdaAi: np.ndarray  # 2 x k expansion coefficients from the patching solve

    @property
    def e(self):
        return np.stack([self.e1, self.e2], axis=1)

    @property
    def f(self):
        return np.stack([self.f1, self.f2], axis=1)


def _e_basis(data: ADHMData, zvec: np.ndarray):
    """Deterministic complement basis e_A of U_z inside its annihilator.

    Seeds are the last two standard basis vectors; the seed constraint
    violation is corrected on k fixed standard directions (slots k..2k-1,
    generalizing the rank-one construction that divides by the first
    component block), with a pivoted fallback when that block degenerates."""
    k = data.k
    n = 2 * k + 2
    V = data.A_of(zvec)  # columns v_i
    scale = np.abs(V).max()
    if scale == 0:
        raise DegenerateLine("A(z) vanished")

    pairings = V.T @ data.omega  # row i = (v_i, .)

    seeds = np.eye(n)[:, [n - 2, n - 1]]
    slots = list(range(k, 2 * k))
    M = pairings[:, slots]
    sM = np.linalg.svd(M, compute_uv=False)
    if sM[-1] <= RANK_RTOL * max(sM[0], scale):
        # fall back to column-pivoted slot selection over the first 2k slots
        P = pairings[:, : 2 * k]
        slots = sorted(_greedy_pivots(P, k))
        M = pairings[:, slots]
        sM = np.linalg.svd(M, compute_uv=False)
        if sM[-1] <= RANK_RTOL * max(sM[0], scale):
            raise DegenerateLine("no full-rank correction block at this z")

    rhs = pairings @ seeds  # (k, 2)
    coeff = np.linalg.solve(M, rhs)
    e = seeds - np.eye(n)[:, slots] @ coeff

    p = e[:, 0] @ data.omega @ e[:, 1]
    if abs(p) < 1e-12:
        raise DegenerateLine("degenerate symplectic pairing of complement basis")
    e[:, 1] = e[:, 1] / p
    return e[:, 0], e[:, 1], V


def _greedy_pivots(P, k):
    """Column indices chosen by Gram-Schmidt with largest-residual pivoting."""
    P = P.astype(complex).copy()
    chosen = []
    for _ in range(k):
        norms = np.linalg.norm(P, axis=0)
        j = int(np.argmax(norms))
        if norms[j] == 0:
            break
        chosen.append(j)
        q = P[:, j] / norms[j]
        P -= np.outer(q, np.conj(q) @ P)
        P[:, j] = 0
    return chosen


def _w_vectors(data: ADHMData, V, e1, e2):
    """Dual vectors w^i with (v_i, w^j) = delta, (w^i, w^j) = 0, (w^i, e_A) = 0."""
    k = data.k
    rows = np.vstack([V.T @ data.omega, e1 @ data.omega, e2 @ data.omega])
    rhs = np.vstack([np.eye(k), np.zeros((2, k))])
    wt, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    S = wt.T @ data.omega @ wt  # (w~^i, w~^j), antisymmetric
    w = wt + V @ (-0.5 * S)
    return w


def line_basis(data: ADHMData, x: R4Point, z) -> LineBasis:
    """Bases e_A, f_A, v_i, w^i at the point of L_x with spectral parameter z.

    f_A is built from e_A at the antipodal point via f_A = -delta_AB eps^BC
    sigma_V(e_C(sigma(z)))."""
    z = as_spectral(z)
    zvec = homogeneous(x, z)
    e1, e2, V = _e_basis(data, zvec)

    zs = sigma_cp1(z)
    if zs.is_infinity:
        zvec_s = sigma_c4(zvec)
        es1, es2, _ = _e_basis(data, zvec_s)
    else:
        es1, es2, _ = _e_basis(data, homogeneous(x, zs))
    # f_A = -delta_AB eps^BC sigma_V(e_C(sigma z)): f_1 = -sigma_V(e_2), f_2 = +sigma_V(e_1)
    f1 = -data.sigma_V(es2)
    f2 = data.sigma_V(es1)

    w = _w_vectors(data, V, e1, e2)
    lb = LineBasis(e1=e1, e2=e2, f1=f1, f2=f2, v=V, w=w, lambdaAi=np.zeros((2, data.k), dtype=complex))
    G, lam = _expand_f(data, lb)
    lb.lambdaAi = lam
    return lb


def _expand_f(data: ADHMData, lb: LineBasis):
    """Solve f_A = G_A^B e_B + lambda_A^i v_i in the full basis {e, v, w}."""
    k = data.k
    B = np.hstack([lb.e, lb.v, lb.w])
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise SingularSystem("basis matrix numerically singular")
    coeff = np.linalg.solve(B, lb.f)  # (2k+2, 2); column A = coeffs of f_A
    wcomp = np.abs(coeff[2 + k :, :]).max()
    if wcomp > 1e-8 * max(1.0, np.abs(coeff).max()):
        raise SingularSystem(f"f_A acquired dual-vector components ({wcomp:.2e})")
    G = coeff[:2, :].T  # G[A, B]
    lam = coeff[2 : 2 + k, :].T  # lam[A, i]
    return G, lam


def patching_matrix(data: ADHMData, x: R4Point, z):
    """Transition matrix G and coefficients lambda_A^i at (x, z).

    det G = 1 and G* = G hold wherever the construction succeeds."""
    lb = line_basis(data, x, z)
    G, lam = _expand_f(data, lb)
    return G, lam


def _k1_line_values(p: OneInstantonParams, x: R4Point, z: complex):
    """A_i restricted to L_x in the z1 = 1 chart, as scalars."""
    u, v = x.u, x.v
    A1 = p.lam + 0j
    A2 = p.lam * z
    A3 = (p.alpha - u) - z * (np.conj(p.beta) - np.conj(v))
    A4 = (p.beta - v) + z * (np.conj(p.alpha) - np.conj(u))
    return A1, A2, A3, A4


def closed_form_G(p: OneInstantonParams, x: R4Point, z):
    """Rank-one closed form of the patching matrix and lambda on a line.

    Has the explicit 1/z pole, so z must avoid 0 and infinity."""
    z = as_spectral(z)
    if z.is_infinity or z.value == 0:
        raise PoleAtChartBoundary("closed form has poles at z = 0, infinity")
    A1, A2, A3, A4 = _k1_line_values(p, x, z.value)
    den = A1 * A2
    G = np.array(
        [
            [1 + A3 * A4 / den, A4 * A4 / den],
            [-A3 * A3 / den, 1 - A3 * A4 / den],
        ]
    )
    lam = np.array([-A4 / den, A3 / den])
    return G, lam


def closed_form_G_modes(p: OneInstantonParams, u, v):
    """Laurent modes (m = -1, 0, 1) of the k = 1 patching matrix on lines.

    u, v are broadcastable complex arrays; returns shape (..., 3, 2, 2)."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    a3 = p.alpha - u
    b3 = np.conj(v) - np.conj(p.beta)
    a4 = p.beta - v
    b4 = np.conj(p.alpha) - np.conj(u)
    # G = I + (col row)/(lam^2 z), col = (A4, -A3), row = (A3, A4), A3 = a3+b3 z
    col0 = np.stack([a4, -a3], axis=-1)
    col1 = np.stack([b4, -b3], axis=-1)
    row0 = np.stack([a3, a4], axis=-1)
    row1 = np.stack([b3, b4], axis=-1)
    outer = lambda c, r: c[..., :, None] * r[..., None, :]
    il2 = 1.0 / p.lam**2
    m_m1 = il2 * outer(col0, row0)
    m_0 = il2 * (outer(col0, row1) + outer(col1, row0)) + np.eye(2)
    m_p1 = il2 * outer(col1, row1)
    return np.stack([m_m1, m_0, m_p1], axis=-3)


class PatchingField:
    """A map (x, z) -> SL2 matrix, holomorphic in the incidence coordinates.

    `modes_fn(u, v)`, when available, returns the Laurent modes on the line
    over x for a batch of points and enables the fast grid pipeline."""

    def __init__(self, evaluator, provenance="synthetic", modes_fn=None, bandwidth=None):
        self.evaluator = evaluator
        self.provenance = provenance
        self.modes_fn = modes_fn
        self.bandwidth = bandwidth

    def __call__(self, x: R4Point, z):
        return np.asarray(self.evaluator(x, z), dtype=complex)

    @staticmethod
    def from_one_instanton(p: OneInstantonParams) -> "PatchingField":
        def ev(x, z):
            return closed_form_G(p, x, z)[0]

        return PatchingField(
            ev,
            provenance="closed-form-k1",
            modes_fn=lambda u, v: closed_form_G_modes(p, u, v),
            bandwidth=1,
        )

    @staticmethod
    def from_adhm(data: ADHMData) -> "PatchingField":
        def ev(x, z):
            return patching_matrix(data, x, z)[0]

        return PatchingField(ev, provenance="from-ADHM")

    @staticmethod
    def identity() -> "PatchingField":
        return PatchingField(
            lambda x, z: np.eye(2, dtype=complex),
            provenance="synthetic",
            modes_fn=lambda u, v: np.broadcast_to(
                np.eye(2, dtype=complex), np.broadcast(u, v).shape + (1, 2, 2)
            ).copy(),
            bandwidth=0,
        )


def star_matrix(G_fn, x: R4Point, z):
    """G*(x, z) = G(x, sigma(z))^dagger for a plain matrix evaluator."""
    return np.asarray(G_fn(x, sigma_cp1(z)), dtype=complex).conj().T


def lambda_reality_residual(data_or_params, x: R4Point, z) -> float:
    """Residual of the reality relation tying lambda at sigma(z) to G lambda at z."""
    z = as_spectral(z)
    if isinstance(data_or_params, OneInstantonParams):
        G, lam = closed_form_G(data_or_params, x, z)
        _, lam_s = closed_form_G(data_or_params, x, sigma_cp1(z))
    else:
        G, lam = patching_matrix(data_or_params, x, z)
        _, lam_s = patching_matrix(data_or_params, x, sigma_cp1(z))
    lam = np.atleast_2d(lam).reshape(2, -1)
    lam_s = np.atleast_2d(lam_s).reshape(2, -1)
    # conj(lambda_A^i(sigma z)) = delta_AB G_C^B eps^CD lambda_D^i(z), stated in
    # homogeneous scaling; in the z1 = 1 chart the two sides differ by -z
    rhs = -z.value * (G.T @ (EPS2 @ lam))
    return float(np.abs(np.conj(lam_s) - rhs).max())
