"""Non-local symmetry flows of the patching matrix.

T-functions are finite sums of monomials in the incidence coordinates and z,
so holomorphicity on the annulus is automatic.  The module provides the
infinitesimal and exponentiated action on G, the induced J-flow and its
linearisation check, Runge-Kutta integration of deformation flows, and the
two contour-identity verifications from the appendix analysis."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .adhm import PatchingField
from .errors import PoleOutsideAnnulus, QuadratureTail, StepFailure
from .geometry import AnnulusSpec, R4Point, as_spectral, sigma_cp1
from .rhsplit import LoopMatrix, Splitting, birkhoff_split, chi_functions, j_function

FD_T_STEP = 1e-5


@dataclass
class TwistorPoly:
    """T(x, z) = sum coeff * w1^p w2^q z^m with w1 = u - z conj(v),
    w2 = v + z conj(u).  Annihilated by X(z) and Y(z) term by term."""

    terms: list  # of (p, q, m, coeff 2x2)

    def __post_init__(self):
        self.terms = [
            (int(p), int(q), int(m), np.asarray(c, dtype=complex)) for p, q, m, c in self.terms
        ]
        for p, q, m, c in self.terms:
            if p < 0 or q < 0:
                raise ValueError("w-powers must be nonnegative")
            if c.shape != (2, 2):
                raise ValueError("coefficients must be 2x2")

    def to_json(self) -> list:
        return [
            {
                "p": p,
                "q": q,
                "m": m,
                "coeff": np.stack([c.real, c.imag], axis=-1).tolist(),
            }
            for p, q, m, c in self.terms
        ]

    @staticmethod
    def from_json(obj) -> "TwistorPoly":
        terms = []
        for t in obj:
            c = np.asarray(t["coeff"], dtype=float)
            terms.append((t["p"], t["q"], t["m"], c[..., 0] + 1j * c[..., 1]))
        return TwistorPoly(terms)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @staticmethod
    def load(path) -> "TwistorPoly":
        with open(path) as fh:
            return TwistorPoly.from_json(json.load(fh))

    @staticmethod
    def zero() -> "TwistorPoly":
        return TwistorPoly([])

    def scaled(self, c) -> "TwistorPoly":
        return TwistorPoly([(p, q, m, c * co) for p, q, m, co in self.terms])


def eval_T(T: TwistorPoly, x: R4Point, z) -> np.ndarray:
    """Evaluate T at (x, z), including the limits at z = 0 and infinity."""
    z = as_spectral(z)
    u, v = x.u, x.v
    out = np.zeros((2, 2), dtype=complex)
    if z.is_infinity:
        for p, q, m, c in T.terms:
            deg = m + p + q
            if deg > 0:
                raise PoleOutsideAnnulus(f"term (p={p}, q={q}, m={m}) diverges at infinity")
            if deg == 0:
                out += c * (-np.conj(v)) ** p * np.conj(u) ** q
        return out
    zz = z.value
    if zz == 0 and any(m < 0 for _, _, m, _ in T.terms):
        raise PoleOutsideAnnulus("negative z-power at z = 0")
    w1 = u - zz * np.conj(v)
    w2 = v + zz * np.conj(u)
    for p, q, m, c in T.terms:
        out += c * w1**p * w2**q * zz**m
    return out


def eval_T_batch(T: TwistorPoly, u, v, z) -> np.ndarray:
    """Vectorized evaluation over broadcastable complex arrays u, v, z."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    z = np.asarray(z, dtype=complex)
    w1 = u - z * np.conj(v)
    w2 = v + z * np.conj(u)
    shape = np.broadcast(u, v, z).shape
    out = np.zeros(shape + (2, 2), dtype=complex)
    for p, q, m, c in T.terms:
        out += (w1**p * w2**q * z**m)[..., None, None] * c
    return out


def T_star(T: TwistorPoly, x: R4Point, z) -> np.ndarray:
    """T*(x, z) = T(x, sigma(z))^dagger."""
    return eval_T(T, x, sigma_cp1(z)).conj().T


def T_star_batch(T: TwistorPoly, u, v, z) -> np.ndarray:
    zs = -1.0 / np.conj(np.asarray(z, dtype=complex))
    m = eval_T_batch(T, u, v, zs)
    return np.conj(np.swapaxes(m, -1, -2))


def g_flow_infinitesimal(T: TwistorPoly, G: np.ndarray, x: R4Point, z) -> np.ndarray:
    """Gdot = -T G - G T* at a point."""
    Tz = eval_T(T, x, z)
    Ts = T_star(T, x, z)
    return -Tz @ G - G @ Ts


def expm2(M: np.ndarray) -> np.ndarray:
    """Exponential of a 2x2 matrix via the traceless closed form."""
    M = np.asarray(M, dtype=complex)
    tr = np.trace(M, axis1=-2, axis2=-1)
    M0 = M - 0.5 * tr[..., None, None] * np.eye(2)
    s2 = -np.linalg.det(M0)  # M0^2 = s2 * Id
    s = np.sqrt(s2 + 0j)
    small = np.abs(s) < 1e-8
    sinhc = np.where(small, 1.0 + s2 / 6.0, np.sinh(s) / np.where(small, 1.0, s))
    cosh = np.cosh(s)
    out = cosh[..., None, None] * np.eye(2) + sinhc[..., None, None] * M0
    return np.exp(0.5 * tr)[..., None, None] * out


def g_flow_exp(T: TwistorPoly, t: float, fieldG: PatchingField) -> PatchingField:
    """New patching field g G g* with g = exp(-t T)."""

    def ev(x, z):
        g = expm2(-t * eval_T(T, x, z))
        gs = expm2(-t * T_star(T, x, z))
        return g @ np.asarray(fieldG(x, z), dtype=complex) @ gs

    modes_fn = None
    bandwidth = None
    if fieldG.modes_fn is not None and all(
        p == 0 and q == 0 and m == 0 for p, q, m, _ in T.terms
    ):
        # constant T: g is z- and x-independent, so the bandwidth is preserved
        const = sum((c for _, _, _, c in T.terms), np.zeros((2, 2), dtype=complex))
        g = expm2(-t * const)
        gs = expm2(-t * const.conj().T)

        def modes_fn(u, v, _g=g, _gs=gs):
            m = fieldG.modes_fn(u, v)
            return _g @ m @ _gs

        bandwidth = fieldG.bandwidth
    return PatchingField(ev, provenance="flowed", modes_fn=modes_fn, bandwidth=bandwidth)


def j_dot(T: TwistorPoly, spectral_lambda, s: Splitting, x: R4Point = None) -> np.ndarray:
    """Jdot at one x from the splitting there, computed in both displayed
    forms; they must agree to 1e-10."""
    lam = as_spectral(spectral_lambda)
    x = x if x is not None else getattr(s, "x", None)
    if x is None:
        raise ValueError("need the base point x (pass x= or use split_line)")
    lam_s = sigma_cp1(lam)
    Tl = eval_T(T, x, lam)
    J = j_function(s)

    chi0, chiInf = chi_functions(s)
    ci = chiInf.eval(lam)
    c0 = chi0.eval(lam_s)
    form1 = ci @ Tl @ np.linalg.inv(ci) @ J + J @ c0 @ Tl.conj().T @ np.linalg.inv(c0)

    Pi = s.psiInf.eval(lam)
    P0 = s.psi0.eval(lam_s)
    alpha = Pi @ Tl @ np.linalg.inv(Pi)
    alpha_d = P0 @ Tl.conj().T @ np.linalg.inv(P0)
    form2 = np.linalg.inv(s.psiInf_atInf) @ (alpha + alpha_d) @ s.psi0_at0

    if np.abs(form1 - form2).max() > 1e-8:
        raise ValueError(
            f"the two Jdot forms disagree ({np.abs(form1 - form2).max():.2e})"
        )
    return form1


def j_dot_field(T: TwistorPoly, spectral_lambda, fieldG: PatchingField, u, v):
    """Batched Jdot over line centers for bandwidth-one fields.

    Uses the closed split Psi_inf = I + b/z, so chi_inf(lam) = I + b/lam and
    chi_0(sigma lam) = J^{-1} (I + b/(sigma lam)) G(sigma lam)."""
    from .kernels import inv2, j_from_modes
    from .kernels.numpy_backend import _b_minus1

    lam = as_spectral(spectral_lambda).value
    lam_s = sigma_cp1(lam).value
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    m = fieldG.modes_fn(u, v)
    gm1, g0, gp1 = m[..., 0, :, :], m[..., 1, :, :], m[..., 2, :, :]
    b = _b_minus1(gm1, g0)
    J = g0 + b @ gp1
    Tl = eval_T_batch(T, u, v, np.full(u.shape, lam))
    W = np.eye(2) + b / lam
    a1 = W @ Tl @ inv2(W)
    Ws = np.eye(2) + b / lam_s
    Gs = gm1 / lam_s + g0 + gp1 * lam_s
    P = inv2(J) @ Ws @ Gs
    Tld = np.conj(np.swapaxes(Tl, -1, -2))
    a2 = P @ Tld @ inv2(P)
    return a1 @ J + J @ a2


def linearisation_residual(J_grid: np.ndarray, Jdot_grid: np.ndarray, spacings) -> float:
    """Max norm of d_u(J d_ubar(J^{-1} Jdot) J^{-1}) + d_v(J d_vbar(...) J^{-1})
    on the doubly interior region, by nested central differences."""
    from .kernels import inv2

    Jinv = inv2(J_grid)
    core = Jinv @ Jdot_grid

    def cd(f, axis, h):
        out = np.zeros_like(f)
        sl_p = [slice(None)] * f.ndim
        sl_m = [slice(None)] * f.ndim
        sl_c = [slice(None)] * f.ndim
        sl_p[axis] = slice(2, None)
        sl_m[axis] = slice(0, -2)
        sl_c[axis] = slice(1, -1)
        out[tuple(sl_c)] = (f[tuple(sl_p)] - f[tuple(sl_m)]) / (2 * h)
        return out

    def dubar(f):
        return 0.5 * (cd(f, 0, spacings[0]) + 1j * cd(f, 1, spacings[1]))

    def dvbar(f):
        return 0.5 * (cd(f, 2, spacings[2]) - 1j * cd(f, 3, spacings[3]))

    def du(f):
        return 0.5 * (cd(f, 0, spacings[0]) - 1j * cd(f, 1, spacings[1]))

    def dv(f):
        return 0.5 * (cd(f, 2, spacings[2]) + 1j * cd(f, 3, spacings[3]))

    term_u = du(J_grid @ dubar(core) @ Jinv)
    term_v = dv(J_grid @ dvbar(core) @ Jinv)
    r = term_u + term_v
    sl = tuple(slice(2, s - 2) for s in J_grid.shape[:4])
    return float(np.abs(r[sl]).max())


@dataclass
class FlowState:
    """Integrated flow alpha(t) with its base field; G(t) = alpha G0 alpha*."""

    t: float
    G0: PatchingField
    d_fn: object  # d(t, x, z_array) -> (n, 2, 2)
    steps: int
    spec: AnnulusSpec = field(default_factory=AnnulusSpec)
    error_estimate: float = 0.0
    _cache: dict = field(default_factory=dict)

    def alpha_loop(self, x: R4Point) -> LoopMatrix:
        key = (x.x1, x.x2, x.x3, x.x4)
        if key not in self._cache:
            self._cache[key] = LoopMatrix(
                _rk4_alpha(self.d_fn, x, self.t, self.steps, self.spec.circle), self.spec
            )
        return self._cache[key]

    def field(self) -> PatchingField:
        def ev(x, z):
            al = self.alpha_loop(x)
            a = al.eval(z)
            a_star = al.eval(sigma_cp1(z)).conj().T
            return a @ np.asarray(self.G0(x, z), dtype=complex) @ a_star

        return PatchingField(ev, provenance="flowed")

    def det_residual(self, x: R4Point) -> float:
        d = np.linalg.det(self.alpha_loop(x).samples)
        return float(np.abs(d - 1).max())


def _rk4_alpha(d_fn, x, t_end, steps, circle):
    al = np.broadcast_to(np.eye(2, dtype=complex), (len(circle), 2, 2)).copy()
    h = t_end / steps
    t = 0.0
    for _ in range(steps):
        k1 = d_fn(t, x, circle) @ al
        k2 = d_fn(t + h / 2, x, circle) @ (al + h / 2 * k1)
        k3 = d_fn(t + h / 2, x, circle) @ (al + h / 2 * k2)
        k4 = d_fn(t + h, x, circle) @ (al + h * k3)
        al = al + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return al


def integrate_flow(
    d_fn, G0: PatchingField, t_end: float, steps: int = 64,
    spec: AnnulusSpec = None, probe: R4Point = None, tol: float = 1e-6,
) -> FlowState:
    """Integrate alpha-dot = d alpha by classical RK4 per z-sample.

    The step count is validated by halving at a probe point; StepFailure if
    the estimate stays above tol at the step-count ceiling."""
    spec = spec if spec is not None else AnnulusSpec()
    probe = probe if probe is not None else R4Point(0.1, -0.2, 0.3, 0.05)
    circle = spec.circle
    while True:
        a1 = _rk4_alpha(d_fn, probe, t_end, steps, circle)
        a2 = _rk4_alpha(d_fn, probe, t_end, 2 * steps, circle)
        err = float(np.abs(a1 - a2).max())
        if err <= tol:
            break
        steps *= 2
        if steps > 65536:
            raise StepFailure(f"RK4 error estimate {err:.2e} above {tol:.0e} at ceiling")
    return FlowState(t=t_end, G0=G0, d_fn=d_fn, steps=2 * steps, spec=spec, error_estimate=err)


def _split_loops(fieldG, x, spec, M=32):
    loop = LoopMatrix.from_field(fieldG, x, spec)
    s = birkhoff_split(loop, M=M)
    s.x = x
    return loop, s


def appendix_h0_verify(
    T: TwistorPoly,
    spectral_lambda,
    s: Splitting,
    fieldG: PatchingField,
    x: R4Point,
    delta: float = FD_T_STEP,
    tol: float = 1e-6,
) -> dict:
    """Full-pipeline check of the h0 construction along the exponentiated flow.

    h0 is assembled from the finite-difference chi_0-dot via the rearranged
    flow equation.  For the flow G(t) = exp(-tT) G exp(-tT*) the logarithmic
    derivative of Psi_0 is the nonnegative-mode projection of -(alpha + beta),
    with alpha = PsiInf T PsiInf^{-1} and beta = Psi0 T* Psi0^{-1}, so h0 has
    the closed analytic form

        h0 = -Psi0^{-1} [ P_{>=1}(alpha+beta) + z/(lam-z)(alpha(lam)-alpha)
                          - z lam-bar/(1+z lam-bar)(alpha(lam)^dag - beta) ] Psi0

    where the Cauchy projections onto the contours gamma_pm are realized as
    Fourier-mode truncations.  The report carries the maximal deviation of the
    finite-difference h0 from this prediction, the resulting negative-mode tail
    once the lambda-pole terms are subtracted, and the raw negative tail of
    h0 + z lam-bar/(1+z lam-bar) T* - z/(lam-z) G^{-1}TG for reference (the
    latter carries the unremovable pole-at-sigma(lambda) term)."""
    lam = as_spectral(spectral_lambda)
    lam_v = lam.value
    if lam_v is None or abs(abs(lam_v) - 1) > 0.5:
        raise PoleOutsideAnnulus("spectral lambda must lie near the unit circle")
    spec = s.psi0.spec
    circle = spec.circle
    lam_s = sigma_cp1(lam).value

    loop = LoopMatrix.from_field(fieldG, x, spec)
    chi0_c, _ = chi_functions(s)

    chi_pm = []
    for sgn in (+1, -1):
        _, s_t = _split_loops(g_flow_exp(T, sgn * delta, fieldG), x, spec)
        c0_t, _ = chi_functions(s_t)
        chi_pm.append(c0_t.samples)
    chidot = (chi_pm[0] - chi_pm[1]) / (2 * delta)

    P0 = s.psi0.samples
    P0_inv = np.linalg.inv(P0)
    Pi_lam = s.psiInf.eval(lam)
    T_lam = eval_T(T, x, lam)
    alpha_lam = Pi_lam @ T_lam @ np.linalg.inv(Pi_lam)
    P0_lam_s = s.psi0.eval(lam_s)
    alpha_lam_d = P0_lam_s @ T_lam.conj().T @ np.linalg.inv(P0_lam_s)

    Pi_samples = s.psiInf.samples
    Tz = eval_T_batch(T, x.u, x.v, circle)
    alpha_z = Pi_samples @ Tz @ np.linalg.inv(Pi_samples)
    Tsz = T_star_batch(T, x.u, x.v, circle)
    beta_z = P0 @ Tsz @ P0_inv

    ab = LoopMatrix(alpha_z + beta_z, spec)
    ab_tail = ab.tail_norm()
    if ab_tail > 1e-8 * max(1.0, float(np.abs(ab.samples).max())):
        raise QuadratureTail(f"alpha+beta Fourier tail {ab_tail:.2e} not converged")
    mi = ab.mode_index
    four = ab.fourier.copy()
    four[mi < 1] = 0.0
    p_pos = LoopMatrix.from_modes(
        {int(m): four[i] for i, m in enumerate(mi) if m >= 1}, spec
    ).samples

    z = circle[:, None, None]
    f1 = z / (lam_v - z)
    f2 = z * np.conj(lam_v) / (1 + z * np.conj(lam_v))

    h0_fd = (
        np.linalg.inv(chi0_c.samples) @ chidot
        - f1 * (P0_inv @ (alpha_lam - alpha_z) @ P0)
        + f2 * (P0_inv @ (alpha_lam_d - beta_z) @ P0)
    )
    h0_pred = -(
        P0_inv
        @ (p_pos + f1 * (alpha_lam - alpha_z) - f2 * (alpha_lam_d - beta_z))
        @ P0
    )
    scale = max(1.0, float(np.abs(h0_fd).max()))
    prop_a1_residual = float(np.abs(h0_fd - h0_pred).max()) / scale

    G = loop.samples
    Ginv = np.linalg.inv(G)
    rho0_raw = h0_fd - f1 * (Ginv @ Tz @ G) + f2 * Tsz
    obstruction = -f1 * (P0_inv @ alpha_lam @ P0) + f2 * (P0_inv @ alpha_lam_d @ P0)
    raw_tail = LoopMatrix(rho0_raw, spec).side_tail("neg")
    resid_tail = LoopMatrix(rho0_raw - obstruction, spec).side_tail("neg")
    obstruction_tail = LoopMatrix(obstruction, spec).side_tail("neg")

    h0_loop = LoopMatrix(h0_fd, spec)
    rscale = (1 + spec.epsilon / 2.0) ** np.abs(h0_loop.mode_index.astype(float))
    four_h0 = h0_loop.fourier
    h0_inf_norm = float(
        sum(np.abs(four_h0[i]).max() * rscale[i] for i in range(len(rscale)) if h0_loop.mode_index[i] < 0)
    )
    h0_0_norm = float(
        sum(np.abs(four_h0[i]).max() for i in range(len(rscale)) if h0_loop.mode_index[i] >= 0)
    )

    return {
        "lambda": lam_v,
        "h0_scale": float(np.abs(h0_fd).max()),
        "prop_a1_residual": prop_a1_residual,
        "rho0_negative_tail": resid_tail / scale,
        "rho0_raw_negative_tail": raw_tail / scale,
        "obstruction_negative_tail": obstruction_tail / scale,
        "h0_projection_norms": {"inner": h0_0_norm, "outer": h0_inf_norm},
        "passed": bool(prop_a1_residual < tol and resid_tail / scale < tol),
    }


def gdot_consistency(
    T: TwistorPoly,
    fieldG: PatchingField,
    x: R4Point,
    delta: float = FD_T_STEP,
    M: int = 16,
    spec: AnnulusSpec = None,
    flowed_provider=None,
    tol: float = 1e-6,
) -> dict:
    """Check that the finite-difference Gdot minus (-TG - GT*) splits as
    rho_inf G + G rho_0 with one-sided-analytic rho's (least-squares in
    Fourier modes)."""
    spec = spec if spec is not None else AnnulusSpec()
    circle = spec.circle
    loop = LoopMatrix.from_field(fieldG, x, spec)
    G = loop.samples

    provider = flowed_provider or (lambda t: g_flow_exp(T, t, fieldG))
    Gp = LoopMatrix.from_field(provider(delta), x, spec).samples
    Gm = LoopMatrix.from_field(provider(-delta), x, spec).samples
    Gdot = (Gp - Gm) / (2 * delta)

    Tz = eval_T_batch(T, x.u, x.v, circle)
    Tsz = T_star_batch(T, x.u, x.v, circle)
    D = Gdot - (-Tz @ G - G @ Tsz)

    n = len(circle)
    nun = 2 * (M + 1)  # unknown blocks: rho_inf m=0..-M, rho_0 m=0..M
    A = np.zeros((4 * n, 4 * nun), dtype=complex)
    rhs = D.reshape(-1)
    eye = np.eye(2)
    for k, zk in enumerate(circle):
        Gk = G[k]
        row = 4 * k
        for mm in range(M + 1):
            # rho_inf block: (r G)_{ij} = sum_a r_{ia} G_{aj}
            col = 4 * mm
            w = zk ** (-mm)
            for i in range(2):
                for j in range(2):
                    for a in range(2):
                        A[row + 2 * i + j, col + 2 * i + a] += w * Gk[a, j]
            # rho_0 block: (G r)_{ij} = sum_a G_{ia} r_{aj}
            col = 4 * (M + 1 + mm)
            w = zk**mm
            for i in range(2):
                for j in range(2):
                    for a in range(2):
                        A[row + 2 * i + j, col + 2 * a + j] += w * Gk[i, a]
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = float(np.abs(A @ sol - rhs).max())
    scale = max(1.0, float(np.abs(Gdot).max()))
    return {
        "raw_difference": float(np.abs(D).max()),
        "mode_split_residual": resid,
        "mode_split_residual_rel": resid / scale,
        "passed": bool(resid / scale < tol),
    }
