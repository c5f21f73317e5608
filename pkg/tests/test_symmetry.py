import numpy as np
import pytest

from sdymflow.adhm import OneInstantonParams, PatchingField
from sdymflow.errors import PoleOutsideAnnulus
from sdymflow.gauge import action_density_at
from sdymflow.geometry import INF_POINT, AnnulusSpec, R4Point
from sdymflow.rhsplit import LoopMatrix, split_line
from sdymflow.symmetry import (
    TwistorPoly,
    appendix_h0_verify,
    eval_T,
    eval_T_batch,
    expm2,
    g_flow_exp,
    g_flow_infinitesimal,
    gdot_consistency,
    integrate_flow,
    j_dot,
    j_dot_field,
    linearisation_residual,
    T_star,
)

E = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
T_zE = TwistorPoly([(0, 0, 1, E)])
T_mix = TwistorPoly(
    [
        (1, 0, -1, np.array([[0.3, 0.1], [0.0, -0.3]])),
        (0, 1, 0, np.array([[0.0, 0.2j], [0.1, 0.0]])),
        (0, 0, 0, np.array([[0.05, 0.0], [0.3, -0.05]])),
    ]
)


def test_eval_T_spec_example():
    # T = z E at z = 2 evaluates to [[0, 2], [0, 0]] regardless of x
    out = eval_T(T_zE, R4Point(0.3, -0.7, 0.4, 0.9), 2.0)
    assert np.abs(out - np.array([[0, 2], [0, 0]])).max() < 1e-14


def test_eval_T_pole_guards():
    with pytest.raises(PoleOutsideAnnulus):
        eval_T(TwistorPoly([(0, 0, -1, E)]), R4Point(0, 0, 0, 0), 0)
    with pytest.raises(PoleOutsideAnnulus):
        eval_T(T_zE, R4Point(0, 0, 0, 0), INF_POINT)


def test_eval_T_batch_matches_scalar(rng):
    x = R4Point(0.3, -0.7, 0.4, 0.9)
    zs = np.exp(2j * np.pi * rng.random(8))
    for T in (T_zE, T_mix):
        batch = eval_T_batch(T, x.u, x.v, zs)
        for i, z in enumerate(zs):
            assert np.abs(batch[i] - eval_T(T, x, z)).max() < 1e-13


def test_T_star_definition():
    x = R4Point(0.2, 0.5, -0.1, 0.3)
    z = np.exp(0.4j)
    ref = eval_T(T_mix, x, -1 / np.conj(z)).conj().T
    assert np.abs(T_star(T_mix, x, z) - ref).max() < 1e-13


def test_twistor_poly_json_roundtrip(tmp_path):
    path = tmp_path / "T.json"
    T_mix.save(path)
    back = TwistorPoly.load(path)
    x = R4Point(0.1, 0.2, 0.3, 0.4)
    assert np.abs(eval_T(back, x, 1.05) - eval_T(T_mix, x, 1.05)).max() < 1e-14


def test_expm2_exponential(rng):
    for _ in range(10):
        M = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        e = expm2(M)
        # series check and inverse check
        series = np.eye(2)
        term = np.eye(2)
        for k in range(1, 30):
            term = term @ M / k
            series = series + term
        assert np.abs(e - series).max() < 1e-10
        assert np.abs(e @ expm2(-M) - np.eye(2)).max() < 1e-10


def test_g_flow_exp_preserves_reality_det(field, rng):
    flowed = g_flow_exp(T_zE, 0.2, field)
    for _ in range(10):
        x = R4Point(*rng.uniform(-1.5, 1.5, size=4))
        z = np.exp(2j * np.pi * rng.random())
        G = flowed(x, z)
        assert abs(np.linalg.det(G) - 1) < 1e-10
        Gs = flowed(x, -1 / np.conj(z)).conj().T
        assert np.abs(Gs - G).max() < 1e-10


def test_one_sided_gauge_action_invariance(field):
    # a holomorphic change of basis on one side leaves the observables alone
    h = TwistorPoly([(0, 0, 0, np.array([[0.1, 0.05], [0.0, -0.1]]))])

    def ev(x, z):
        g = expm2(eval_T(h, x, z))
        gs = expm2(eval_T(h, x, -1 / np.conj(complex(z)))).conj().T
        return g @ field(x, z) @ gs

    dressed = PatchingField(ev)
    x = R4Point(0.4, -0.2, 0.3, 0.6)
    d0 = action_density_at(field, x)
    d1 = action_density_at(dressed, x)
    assert abs(d0 - d1) < 1e-6 * max(1.0, abs(d0))


def test_j_dot_forms_agree(field, rng):
    for _ in range(3):
        x = R4Point(*rng.normal(size=4))
        s = split_line(field, x)
        jd = j_dot(T_zE, 1.05, s)
        jb = j_dot_field(T_zE, 1.05, field, np.array([x.u]), np.array([x.v]))[0]
        assert np.abs(jd - jb).max() < 1e-10


def test_linearisation_convergence(field):
    from sdymflow.gauge import GridSpec, j_field

    res = []
    for n in (9, 17):
        g = GridSpec.cube(-0.2, 0.2, n)
        X1, X2, X3, X4 = g.meshes()
        U, V = X1 + 1j * X2, X3 - 1j * X4
        J = j_field(field, U, V)
        Jd = j_dot_field(T_zE, 1.0, field, U, V)
        res.append(linearisation_residual(J, Jd, g.spacings))
    assert res[1] < res[0] / 3.0


def test_integrate_flow_remark45():
    # alpha(t) = (1 - t^2)^{-1/2} [[1, t/z], [t z, 1]] solves
    # alpha-dot = d alpha with the generator (1 - t^2)^{-1} [[0, 1/z], [z, 0]]
    def d_fn(t, x, zarr):
        f = 1.0 / (1 - t * t)
        out = np.zeros((len(zarr), 2, 2), dtype=complex)
        out[:, 0, 1] = 1.0 / zarr
        out[:, 1, 0] = zarr
        return f * out

    st = integrate_flow(d_fn, PatchingField.identity(), 0.5, steps=64)
    z = AnnulusSpec().circle
    al = st.alpha_loop(R4Point(0, 0, 0, 0)).samples
    f = (1 - 0.25) ** -0.5
    ref = np.zeros_like(al)
    ref[:, 0, 0] = ref[:, 1, 1] = f
    ref[:, 0, 1] = f * 0.5 / z
    ref[:, 1, 0] = f * 0.5 * z
    assert np.abs(al - ref).max() < 1e-9
    assert st.det_residual(R4Point(0, 0, 0, 0)) < 1e-10


def test_appendix_h0(field):
    x = R4Point(0.2, -0.1, 0.15, 0.05)
    s = split_line(field, x)
    rep = appendix_h0_verify(T_zE, 1.05, s, field, x)
    assert rep["passed"], rep


def test_gdot_consistency_crane(field):
    rep = gdot_consistency(T_zE, field, R4Point(0.2, -0.1, 0.15, 0.05))
    assert rep["passed"], rep


def test_gdot_consistency_with_rho_dressing(field):
    # G(t) = e^{-tT} e^{t rho_inf} G e^{t rho_0} e^{-tT*} must still mode-split
    rho_inf = np.array([[0.2, 0.0], [0.1, -0.2]])
    rho_0 = np.array([[0.0, 0.3], [0.0, 0.0]])
    x = R4Point(0.3, 0.1, -0.2, 0.4)

    def provider(t):
        def ev(xx, z):
            zz = complex(z)
            g = expm2(-t * eval_T(T_zE, xx, zz)) @ expm2(t * rho_inf)
            gs = expm2(t * rho_0) @ expm2(-t * T_star(T_zE, xx, zz))
            return g @ field(xx, zz) @ gs

        return PatchingField(ev)

    rep = gdot_consistency(T_zE, field, x, flowed_provider=provider)
    assert rep["raw_difference"] > 1e-2  # the rho terms are really there
    assert rep["passed"], rep


def test_g_flow_infinitesimal_shape(field):
    x = R4Point(0.1, 0.2, 0.3, 0.4)
    z = np.exp(0.3j)
    G = field(x, z)
    out = g_flow_infinitesimal(T_zE, G, x, z)
    ref = -eval_T(T_zE, x, z) @ G - G @ T_star(T_zE, x, z)
    assert np.abs(out - ref).max() < 1e-14
