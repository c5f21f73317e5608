import numpy as np
import pytest

from sdymflow.adhm import OneInstantonParams, one_instanton_data, patching_matrix
from sdymflow.deform import (
    ADHMFamily,
    NotInduced,
    Scaling,
    absorb_holomorphic,
    affine_family,
    classify_flow,
    d_general,
    d_param_k1,
    decompose_coeffs,
    family_from_config,
    fit_coeffs,
    gdot_residual,
    remark45_family,
    scaling_family,
    scaling_flow,
    tangent_generator,
)
from sdymflow.errors import BlowupReached, FitResidualTooLarge, PoleAtChartBoundary
from sdymflow.geometry import R4Point
from sdymflow.symmetry import T_star, eval_T


def smooth_family():
    return ADHMFamily(
        lambda t: OneInstantonParams(
            1.0 + 0.3 * np.sin(t), 0.2 * t + 0.1j * t**2, -0.1 * t + 0.25j * np.sin(2 * t)
        )
    )


FAMILIES = [scaling_family(1.0, 1.0), affine_family(1.0, dalpha=1.0), smooth_family()]


def test_stationary_family_zero():
    fam = ADHMFamily(lambda t: OneInstantonParams(1.0, 0.2, -0.1j))
    d = d_param_k1(fam, 0.0, R4Point(0.5, 0.1, -0.3, 0.2), np.exp(0.3j))
    assert np.abs(d).max() < 1e-10
    c = decompose_coeffs(fam, 0.0)
    assert all(np.abs(c.get(n)).max() < 1e-10 for n in
               ("cA", "cB", "cC", "cD", "cE", "cF", "cG", "cH", "cI", "cJ"))


def test_d_param_pole_guard():
    with pytest.raises(PoleAtChartBoundary):
        d_param_k1(FAMILIES[0], 0.0, R4Point(0, 0, 0, 0), 0)


def test_d_param_scaling_example():
    # lam0 = 1, flow_k = 1, t = 0: d = (1/2)[(w1^2/z)(0 0;1 0)
    # + (w1 w2/z)diag(-1,1) + (w2^2/z)(0 -1;0 0)]
    fam = scaling_family(1.0, 1.0)
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = R4Point(*rng.normal(size=4))
        z = np.exp(2j * np.pi * rng.random())
        w1 = x.u - z * np.conj(x.v)
        w2 = x.v + z * np.conj(x.u)
        ref = 0.5 * (
            (w1**2 / z) * np.array([[0, 0], [1, 0]])
            + (w1 * w2 / z) * np.diag([-1.0, 1.0])
            + (w2**2 / z) * np.array([[0, -1], [0, 0]])
        )
        assert np.abs(d_param_k1(fam, 0.0, x, z) - ref).max() < 1e-12


@pytest.mark.parametrize("fam", FAMILIES)
def test_d_general_matches_k1(fam, rng):
    for _ in range(5):
        x = R4Point(*rng.normal(size=4))
        z = np.exp(2j * np.pi * rng.random())
        t = 0.1 * rng.random()
        d1 = d_param_k1(fam, t, x, z)
        d2, prm = d_general(fam, t, x, z)
        assert np.abs(d1 - d2).max() < 1e-8
        assert prm.consistent, prm.consistency


@pytest.mark.parametrize("fam", FAMILIES)
def test_gdot_identity(fam, rng):
    for _ in range(4):
        x = R4Point(*rng.normal(size=4))
        z = np.exp(2j * np.pi * rng.random())
        assert gdot_residual(fam, 0.05, x, z) < 1e-6


def test_decompose_scaling_example():
    c = decompose_coeffs(scaling_family(1.0, 1.0), 0.0)
    assert np.abs(c.cA - 0.5 * np.array([[0, 0], [1, 0]])).max() < 1e-12
    assert np.abs(c.cB - 0.5 * np.diag([-1.0, 1.0])).max() < 1e-12
    assert np.abs(c.cC - 0.5 * np.array([[0, -1], [0, 0]])).max() < 1e-12
    for n in ("cD", "cE", "cF", "cG", "cH", "cI", "cJ"):
        assert np.abs(c.get(n)).max() < 1e-12


def test_decompose_affine_example():
    c0 = decompose_coeffs(affine_family(1.0, dalpha=1.0), 0.0)
    assert abs(c0.cE[0, 0] + 1.0) < 1e-12
    c3 = decompose_coeffs(affine_family(1.0, dalpha=1.0), 0.3)
    assert abs(c3.cJ[0, 1] - 0.3) < 1e-10  # conj(alpha) alpha-dot grows with t


def test_fit_rejects_wrong_coeffs():
    fam = scaling_family(1.0, 1.0)
    ref = decompose_coeffs(fam, 0.0, verify=False)
    bad = decompose_coeffs(affine_family(1.0, dalpha=1.0), 0.0, verify=False)
    with pytest.raises(FitResidualTooLarge):
        fit_coeffs(lambda x, z: d_param_k1(fam, 0.0, x, z), reference=bad)
    # and accepts the right ones
    fit_coeffs(lambda x, z: d_param_k1(fam, 0.0, x, z), reference=ref)


def test_absorb_holomorphic_remark45():
    fam = remark45_family()
    d0 = absorb_holomorphic(decompose_coeffs(fam, 0.3))
    x = R4Point(0.5, -0.2, 0.1, 0.7)
    z = 1.1 * np.exp(0.4j)
    ref = (1 - 0.09) ** -1.5 * np.array([[0, 0], [z, 0]], dtype=complex)
    assert np.abs(d0.eval(x, z) - ref).max() < 1e-8


def test_classify_scaling():
    v = classify_flow(scaling_family(1.0, 1.0), [0.0, 0.1, 0.2])
    assert isinstance(v, Scaling)
    assert abs(v.flow_k - 1.0) < 1e-8


def test_classify_translation():
    v = classify_flow(affine_family(1.0, dalpha=1.0), [0.0, 0.1, 0.2])
    assert isinstance(v, NotInduced)
    assert v.witness == "cJ"


def test_classify_remark45():
    v = classify_flow(remark45_family(), [0.0, 0.2, 0.4])
    assert isinstance(v, NotInduced)


def test_classify_needs_samples():
    with pytest.raises(ValueError):
        classify_flow(scaling_family(1.0, 1.0), [0.0, 0.1])


def test_scaling_flow_values():
    assert scaling_flow(1.0, 1.0, 0.0) == 1.0
    assert abs(scaling_flow(1.0, 1.0, 0.75) - 2.0) < 1e-12
    h = 1e-6
    fd = (scaling_flow(1.0, 1.0, h) - scaling_flow(1.0, 1.0, -h)) / (2 * h)
    assert abs(fd - 0.5) < 1e-6
    with pytest.raises(BlowupReached):
        scaling_flow(1.0, 1.0, 1.0)


def test_tangent_generator_scaling():
    T = tangent_generator(scaling_family(1.0, 1.0))
    x = R4Point(0.4, 0.1, -0.3, 0.2)
    z = np.exp(0.6j)
    ref = -d_param_k1(scaling_family(1.0, 1.0), 0.0, x, z)
    assert np.abs(eval_T(T, x, z) - ref).max() < 1e-12


def test_tangent_generator_gdot_match(rng):
    for i in range(3):
        fam = affine_family(
            1.0,
            rng.normal(),
            rng.normal() + 1j * rng.normal(),
            rng.normal() + 1j * rng.normal(),
        )
        T = tangent_generator(fam, rng=i)
        h = 1e-5
        for _ in range(3):
            x = R4Point(*rng.normal(size=4))
            z = np.exp(2j * np.pi * rng.random())
            Gp, _ = patching_matrix(one_instanton_data(fam.k1_params(h)), x, z)
            Gm, _ = patching_matrix(one_instanton_data(fam.k1_params(-h)), x, z)
            G, _ = patching_matrix(one_instanton_data(fam.k1_params(0.0)), x, z)
            pred = -eval_T(T, x, z) @ G - G @ T_star(T, x, z)
            assert np.abs((Gp - Gm) / (2 * h) - pred).max() < 1e-6


def test_family_config_parsing():
    fam = family_from_config({"type": "scaling", "lam0": 1.0, "flow_k": 1.0})
    assert abs(fam.k1_params(0.75).lam - 2.0) < 1e-12
    fam = family_from_config({"type": "affine", "lam0": 1.0, "dalpha": [1.0, 0.5]})
    assert fam.k1_params(1.0).alpha == 1.0 + 0.5j
    fam = family_from_config({"type": "remark45"})
    assert fam.is_dmap
    with pytest.raises(ValueError):
        family_from_config({"type": "nope"})
