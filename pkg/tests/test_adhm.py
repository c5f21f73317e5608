import numpy as np
import pytest

from sdymflow.adhm import (
    ADHMData,
    OneInstantonParams,
    closed_form_G,
    closed_form_G_modes,
    lambda_reality_residual,
    line_basis,
    one_instanton_data,
    patching_matrix,
    validate,
)
from sdymflow.errors import PoleAtChartBoundary
from sdymflow.geometry import R4Point


def test_validate_one_instanton(data):
    rep = validate(data)
    assert rep.passed, rep.to_json()


def test_validate_flags_broken_rank(data):
    broken = ADHMData(
        k=1,
        A=[data.A[0], data.A[1], np.zeros_like(data.A[2]), data.A[3]],
        omega=data.omega,
        JV=data.JV,
        JW=data.JW,
    )
    rep = validate(broken)
    names = {c.name: c.passed for c in rep.checks}
    assert not names["A_rank_k"]


def test_patching_invariants(data, rng):
    for _ in range(50):
        x = R4Point(*rng.uniform(-2, 2, size=4))
        z = np.exp(2j * np.pi * rng.random())
        G, _ = patching_matrix(data, x, z)
        assert abs(np.linalg.det(G) - 1) < 1e-10
        Gs, _ = patching_matrix(data, x, -1 / np.conj(z))
        assert np.abs(Gs.conj().T - G).max() < 1e-10


def test_closed_form_matches_numeric(params, data, rng):
    for _ in range(30):
        x = R4Point(*rng.uniform(-2, 2, size=4))
        z = np.exp(2j * np.pi * rng.random())
        G, lam = patching_matrix(data, x, z)
        Gc, lamc = closed_form_G(params, x, z)
        assert np.abs(G - Gc).max() < 1e-10
        assert np.abs(lam.ravel() - lamc).max() < 1e-10


def test_closed_form_pole_guard(params):
    with pytest.raises(PoleAtChartBoundary):
        closed_form_G(params, R4Point(0, 0, 0, 0), 0)


def test_closed_form_modes(params, rng):
    u = rng.normal(size=5) + 1j * rng.normal(size=5)
    v = rng.normal(size=5) + 1j * rng.normal(size=5)
    m = closed_form_G_modes(params, u, v)
    z = 1.1 * np.exp(0.8j)
    for i in range(5):
        x = R4Point.from_complex(u[i], v[i])
        G, _ = closed_form_G(params, x, z)
        rec = m[i, 0] / z + m[i, 1] + m[i, 2] * z
        assert np.abs(rec - G).max() < 1e-12


def test_line_basis_constraints(data, rng):
    for _ in range(10):
        x = R4Point(*rng.uniform(-2, 2, size=4))
        z = np.exp(2j * np.pi * rng.random())
        lb = line_basis(data, x, z)
        om = data.omega
        # (e1, e2) = 1, e_A in the annihilator of U_z, dual w relations
        assert abs(lb.e1 @ om @ lb.e2 - 1) < 1e-9
        assert np.abs(lb.v.T @ om @ lb.e).max() < 1e-9
        assert np.abs(lb.v.T @ om @ lb.w - np.eye(data.k)).max() < 1e-9
        assert np.abs(lb.w.T @ om @ lb.w).max() < 1e-9
        # f expands over {e, v} with the patching coefficients
        G, lam = patching_matrix(data, x, z)
        rec = lb.e @ G.T + lb.v @ lam.T
        assert np.abs(rec - lb.f).max() < 1e-8


def test_paper_k1_basis(rng):
    # e1 = (0, +A4/A1, 1, 0), e2 = (0, -A3/A1, 0, 1) up to the symplectic
    # normalization of e2
    p = OneInstantonParams(1.3, 0.4 - 0.2j, 0.1j)
    data = one_instanton_data(p)
    x = R4Point(0.3, -0.7, 0.4, 0.9)
    z = np.exp(0.5j)
    A1 = p.lam
    A3 = (p.alpha - x.u) - z * (np.conj(p.beta) - np.conj(x.v))
    A4 = (p.beta - x.v) + z * (np.conj(p.alpha) - np.conj(x.u))
    lb = line_basis(data, x, z)
    assert np.abs(lb.e1 - np.array([0, A4 / A1, 1, 0])).max() < 1e-10
    e2_ref = np.array([0, -A3 / A1, 0, 1])
    scale = lb.e2[3]
    assert np.abs(lb.e2 / scale - e2_ref).max() < 1e-10


def test_lambda_reality(params, data, rng):
    for _ in range(5):
        x = R4Point(*rng.uniform(-1, 1, size=4))
        z = np.exp(2j * np.pi * rng.random())
        assert lambda_reality_residual(params, x, z) < 1e-10
        assert lambda_reality_residual(data, x, z) < 1e-10


def test_adhm_json_roundtrip(data, tmp_path):
    path = tmp_path / "adhm.json"
    data.save(path)
    back = ADHMData.load(path)
    assert back.k == data.k
    for a, b in zip(data.A, back.A):
        assert np.abs(a - b).max() == 0
    assert np.abs(back.omega - data.omega).max() == 0


def test_params_guard():
    with pytest.raises(ValueError):
        OneInstantonParams(-1.0)
