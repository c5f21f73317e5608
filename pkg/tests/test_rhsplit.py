import numpy as np
import pytest

from sdymflow.adhm import OneInstantonParams, PatchingField
from sdymflow.errors import NontrivialSplittingType, NotReal
from sdymflow.geometry import AnnulusSpec, R4Point
from sdymflow.rhsplit import (
    LoopMatrix,
    birkhoff_split,
    chi_functions,
    j_function,
    j_on_line,
    split_line,
)


def loop_from_fn(fn, spec=None):
    spec = spec or AnnulusSpec()
    return LoopMatrix(np.array([fn(z) for z in spec.circle]), spec)


def test_identity_splits_trivially():
    s = birkhoff_split(loop_from_fn(lambda z: np.eye(2)))
    assert np.abs(j_function(s) - np.eye(2)).max() < 1e-12


def test_oracle_line():
    # frozen oracle: lam = 1, (u, v) = (1, 0) gives J = diag(2, 1/2)
    field = PatchingField.from_one_instanton(OneInstantonParams(1.0))
    J = j_on_line(field, R4Point(1.0, 0.0, 0.0, 0.0))
    assert np.abs(J - np.diag([2.0, 0.5])).max() < 1e-10


def test_split_invariants_random_lines(field, rng):
    for _ in range(20):
        x = R4Point(*rng.uniform(-2, 2, size=4))
        loop = LoopMatrix.from_field(field, x)
        s = split_line(field, x)
        assert s.reconstruction_residual(loop) < 1e-10
        assert max(s.analyticity_tails()) < 1e-10
        assert s.reality_residual() < 1e-10
        J = j_function(s)
        assert np.abs(J - J.conj().T).max() < 1e-10
        assert abs(np.linalg.det(J) - 1) < 1e-10


def test_nontrivial_type_detected():
    # G = diag(z, 1/z) has nonzero partial indices; the spec fixes this error
    # over the (also violated) reality condition
    with pytest.raises(NontrivialSplittingType):
        birkhoff_split(loop_from_fn(lambda z: np.diag([z, 1 / z])))


def test_not_real_detected():
    bad = loop_from_fn(lambda z: np.array([[1.0, 0.3 + 0.1 * z], [0, 1.0]]))
    with pytest.raises(NotReal):
        birkhoff_split(bad)


def test_non_unimodular_detected():
    with pytest.raises(NotReal):
        birkhoff_split(loop_from_fn(lambda z: 2 * np.eye(2)))


def test_chi_normalization(field, rng):
    x = R4Point(*rng.uniform(-1, 1, size=4))
    s = split_line(field, x)
    chi0, chiInf = chi_functions(s)
    assert np.abs(chi0.mode(0) - np.eye(2)).max() < 1e-10
    # chi_inf(inf) = Id: its z^0 Fourier mode is the value at infinity
    assert np.abs(chiInf.mode(0) - np.eye(2)).max() < 1e-10


def test_modes_fast_path_agrees(field, params, rng):
    x = R4Point(*rng.uniform(-1, 1, size=4))
    slow = PatchingField(lambda xx, z: field(xx, z))
    J_fast = j_on_line(field, x)
    J_slow = j_on_line(slow, x)
    assert np.abs(J_fast - J_slow).max() < 1e-10


def test_loop_mode_orientation():
    spec = AnnulusSpec()
    loop = loop_from_fn(lambda z: np.array([[1.0, 1 / z], [0, 1.0]]), spec)
    assert np.abs(loop.mode(-1) - np.array([[0, 1], [0, 0]])).max() < 1e-12
    assert np.abs(loop.mode(1)).max() < 1e-12
