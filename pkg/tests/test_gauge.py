import numpy as np
import pytest

from sdymflow.adhm import OneInstantonParams, PatchingField
from sdymflow.gauge import (
    GridSpec,
    action_density_at,
    action_integral,
    effective_scale,
    j_field,
    reconstruct_connection,
    sd_residual,
    yang_residual,
)
from sdymflow.geometry import R4Point

EXPECTED = 8 * np.pi**2


def test_action_radial_scales():
    for lam in (0.5, 1.0, 2.0):
        field = PatchingField.from_one_instanton(OneInstantonParams(lam))
        a = action_integral(field, center=R4Point(0, 0, 0, 0))
        assert abs(a - EXPECTED) / EXPECTED < 0.01


def test_action_translation_invariance():
    p = OneInstantonParams(1.0, 0.7 - 0.4j, 0.3 + 0.2j)
    field = PatchingField.from_one_instanton(p)
    a = action_integral(field, center=R4Point.from_complex(p.alpha, p.beta))
    assert abs(a - EXPECTED) / EXPECTED < 0.01


def test_density_profile_bpst():
    p = OneInstantonParams(1.0)
    field = PatchingField.from_one_instanton(p)
    for r in (0.0, 0.5, 1.5):
        dens = action_density_at(field, R4Point(r, 0, 0, 0))
        ref = 48.0 / (1 + r * r) ** 4
        assert abs(dens - ref) < 1e-5 * max(1, ref)


def test_effective_scale():
    for lam in (0.7, 1.3):
        field = PatchingField.from_one_instanton(OneInstantonParams(lam))
        assert abs(effective_scale(field, R4Point(0, 0, 0, 0)) - lam) < 1e-5


def test_j_field_matches_line_split(field, rng):
    from sdymflow.rhsplit import j_on_line

    u = rng.normal(size=3) + 1j * rng.normal(size=3)
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    J = j_field(field, u, v)
    for i in range(3):
        ref = j_on_line(field, R4Point.from_complex(u[i], v[i]))
        assert np.abs(J[i] - ref).max() < 1e-10


def test_sd_residual_small_grid(field):
    g = reconstruct_connection(field, GridSpec.cube(-1.0, 1.0, 9))
    r1, r2, r3 = sd_residual(g)
    # r1 and r3 vanish identically for potentials built from psi derivatives
    assert r1 < 1e-12 and r3 < 1e-12
    assert r2 < 0.2


def test_sd_residual_refines(field):
    g9 = reconstruct_connection(field, GridSpec.cube(-1.0, 1.0, 9))
    g17 = reconstruct_connection(field, GridSpec.cube(-1.0, 1.0, 17))
    r9 = sd_residual(g9)[1]
    r17 = sd_residual(g17)[1]
    assert r17 < r9 / 3.5


def test_yang_residual(field):
    grid = GridSpec.cube(-1.0, 1.0, 9)
    X1, X2, X3, X4 = grid.meshes()
    J = j_field(field, X1 + 1j * X2, X3 - 1j * X4)
    assert yang_residual(J, grid.spacings) < 0.2
