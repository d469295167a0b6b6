import math

import numpy as np
import pytest

from polylab.admissibility import (
    affine_map,
    bump_map,
    default_test_functions,
    mesh_sequence,
    minor_pairing,
    minor_weak_continuity_test,
    piola_identity_residual,
    quadratic_map,
)
from polylab.admissibility.quadrature import integrate_per_element
from polylab.mesh import Deformation, unit_cube, unit_square
from polylab.sequences import OscillationFamily


def test_triangle_rule_exact_to_degree_five():
    m = unit_square(3)
    val = integrate_per_element(m, lambda x: x[:, 0] ** 2 * x[:, 1] ** 3).sum()
    assert val == pytest.approx(1.0 / 12.0, rel=1e-13)


def test_tetra_rule_exact_to_degree_three():
    m = unit_cube(2)
    val = integrate_per_element(m, lambda x: x[:, 0] * x[:, 1] * x[:, 2]).sum()
    assert val == pytest.approx(1.0 / 8.0, rel=1e-13)
    val = integrate_per_element(m, lambda x: x[:, 0] ** 3).sum()
    assert val == pytest.approx(0.25, rel=1e-13)


@pytest.mark.parametrize("n", [2, 3])
def test_test_functions_vanish_on_boundary(n):
    x = np.zeros((4, n))
    x[:, 0] = [0.0, 1.0, 0.3, 0.7]
    x[:, 1] = [0.5, 0.5, 0.0, 1.0]
    for th in default_test_functions(n):
        assert np.allclose(th.value(x), 0.0, atol=1e-15)


@pytest.mark.parametrize("make,dim", [(quadratic_map, 2), (bump_map, 2), (bump_map, 3)])
def test_smooth_map_jacobians_match_differences(make, dim):
    fmap = make(dim)
    x = np.random.default_rng(0).random((5, dim))
    h = 1e-6
    D = fmap.Df(x)
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = h
        fd = (fmap.f(x + e) - fmap.f(x - e)) / (2 * h)
        assert np.allclose(D[:, :, j], fd, atol=1e-8)


def test_affine_piola_residual_is_roundoff():
    study = piola_identity_residual(affine_map([[2.0, 0.3], [0.1, 1.0]]), mesh_sequence(2, 2, 4))
    assert max(study.residual) < 1e-13


def test_quadratic_residual_decays_like_h_squared():
    study = piola_identity_residual(quadratic_map(2), mesh_sequence(2, 3, 8))
    for r in study.ratios:
        assert 0.2 < r < 0.3


def test_affine_det_pairing_is_exact():
    th = default_test_functions(2)[0]
    phi = Deformation.affine(unit_square(6), np.diag([2.0, 3.0]))
    # int sin(pi x) sin(pi y) over the unit square is 4 / pi^2
    assert minor_pairing(phi, (0, 1), (0, 1), th) == pytest.approx(6.0 * 4.0 / math.pi**2, rel=1e-4)


def test_oscillation_minors_converge():
    fam = OscillationFamily()
    for rows, cols in [((0,), (0,)), ((1,), (0,)), ((0, 1), (0, 1))]:
        table = minor_weak_continuity_test(fam, rows, cols, ks=(1, 2, 4, 8))
        assert table.converged
        assert table.rel_error[-1] < table.rel_error[0] or table.rel_error[0] < 1e-3
