import numpy as np
import pytest

from polylab.admissibility import PiecewiseConstant, change_of_variable_check, fold_deformation
from polylab.mesh import BoundaryData, Deformation, interpolate_boundary, unit_cube, unit_square


def test_piecewise_constant_lookup():
    u = PiecewiseConstant.grid([0, 0], [2, 2], [[1.0, 2.0], [3.0, 4.0]])
    assert u(np.array([[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [5.0, 5.0]])).tolist() == [1.0, 3.0, 2.0, 0.0]


def test_half_space_identity_gives_overlap_area():
    u = PiecewiseConstant.half_space([0, 0], [1, 1], 0, 0.37)
    r = change_of_variable_check(Deformation.identity(unit_square(5)), u)
    assert r.exact
    assert r.lhs == pytest.approx(0.37, abs=1e-14)
    assert r.rhs == pytest.approx(0.37, abs=1e-14)
    assert r.residual < 1e-10


def test_affine_map_scales_by_jacobian():
    A = np.array([[2.0, 0.5], [0.0, 1.5]])
    u = PiecewiseConstant.constant([-1, -1], [4, 4], 1.0)
    r = change_of_variable_check(Deformation.affine(unit_square(3), A), u)
    assert r.lhs == pytest.approx(3.0, abs=1e-13)
    assert r.residual < 1e-10


def test_fold_counts_overlap_twice():
    u = PiecewiseConstant.constant([-1, -1], [2, 2], 1.0)
    r = change_of_variable_check(fold_deformation(), u)
    # lhs is the total area 1; rhs integrates N = 2 over the lower triangle
    assert r.lhs == pytest.approx(1.0, abs=1e-15)
    assert r.rhs == pytest.approx(1.0, abs=1e-15)


def test_nonaffine_map_with_grid_partition():
    phi = interpolate_boundary(unit_square(8), BoundaryData.twist(0.5))
    values = np.arange(1.0, 26.0).reshape(5, 5)
    r = change_of_variable_check(phi, PiecewiseConstant.grid([-0.25, -0.25], [1.25, 1.25], values))
    assert r.residual < 1e-10


def test_3d_is_flagged_approximate():
    phi = Deformation.affine(unit_cube(2), np.diag([2.0, 1.0, 1.0]))
    r = change_of_variable_check(phi, PiecewiseConstant.constant([-1, -1, -1], [3, 3, 3], 1.0), samples=512)
    assert not r.exact
    assert r.lhs == pytest.approx(2.0, rel=1e-12)
    assert abs(r.rhs - 2.0) <= 5 * max(r.stderr.get("rhs", 0.0), 1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        change_of_variable_check(Deformation.identity(unit_square(2)),
                                 PiecewiseConstant.constant([0, 0, 0], [1, 1, 1]))
