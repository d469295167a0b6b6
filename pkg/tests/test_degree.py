import numpy as np
import pytest

from polylab.admissibility import (
    DegenerateConfigurationError,
    banach_indicatrix,
    fold_deformation,
    sense_preserving_check,
    signed_preimage_count,
    topological_degree,
    winding_number,
)
from polylab.admissibility.degree import boundary_distance, region_boundary, vertex_star
from polylab.mesh import BoundaryData, Deformation, interpolate_boundary, unit_cube, unit_square


def test_identity_degree_inside_and_outside():
    phi = Deformation.identity(unit_square(4))
    assert topological_degree(phi, [0.31, 0.42]) == 1
    assert topological_degree(phi, [1.5, 0.5]) == 0
    assert banach_indicatrix(phi, [0.31, 0.42]).value == 1
    assert banach_indicatrix(phi, [1.5, 0.5]).value == 0


def test_vertex_on_query_is_nudged_consistently():
    phi = Deformation.identity(unit_square(4))
    q = banach_indicatrix(phi, [0.5, 0.5])
    assert q.nudged and q.value == 1
    assert signed_preimage_count(phi, [0.5, 0.5]).value == 1


def test_fold_counts():
    phi = fold_deformation()
    y = [0.2, 0.3]
    assert banach_indicatrix(phi, y).value == 2
    assert signed_preimage_count(phi, y).value == 0
    assert winding_number(phi, y) == 0
    assert topological_degree(phi, y) == 0


def test_degree_on_boundary_image_is_degenerate():
    phi = Deformation.identity(unit_square(2))
    with pytest.raises(DegenerateConfigurationError):
        topological_degree(phi, [0.0, 0.3])
    assert boundary_distance(phi, [0.0, 0.3]) == 0.0


def test_region_boundary_of_single_triangle():
    m = unit_square(2)
    facets = region_boundary(m, [0])
    assert facets.shape == (3, 2)


def test_degree_of_vertex_star():
    m = unit_square(4)
    phi = interpolate_boundary(m, BoundaryData.twist(0.6))
    v = int(m.interior_nodes[4])
    star = vertex_star(m, v)
    y = phi.element_images()[star[0]].mean(axis=0)
    assert topological_degree(phi, y, star) == 1


def test_twist_is_sense_preserving():
    phi = interpolate_boundary(unit_square(8), BoundaryData.twist(0.8))
    res = sense_preserving_check(phi, samples=10, seed=3)
    assert res.verdict
    assert all(d == 1 for d in res.degrees)


def test_3d_identity_degree():
    phi = Deformation.identity(unit_cube(2))
    y = [0.3, 0.4, 0.45]
    assert topological_degree(phi, y) == 1
    assert banach_indicatrix(phi, y).value == 1
    assert topological_degree(phi, [1.2, 0.5, 0.5]) == 0


def test_3d_affine_with_reflection_has_degree_minus_one():
    m = unit_cube(1)
    phi = Deformation.affine(m, np.diag([1.0, 1.0, -1.0]))
    y = [0.3, 0.6, -0.4]
    assert topological_degree(phi, y) == -1
    assert banach_indicatrix(phi, y).value == 1
