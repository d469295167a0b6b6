import numpy as np
import pytest

from polylab.energy import DetOnly, SaintVenantKirchhoff, w1, w2
from polylab.verify import (
    check_barrier_condition,
    check_coercivity_sampled,
    check_convexity_sampled,
    check_polyconvexity_sampled,
    random_rotations,
    sample_matrices,
)


def test_rotations_are_proper():
    Q = random_rotations(np.random.default_rng(0), 50, 3)
    assert np.allclose(Q @ np.swapaxes(Q, 1, 2), np.eye(3), atol=1e-12)
    assert np.allclose(np.linalg.det(Q), 1.0)


def test_sampled_matrices_have_positive_det():
    F = sample_matrices(np.random.default_rng(0), 200, 3)
    assert np.all(np.linalg.det(F) > 0)


@pytest.mark.parametrize("W", [w1(), w2(), DetOnly()], ids=["w1", "w2", "det"])
def test_polyconvex_representatives_pass(W):
    assert check_polyconvexity_sampled(W, 1000, seed=0).status == "pass"


def test_svk_polyconvexity_not_applicable():
    assert check_polyconvexity_sampled(SaintVenantKirchhoff(), 10).status == "not-applicable"


def test_det_is_not_convex():
    v = check_convexity_sampled(DetOnly(), 1000, seed=0, n=2)
    assert v.status == "violation"
    F1, F2 = np.array(v.witness["F1"]), np.array(v.witness["F2"])
    mid = np.linalg.det(0.5 * (F1 + F2))
    assert mid > 0.5 * (np.linalg.det(F1) + np.linalg.det(F2))


def test_barrier_verdicts():
    assert check_barrier_condition(w1()).status == "holds"
    assert check_barrier_condition(w2()).status == "fails"


def test_coercivity_verdicts():
    # sum sigma^3 >= |F|_F^3 / sqrt(3), so alpha = 0.5 is admissible for W2
    assert check_coercivity_sampled(w2(), 0.5, 2.0, 0.0, 1000, 0, 3).status == "no-violation"
    assert check_coercivity_sampled(DetOnly(), 0.5, 2.0, 0.0, 1000, 0, 3).status == "violation"


def test_coercivity_witness_is_genuine():
    v = check_coercivity_sampled(DetOnly(), 0.5, 2.0, 0.0, 200, 0, 3)
    F = np.array(v.witness["F"])
    bound = 0.5 * (np.linalg.norm(F) ** 3 + np.linalg.det(F) ** 2)
    assert np.linalg.det(F) < bound


def test_coercivity_rejects_bad_exponent():
    with pytest.raises(ValueError):
        check_coercivity_sampled(w2(), 1.0, 1.0)
