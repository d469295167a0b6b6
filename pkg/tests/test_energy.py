import numpy as np
import pytest

from polylab.energy import DetOnly, EnergyDomainError, SaintVenantKirchhoff, make_energy, w1, w2
from polylab.verify import sample_matrices

# Closed-form values worked out by hand (sum of singular-value powers, Adj F
# singular values, volumetric terms).
W_AT = [
    ("w1", np.eye(2), 6.0),
    ("w1", np.eye(3), 8.0),
    ("w1", np.diag([2.0, 1.0]), 38.001953125),
    ("w2", np.eye(2), 3.0),
    ("w2", np.eye(3), 4.0),
    ("w2", np.diag([2.0, 1.0]), 13.0),
    ("svk", np.eye(2), 0.0),
    ("svk", 0.1 * np.eye(2), 0.9801),
    ("det_only", np.diag([2.0, 3.0]), 6.0),
]


@pytest.mark.parametrize("kind,F,value", W_AT)
def test_closed_form_values(kind, F, value):
    assert make_energy(kind).eval(F) == pytest.approx(value, rel=1e-14, abs=1e-14)


def test_w1_rejects_degenerate_det():
    with pytest.raises(EnergyDomainError):
        w1().eval(np.diag([1.0, 0.0]))
    with pytest.raises(EnergyDomainError):
        w1().eval(np.diag([-1.0, 1.0]))


def test_w2_finite_at_zero_det():
    assert w2().eval(np.diag([1.0, 0.0])) == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [dict(p=3.0), dict(r=1.0), dict(s=2.0), dict(a=0.0)])
def test_w1_parameter_ranges(bad):
    with pytest.raises(ValueError):
        w1(**bad)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_energy("neo_hookean")


def _fd_grad(W, F, h=1e-6):
    G = np.zeros_like(F)
    for i in range(F.shape[0]):
        for j in range(F.shape[1]):
            E = np.zeros_like(F)
            E[i, j] = h
            G[i, j] = (W.eval(F + E) - W.eval(F - E)) / (2 * h)
    return G


@pytest.mark.parametrize("kind", ["w1", "w2", "svk", "det_only"])
@pytest.mark.parametrize("n", [2, 3])
def test_gradient_matches_central_differences(kind, n):
    W = make_energy(kind)
    rng = np.random.default_rng(7)
    for F in sample_matrices(rng, 20, n, 0.5, 2.0):
        G = W.grad(F)
        fd = _fd_grad(W, F)
        assert np.abs(G - fd).max() <= 1e-5 * max(1.0, np.abs(fd).max())


def test_batched_eval_matches_loop():
    W = w1()
    F = sample_matrices(np.random.default_rng(3), 10, 3, 0.5, 2.0)
    assert np.allclose(W.eval(F), [W.eval(f) for f in F], rtol=1e-14)


def test_g_form_on_graph_reproduces_w():
    from polylab.tensor import adjugate, determinant

    F = sample_matrices(np.random.default_rng(5), 10, 3, 0.3, 3.0)
    for W in (w1(), w2(), DetOnly()):
        assert np.allclose(W.g_form(F, adjugate(F), determinant(F)), W.eval(F), rtol=1e-12)


def test_svk_has_no_g_form():
    assert not SaintVenantKirchhoff().has_g_form


def test_describe_lists_parameters():
    d = w2(a=2.0).describe()
    assert d["kind"] == "w2" and d["a"] == [2.0] and d["r"] == 2.0
