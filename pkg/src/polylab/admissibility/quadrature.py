"""Fixed simplex quadrature rules in barycentric coordinates (weights sum to 1)."""

from __future__ import annotations

from itertools import permutations

import numpy as np

from ..mesh import SimplicialMesh


def _orbit(*coords):
    return sorted(set(permutations(coords)))


def _triangle_rule():
    # 7-point rule, exact for polynomials of degree 5
    a1, b1, w1 = 0.059715871789769820, 0.47014206410511509, 0.13239415278850619
    a2, b2, w2 = 0.79742698535308731, 0.10128650732345633, 0.12593918054482715
    pts = [(1 / 3, 1 / 3, 1 / 3)] + _orbit(a1, b1, b1) + _orbit(a2, b2, b2)
    wts = [0.225] + [w1] * 3 + [w2] * 3
    return np.array(pts), np.array(wts)


def _tetra_rule():
    # 5-point rule, exact for polynomials of degree 3 (one negative weight)
    pts = [(0.25,) * 4] + _orbit(0.5, 1 / 6, 1 / 6, 1 / 6)
    wts = [-0.8] + [0.45] * 4
    return np.array(pts), np.array(wts)


RULES = {2: _triangle_rule(), 3: _tetra_rule()}


def quadrature_points(mesh: SimplicialMesh):
    """Physical points (E, Q, n) and weights (E, Q) including element volumes."""
    lam, w = RULES[mesh.dim]
    X = mesh.vertices[mesh.elements]
    pts = np.einsum("qk,ekd->eqd", lam, X)
    return pts, mesh.volumes[:, None] * w[None, :]


def integrate_per_element(mesh: SimplicialMesh, f) -> np.ndarray:
    """Per-element integrals of f(points) -> (..., E, Q) values."""
    pts, wts = quadrature_points(mesh)
    vals = np.asarray(f(pts.reshape(-1, mesh.dim)), dtype=float)
    vals = vals.reshape(vals.shape[:-1] + wts.shape) if vals.ndim > 1 else vals.reshape(wts.shape)
    return np.sum(vals * wts, axis=-1)
