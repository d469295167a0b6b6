"""Fraction-to-boundary step bound from the determinant polynomial of each element."""

from __future__ import annotations

import numpy as np

from ..mesh import Deformation
from ..tensor import adjugate, determinant

STEP_CAP = 1e6
_IMAG_TOL = 1e-9


def det_polynomial(F: np.ndarray, dF: np.ndarray) -> np.ndarray:
    """Coefficients c_0..c_n of det(F + t dF) = sum_k c_k t^k, shape (E, n+1)."""
    n = F.shape[-1]
    c0 = determinant(F)
    c1 = np.einsum("eij,eji->e", adjugate(F), dF)
    if n == 2:
        return np.stack([c0, c1, determinant(dF)], axis=1)
    c2 = np.einsum("eij,eji->e", adjugate(dF), F)
    return np.stack([c0, c1, c2, determinant(dF)], axis=1)


def _smallest_positive_quadratic(c0, c1, c2):
    """Smallest positive real root of c0 + c1 t + c2 t^2 (inf if none)."""
    out = np.full(c0.shape, np.inf)
    lin = c2 == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -c0 / c1
    ok = lin & (c1 != 0) & (t > 0)
    out[ok] = t[ok]
    q = ~lin
    disc = c1 * c1 - 4.0 * c2 * c0
    real = q & (disc >= 0)
    sq = np.sqrt(np.where(real, disc, 0.0))
    # numerically stable pair of roots
    qq = -0.5 * (c1 + np.copysign(sq, c1))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(qq != 0, qq / np.where(c2 != 0, c2, 1.0), np.inf)
        r2 = np.where(qq != 0, c0 / qq, np.inf)
    for r in (r1, r2):
        hit = real & (r > 0) & (r < out)
        out[hit] = r[hit]
    return out


def _smallest_positive_cubic(c: np.ndarray) -> np.ndarray:
    out = np.full(len(c), np.inf)
    cubic = c[:, 3] != 0
    if np.any(~cubic):
        out[~cubic] = _smallest_positive_quadratic(c[~cubic, 0], c[~cubic, 1], c[~cubic, 2])
    if np.any(cubic):
        cc = c[cubic]
        # companion matrix of t^3 + a2 t^2 + a1 t + a0
        a = cc[:, :3] / cc[:, 3:4]
        comp = np.zeros((len(cc), 3, 3))
        comp[:, 1, 0] = comp[:, 2, 1] = 1.0
        comp[:, :, 2] = -a
        roots = np.linalg.eigvals(comp)
        scale = np.maximum(np.abs(roots), 1.0)
        real = np.abs(roots.imag) <= _IMAG_TOL * scale
        r = np.where(real & (roots.real > 0), roots.real, np.inf)
        out[cubic] = r.min(axis=1)
    return out


def smallest_positive_root(coeffs: np.ndarray) -> np.ndarray:
    if coeffs.shape[1] == 3:
        return _smallest_positive_quadratic(coeffs[:, 0], coeffs[:, 1], coeffs[:, 2])
    return _smallest_positive_cubic(coeffs)


def max_feasible_step_from_gradients(F: np.ndarray, dF: np.ndarray, tau: float = 0.9) -> float:
    if not 0 < tau < 1:
        raise ValueError(f"fraction-to-boundary parameter must lie in (0, 1), got {tau}")
    if np.any(determinant(F) <= 0):
        raise ValueError("max_feasible_step needs every element det > 0")
    roots = smallest_positive_root(det_polynomial(F, dF))
    t = float(roots.min()) if len(roots) else np.inf
    return STEP_CAP if not np.isfinite(t) else min(tau * t, STEP_CAP)


def max_feasible_step(phi: Deformation, direction: np.ndarray, tau: float = 0.9) -> float:
    """tau times the smallest positive root of det(F_T + t dF_T) over elements;
    capped at 1e6 when no element can flip along ``direction`` (nodal, (V, n))."""
    mesh = phi.mesh
    F = phi.element_gradients().F
    D = np.asarray(direction, dtype=float)[mesh.elements]
    dDs = np.swapaxes(D[:, 1:] - D[:, :1], 1, 2)
    return max_feasible_step_from_gradients(F, dDs @ mesh.edge_inverses, tau)
