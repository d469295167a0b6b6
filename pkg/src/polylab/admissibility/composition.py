"""Distortion operator functions and the composition-norm inequality for the
inverse of a piecewise-affine homeomorphism."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh import Deformation
from ..tensor import determinant, matrix_norm
from .distortion import ls_norm

REL_SLACK = 1e-10


class NonInvertibleElementError(ValueError):
    def __init__(self, element: int, jacobian: float):
        super().__init__(f"element {element} is not invertible (J = {jacobian:.6g})")
        self.element = element
        self.jacobian = jacobian


def distortion_operator(F, p: float, norm: str = "operator") -> np.ndarray:
    """K_{f,p} = |F| / J^(1/p) on elements with J > 0."""
    J = np.atleast_1d(determinant(F))
    return np.atleast_1d(matrix_norm(F, norm)) / J ** (1.0 / p)


def composition_exponents(n: int, s: float) -> dict:
    """q' = ns/(s-n+1), rho = ns/(n-1), kappa = ns."""
    if not s > n - 1:
        raise ValueError(f"composition check needs s > n-1 = {n - 1}, got {s}")
    return {"q_prime": n * s / (s - n + 1), "rho": n * s / (n - 1), "kappa": n * s}


@dataclass
class CompositionResult:
    lhs: float
    rhs: float
    satisfied: bool
    exponents: dict

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "satisfied": self.satisfied, **self.exponents}


def composition_norm_check(phi: Deformation, s: float, norm: str = "operator") -> CompositionResult:
    """||K_{psi,q'} | L_rho(phi(Omega))|| <= ||K_{phi,n} | L_ns(Omega)||^(n-1) for psi = phi^-1.

    psi is affine on each image element with gradient F^-1 and the image
    element has volume |T| J, so both sides are exact sums.
    """
    eg = phi.element_gradients()
    F, vol = eg.F, eg.volume
    n = phi.mesh.dim
    J = np.atleast_1d(determinant(F))
    bad = np.flatnonzero(J <= 0)
    if len(bad):
        raise NonInvertibleElementError(int(bad[0]), float(J[bad[0]]))
    ex = composition_exponents(n, s)
    K_phi = distortion_operator(F, n, norm)
    rhs = ls_norm(K_phi, vol, ex["kappa"]) ** (n - 1)
    G = np.linalg.inv(F)
    K_psi = distortion_operator(G, ex["q_prime"], norm)
    lhs = ls_norm(K_psi, vol * J, ex["rho"])
    return CompositionResult(lhs, rhs, bool(lhs <= rhs * (1.0 + REL_SLACK)), ex)
