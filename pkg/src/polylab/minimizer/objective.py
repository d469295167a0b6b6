"""Augmented discrete objective and its nodal gradient.

Per element T with gradient F_T:

    |T| * [ W(F_T) - eps * log det F_T + psi(K_T - M_T, lam_T) ] (+ |T| Theta(x_T, y_T))

where psi is the Powell-Hestenes-Rockafellar term for the inequality
K <= M: psi(g, lam) = (max(0, lam + 2 beta g)^2 - lam^2) / (4 beta).
With lam = 0 this is exactly beta * max(g, 0)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..energy import EnergyDensity, EnergyDomainError
from ..mesh import Deformation, SimplicialMesh
from ..parallel import concat_chunks, map_chunks
from ..tensor import adjugate, determinant


@dataclass
class BodyForce:
    """Potential Theta(x, y) evaluated at element centroids and centroid images."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_y: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class Constraints:
    eps: float = 0.0
    beta: float = 0.0
    M: np.ndarray | None = None
    M_report: np.ndarray | None = None
    lam: np.ndarray | None = None
    norm: str = "operator"
    body_force: BodyForce | None = None

    @property
    def has_bound(self) -> bool:
        return self.M is not None and self.beta > 0


@dataclass
class ObjectiveValue:
    objective: float
    energy: float
    min_det: float
    max_K_over_M: float | None
    K: np.ndarray | None = None


def _distortion_and_grad(F: np.ndarray, J: np.ndarray, norm: str):
    """K = |F|^n / J and dK/dF for J > 0."""
    n = F.shape[-1]
    if norm == "operator":
        U, sig, Vh = np.linalg.svd(F)
        nf = sig[:, 0]
        dnorm = U[:, :, :1] @ Vh[:, :1, :]
    elif norm == "frobenius":
        nf = np.sqrt(np.sum(F * F, axis=(-2, -1)))
        dnorm = F / nf[:, None, None]
    else:
        raise ValueError(f"unknown norm {norm!r}")
    K = nf**n / J
    cof = np.swapaxes(adjugate(F), -1, -2)
    dK = (n * nf ** (n - 1) / J)[:, None, None] * dnorm - (K / J)[:, None, None] * cof
    return K, dK


def element_terms(F: np.ndarray, W: EnergyDensity, con: Constraints, sl: slice, want_grad: bool = True):
    """Per-element density values of W, of the full augmented integrand and
    (optionally) its F-derivative for elements ``sl``."""
    Fs = F[sl]
    J = np.atleast_1d(determinant(Fs))
    w = np.atleast_1d(W.eval(Fs))
    phi = w.copy()
    P = W.grad(Fs) if want_grad else None
    if con.eps > 0:
        phi = phi - con.eps * np.log(J)
        if want_grad:
            P = P - con.eps * np.swapaxes(adjugate(Fs), -1, -2) / J[:, None, None]
    K = None
    if con.has_bound:
        K, dK = _distortion_and_grad(Fs, J, con.norm)
        lam = np.zeros(len(J)) if con.lam is None else con.lam[sl]
        g = K - con.M[sl]
        shifted = np.maximum(0.0, lam + 2.0 * con.beta * g)
        phi = phi + (shifted**2 - lam**2) / (4.0 * con.beta)
        if want_grad:
            P = P + shifted[:, None, None] * dK
    return w, phi, P, J, K


def _check_positive(J: np.ndarray, offset: int = 0):
    bad = np.flatnonzero(J <= 0)
    if len(bad):
        i = int(bad[0])
        raise EnergyDomainError(f"element {offset + i}: det F = {J[i]:.6g} <= 0", float(J[i]), offset + i)


def _element_gradients(mesh: SimplicialMesh, images: np.ndarray) -> np.ndarray:
    Y = images[mesh.elements]
    Ds = np.swapaxes(Y[:, 1:] - Y[:, :1], 1, 2)
    return Ds @ mesh.edge_inverses


def evaluate(phi: Deformation, W: EnergyDensity, con: Constraints, workers: int = 1,
             want_grad: bool = True):
    """Objective summary and the full nodal gradient (all nodes, shape (V, n))."""
    mesh = phi.mesh
    F = _element_gradients(mesh, phi.images)
    J_all = np.atleast_1d(determinant(F))
    _check_positive(J_all)

    def work(sl):
        w, ph, P, J, K = element_terms(F, W, con, sl, want_grad)
        out = [w, ph, J, K if K is not None else np.zeros(0)]
        if want_grad:
            # dE/dDs = |T| P Dm^-T; columns map to vertices 1..n, vertex 0 gets minus their sum
            H = mesh.volumes[sl, None, None] * P @ np.swapaxes(mesh.edge_inverses[sl], 1, 2)
            out.append(H)
        return tuple(out)

    parts = map_chunks(work, mesh.n_elements, workers)
    cols = concat_chunks(parts, 5 if want_grad else 4)
    w, ph, J, K = cols[:4]
    vol = mesh.volumes
    energy = math.fsum(vol * w)
    objective = math.fsum(vol * ph)
    grad = None
    if want_grad:
        H = cols[4]
        grad = np.zeros_like(phi.images)
        n = mesh.dim
        contrib = np.concatenate([-H.sum(axis=2, keepdims=True), H], axis=2)  # (E, n, n+1)
        for a in range(n + 1):
            np.add.at(grad, mesh.elements[:, a], contrib[:, :, a])
    if con.body_force is not None:
        yc = phi.images[mesh.elements].mean(axis=1)
        theta = math.fsum(vol * np.asarray(con.body_force.value(mesh.centroids, yc), dtype=float))
        energy += theta
        objective += theta
        if want_grad:
            gy = vol[:, None] * np.asarray(con.body_force.grad_y(mesh.centroids, yc), dtype=float) / (mesh.dim + 1)
            for a in range(mesh.dim + 1):
                np.add.at(grad, mesh.elements[:, a], gy)
    ratio = None
    if con.has_bound:
        ratio = float(np.max(K / (con.M if con.M_report is None else con.M_report)))
    return ObjectiveValue(objective, energy, float(J.min()), ratio, K if con.has_bound else None), grad


def assemble_gradient(phi: Deformation, W: EnergyDensity, constraints: Constraints | None = None,
                      interior: np.ndarray | None = None, workers: int = 1) -> np.ndarray:
    """Gradient of the augmented objective with respect to interior nodal positions."""
    con = constraints or Constraints()
    _, g = evaluate(phi, W, con, workers)
    idx = phi.mesh.interior_nodes if interior is None else interior
    return g[idx]


def objective_value(phi: Deformation, W: EnergyDensity, constraints: Constraints | None = None,
                    workers: int = 1) -> ObjectiveValue:
    return evaluate(phi, W, constraints or Constraints(), workers, want_grad=False)[0]
