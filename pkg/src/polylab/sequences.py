"""Deformation sequences phi_k -> phi_0 used by the weak-continuity and
semicontinuity experiments. Each family returns (phi_k, phi_0) on a shared mesh."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Deformation, SimplicialMesh, unit_cube, unit_square


def _box_mesh(dim: int, resolution: int) -> SimplicialMesh:
    return unit_square(resolution) if dim == 2 else unit_cube(resolution)


@dataclass
class OscillationFamily:
    """phi_k(x) = F0 x + k^-1 a sin(k b.x), interpolated nodally on a mesh of
    resolution ``cells_per_k * k``.

    D phi_k = F0 + a b^T cos(k b.x) is a rank-one oscillation; it stays
    orientation preserving when |b . adj(F0) a| < det F0.
    """

    a: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.1]))
    b: np.ndarray = field(default_factory=lambda: np.array([2.0 * np.pi, 0.0]))
    F0: np.ndarray | None = None
    cells_per_k: int = 8

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        n = len(self.a)
        self.F0 = np.eye(n) if self.F0 is None else np.asarray(self.F0, dtype=float)
        from .tensor import adjugate, determinant

        det0 = float(determinant(self.F0))
        if det0 <= 0 or abs(self.b @ adjugate(self.F0) @ self.a) >= det0:
            raise ValueError("oscillation family must keep det D phi_k > 0")

    @property
    def dim(self) -> int:
        return len(self.a)

    def member(self, k: int):
        mesh = _box_mesh(self.dim, self.cells_per_k * int(k))
        x = mesh.vertices
        base = x @ self.F0.T
        images = base + np.sin(k * (x @ self.b))[:, None] * self.a[None, :] / k
        return Deformation(mesh, images, {"family": "oscillation", "k": int(k)}), Deformation(mesh, base)


@dataclass
class ConstantFamily:
    """phi_k = phi_0 for every k (a fixed map on a fixed-resolution mesh)."""

    F0: np.ndarray = field(default_factory=lambda: np.eye(2))
    resolution: int = 8

    def member(self, k: int):
        mesh = _box_mesh(len(self.F0), self.resolution)
        phi = Deformation.affine(mesh, self.F0)
        return phi, phi.copy()


@dataclass
class AffinePerturbationFamily:
    """phi_k = F0 x + k^-1 zeta(x) with zeta = amplitude * prod sin(pi x_i) * direction."""

    F0: np.ndarray = field(default_factory=lambda: np.eye(2))
    amplitude: float = 0.2
    direction: np.ndarray | None = None
    resolution: int = 16

    def member(self, k: int):
        n = len(self.F0)
        mesh = _box_mesh(n, self.resolution)
        x = mesh.vertices
        d = np.ones(n) / np.sqrt(n) if self.direction is None else np.asarray(self.direction, dtype=float)
        zeta = self.amplitude * np.prod(np.sin(np.pi * x), axis=1)[:, None] * d[None, :]
        base = x @ np.asarray(self.F0, dtype=float).T
        return Deformation(mesh, base + zeta / k, {"family": "affine_perturbation", "k": int(k)}), Deformation(mesh, base)


FAMILIES = {"oscillation": OscillationFamily, "constant": ConstantFamily, "affine_perturbation": AffinePerturbationFamily}


def make_family(kind: str, **params):
    try:
        cls = FAMILIES[kind]
    except KeyError:
        raise ValueError(f"unknown sequence family {kind!r}; expected one of {sorted(FAMILIES)}") from None
    return cls(**params)
