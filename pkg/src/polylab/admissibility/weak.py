"""Refinement studies for the divergence structure of minors.

``piola_identity_residual`` pairs the columns of a sampled Adj(Df) with
gradients of compactly supported test functions; ``minor_weak_continuity_test``
pairs minors of a sequence of deformations with test functions and compares
with the limit map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..mesh import SimplicialMesh, refine, unit_cube, unit_square
from ..tensor import adjugate, minor
from .quadrature import integrate_per_element


# --- test functions on the unit box, vanishing on its boundary ----------------


@dataclass(frozen=True)
class ThetaFunction:
    """theta(x) and its gradient; points are rows of x, values on the last axis."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]  # returns (n, N)


def _sine_product(freqs: Sequence[int]) -> ThetaFunction:
    w = np.pi * np.asarray(freqs, dtype=float)

    def value(x):
        return np.prod(np.sin(w * x), axis=-1)

    def gradient(x):
        s, c = np.sin(w * x), np.cos(w * x)
        out = []
        for j in range(x.shape[-1]):
            others = np.prod(np.delete(s, j, axis=-1), axis=-1)
            out.append(w[j] * c[:, j] * others)
        return np.array(out)

    return ThetaFunction("sin" + "".join(map(str, freqs)), value, gradient)


def _tilted_bubble(n: int) -> ThetaFunction:
    """(1 + x_1) * prod x_i (1 - x_i)."""

    def value(x):
        return (1.0 + x[:, 0]) * np.prod(x * (1.0 - x), axis=-1)

    def gradient(x):
        q = x * (1.0 - x)
        dq = 1.0 - 2.0 * x
        out = []
        for j in range(n):
            rest = np.prod(np.delete(q, j, axis=-1), axis=-1)
            g = (1.0 + x[:, 0]) * dq[:, j] * rest
            if j == 0:
                g = g + np.prod(q, axis=-1)
            out.append(g)
        return np.array(out)

    return ThetaFunction("bubble", value, gradient)


def default_test_functions(n: int) -> list[ThetaFunction]:
    return [_sine_product([1] * n), _sine_product([2] + [1] * (n - 1)), _tilted_bubble(n)]


# --- smooth maps with analytic gradients ---------------------------------------


@dataclass(frozen=True)
class SmoothMap:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    Df: Callable[[np.ndarray], np.ndarray]  # (N, n) -> (N, n, n)


def affine_map(A, b=None) -> SmoothMap:
    A = np.asarray(A, dtype=float)
    b = np.zeros(len(A)) if b is None else np.asarray(b, dtype=float)
    return SmoothMap("affine", lambda x: x @ A.T + b, lambda x: np.broadcast_to(A, (len(x),) + A.shape).copy())


def quadratic_map(n: int = 2) -> SmoothMap:
    """f(x) = (x_1^2, x_2, ...)."""

    def f(x):
        y = x.copy()
        y[:, 0] = x[:, 0] ** 2
        return y

    def Df(x):
        D = np.broadcast_to(np.eye(n), (len(x), n, n)).copy()
        D[:, 0, 0] = 2.0 * x[:, 0]
        return D

    return SmoothMap("quadratic", f, Df)


def bump_map(n: int = 2, amplitude: float = 0.1) -> SmoothMap:
    """Identity plus amplitude * beta(x) * v with beta = x_1 sin(pi x_1) prod_{i>1} sin(pi x_i)^2
    and v = (1, 1/2, 1/4, ...)."""
    w = np.pi
    v = 0.5 ** np.arange(n)

    def beta_parts(x):
        s, c = np.sin(w * x), np.cos(w * x)
        rest = np.prod(s[:, 1:] ** 2, axis=-1)
        b = x[:, 0] * s[:, 0] * rest
        grad = np.empty_like(x)
        grad[:, 0] = (s[:, 0] + w * x[:, 0] * c[:, 0]) * rest
        for j in range(1, n):
            others = np.prod(np.delete(s[:, 1:] ** 2, j - 1, axis=-1), axis=-1)
            grad[:, j] = x[:, 0] * s[:, 0] * 2.0 * w * s[:, j] * c[:, j] * others
        return b, grad

    def f(x):
        return x + amplitude * beta_parts(x)[0][:, None] * v

    def Df(x):
        return np.eye(n) + amplitude * v[None, :, None] * beta_parts(x)[1][:, None, :]

    return SmoothMap("bump", f, Df)


SMOOTH_MAPS = {"quadratic": quadratic_map, "bump": bump_map}


# --- Piola residual -----------------------------------------------------------


@dataclass
class RefinementStudy:
    h: list
    residual: list
    detail: list = field(default_factory=list)

    @property
    def ratios(self) -> list:
        return [b / a if a > 0 else math.nan for a, b in zip(self.residual, self.residual[1:])]

    def to_dict(self) -> dict:
        return {"h": self.h, "residual": self.residual, "ratios": self.ratios, "detail": self.detail}


def mesh_sequence(n: int, levels: int, base: int = 8) -> list[SimplicialMesh]:
    mesh = unit_square(base) if n == 2 else unit_cube(base)
    out = [mesh]
    for _ in range(levels - 1):
        mesh = refine(mesh)
        out.append(mesh)
    return out


def _sample_points(mesh: SimplicialMesh, sampling: str) -> np.ndarray:
    if sampling == "centroid":
        return mesh.centroids
    if sampling == "vertex":
        return mesh.vertices[mesh.elements[:, 0]]
    raise ValueError(f"unknown sampling {sampling!r}; expected 'centroid' or 'vertex'")


def piola_residual_on_mesh(fmap: SmoothMap, mesh: SimplicialMesh, thetas: Sequence[ThetaFunction],
                           sampling: str = "centroid") -> tuple[float, dict]:
    """max over columns k and test functions of |sum_j int Adj(Df)_jk d_j theta|."""
    A = adjugate(fmap.Df(_sample_points(mesh, sampling)))
    worst, where = 0.0, {}
    for th in thetas:
        G = integrate_per_element(mesh, th.gradient)  # (n, E)
        for k in range(mesh.dim):
            r = abs(math.fsum((A[:, :, k].T * G).ravel()))
            if r >= worst:
                worst, where = r, {"theta": th.name, "column": k}
    return worst, where


def piola_identity_residual(fmap: SmoothMap, meshes: Sequence[SimplicialMesh],
                            thetas: Sequence[ThetaFunction] | None = None,
                            sampling: str = "centroid") -> RefinementStudy:
    """Residual of the divergence-free identity for Adj(Df) sampled once per element.

    The meshes must cover the unit box so the test functions vanish on the
    domain boundary.
    """
    thetas = default_test_functions(meshes[0].dim) if thetas is None else thetas
    study = RefinementStudy([], [])
    for mesh in meshes:
        r, where = piola_residual_on_mesh(fmap, mesh, thetas, sampling)
        study.h.append(mesh.h)
        study.residual.append(r)
        study.detail.append(where)
    return study


# --- weak continuity of minors ------------------------------------------------


@dataclass
class ConvergenceTable:
    k: list
    value: list
    limit: list
    rel_error: list
    tol: float = 0.05

    @property
    def converged(self) -> bool:
        return bool(self.rel_error) and self.rel_error[-1] <= self.tol

    def rows(self) -> list[dict]:
        return [{"k": k, "value": v, "limit": l, "rel_error": e}
                for k, v, l, e in zip(self.k, self.value, self.limit, self.rel_error)]

    def to_dict(self) -> dict:
        return {"rows": self.rows(), "tol": self.tol, "converged": self.converged}


def minor_pairing(phi, rows, cols, theta: ThetaFunction) -> float:
    """Integral of minor(D phi) * theta, exact minor per element, quadrature for theta."""
    M = np.atleast_1d(minor(phi.element_gradients().F, rows, cols))
    th = integrate_per_element(phi.mesh, theta.value)
    return math.fsum(M * th)


def minor_weak_continuity_test(family, rows, cols, theta: ThetaFunction | None = None,
                               ks: Sequence[int] = (1, 2, 4, 8), tol: float = 0.05) -> ConvergenceTable:
    """Tabulate the minor pairing along ``family`` against its limit map.

    ``family.member(k)`` returns (phi_k, phi_0) on a common mesh. The relative
    error is scaled by max(|limit|, integral of |theta|) so that vanishing
    limits (off-diagonal entries) are judged in absolute terms.
    """
    table = ConvergenceTable([], [], [], [], tol)
    for k in ks:
        phi_k, phi_0 = family.member(k)
        th = theta or default_test_functions(phi_k.mesh.dim)[0]
        v = minor_pairing(phi_k, rows, cols, th)
        lim = minor_pairing(phi_0, rows, cols, th)
        scale = max(abs(lim), math.fsum(np.abs(integrate_per_element(phi_k.mesh, th.value))))
        table.k.append(int(k))
        table.value.append(v)
        table.limit.append(lim)
        table.rel_error.append(abs(v - lim) / scale if scale > 0 else abs(v - lim))
    return table
