"""Change-of-variables check for piecewise-affine maps and piecewise-constant u.

For each element T and each cell C of the image partition,

    lhs:  |J_T| * |T  intersected with  phi_T^{-1}(C)|   (clipped in reference coordinates)
    rhs:  |phi_T(T)  intersected with  C|                 (clipped in image coordinates)

and summing rhs over T gives the integral of the Banach indicatrix over C.
In 2D both sides are exact polygon clippings; in 3D both are stratified
Monte Carlo estimates and the result is flagged approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon, box

from ..mesh import Deformation, SimplicialMesh


@dataclass
class PiecewiseConstant:
    """u(y) = values[i, j(, k)] on the rectilinear cells of ``edges``; 0 outside."""

    edges: list
    values: np.ndarray

    def __post_init__(self):
        self.edges = [np.asarray(e, dtype=float) for e in self.edges]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(len(e) - 1 for e in self.edges):
            raise ValueError("values shape must match the number of cells per axis")
        if any(np.any(np.diff(e) <= 0) for e in self.edges):
            raise ValueError("cell edges must be strictly increasing")

    @property
    def dim(self) -> int:
        return len(self.edges)

    @classmethod
    def constant(cls, lo, hi, value: float = 1.0) -> "PiecewiseConstant":
        return cls([np.array([a, b]) for a, b in zip(lo, hi)], np.full((1,) * len(lo), float(value)))

    @classmethod
    def half_space(cls, lo, hi, axis: int, cut: float, value: float = 1.0) -> "PiecewiseConstant":
        """Indicator of {y_axis < cut} inside the box [lo, hi]."""
        edges = [np.array([a, b]) for a, b in zip(lo, hi)]
        edges[axis] = np.array([lo[axis], cut, hi[axis]])
        shape = [1] * len(lo)
        shape[axis] = 2
        vals = np.zeros(shape)
        idx = [0] * len(lo)
        vals[tuple(idx)] = value
        return cls(edges, vals)

    @classmethod
    def grid(cls, lo, hi, values) -> "PiecewiseConstant":
        values = np.asarray(values, dtype=float)
        return cls([np.linspace(a, b, m + 1) for a, b, m in zip(lo, hi, values.shape)], values)

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.zeros(len(y))
        inside = np.ones(len(y), dtype=bool)
        idx = []
        for d, e in enumerate(self.edges):
            i = np.searchsorted(e, y[:, d], side="right") - 1
            inside &= (y[:, d] >= e[0]) & (y[:, d] < e[-1])
            idx.append(np.clip(i, 0, len(e) - 2))
        out[inside] = self.values[tuple(i[inside] for i in idx)]
        return out

    def cells(self):
        """Yield (lo, hi, value) for every nonzero cell."""
        for index in zip(*np.nonzero(self.values)):
            lo = [self.edges[d][i] for d, i in enumerate(index)]
            hi = [self.edges[d][i + 1] for d, i in enumerate(index)]
            yield np.array(lo), np.array(hi), float(self.values[index])


@dataclass
class ChangeOfVariablesResult:
    lhs: float
    rhs: float
    residual: float
    exact: bool
    stderr: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "residual": self.residual, "exact": self.exact, **self.stderr}


def _cells_overlapping(u: PiecewiseConstant, lo, hi):
    """Nonzero cells whose box meets the bounding box [lo, hi]."""
    ranges = []
    for d, e in enumerate(u.edges):
        a = max(np.searchsorted(e, lo[d], side="right") - 1, 0)
        b = min(np.searchsorted(e, hi[d], side="left"), len(e) - 1)
        if b <= a:
            return
        ranges.append(range(a, b))
    for index in np.ndindex(*[len(r) for r in ranges]):
        cell = tuple(r[i] for r, i in zip(ranges, index))
        val = u.values[cell]
        if val != 0:
            yield cell, float(val)


def _cov_2d(phi: Deformation, u: PiecewiseConstant) -> ChangeOfVariablesResult:
    mesh = phi.mesh
    X = mesh.vertices[mesh.elements]
    Y = phi.element_images()
    F = phi.element_gradients().F
    J = np.linalg.det(F)
    lhs_terms, rhs_terms = [], []
    for e in range(mesh.n_elements):
        ref_tri = Polygon(X[e])
        img = Y[e]
        img_tri = Polygon(img) if J[e] != 0 else None
        Finv = np.linalg.inv(F[e]) if J[e] != 0 else None
        for cell, val in _cells_overlapping(u, img.min(axis=0), img.max(axis=0)):
            lo = [u.edges[d][cell[d]] for d in range(2)]
            hi = [u.edges[d][cell[d] + 1] for d in range(2)]
            if img_tri is None:
                continue
            rhs_terms.append(val * img_tri.intersection(box(lo[0], lo[1], hi[0], hi[1])).area)
            corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
            pulled = X[e, 0] + (corners - img[0]) @ Finv.T
            lhs_terms.append(val * abs(J[e]) * ref_tri.intersection(Polygon(pulled)).area)
    lhs, rhs = math.fsum(lhs_terms), math.fsum(rhs_terms)
    return ChangeOfVariablesResult(lhs, rhs, abs(lhs - rhs), True)


def _barycentric_samples(rng, n: int, count: int) -> np.ndarray:
    """Uniform points in the reference simplex (sorted-uniform spacings)."""
    u = np.sort(rng.random((count, n)), axis=1)
    lam = np.diff(np.concatenate([np.zeros((count, 1)), u, np.ones((count, 1))], axis=1), axis=1)
    return lam


def _cov_mc(phi: Deformation, u: PiecewiseConstant, samples: int, seed: int) -> ChangeOfVariablesResult:
    mesh = phi.mesh
    n = mesh.dim
    rng = np.random.default_rng(seed)
    Y = phi.element_images()
    J = np.linalg.det(phi.element_gradients().F)

    # lhs: per-element uniform sampling of u(phi(x)) |J| |T|
    lam = _barycentric_samples(rng, n, samples)
    pts = np.einsum("sk,ekd->esd", lam, Y)
    vals = u(pts.reshape(-1, n)).reshape(mesh.n_elements, samples)
    w = np.abs(J) * mesh.volumes
    lhs = math.fsum(w * vals.mean(axis=1))
    lhs_se = math.sqrt(math.fsum((w**2) * vals.var(axis=1, ddof=1) / samples))

    # rhs: stratified sampling over the partition box of u(y) N(y)
    lo = np.array([e[0] for e in u.edges])
    hi = np.array([e[-1] for e in u.edges])
    per_axis = max(2, int(round(samples ** (1.0 / n))) * 2)
    strata = np.stack(np.meshgrid(*[np.arange(per_axis)] * n, indexing="ij"), -1).reshape(-1, n)
    ys = lo + (strata + rng.random(strata.shape)) * (hi - lo) / per_axis
    counts = _indicatrix_many(phi, ys)
    f = u(ys) * counts
    vol_box = float(np.prod(hi - lo))
    rhs = vol_box * float(f.mean())
    rhs_se = vol_box * float(f.std(ddof=1)) / math.sqrt(len(f))
    return ChangeOfVariablesResult(lhs, rhs, abs(lhs - rhs), False, {"lhs_stderr": lhs_se, "rhs_stderr": rhs_se})


def _indicatrix_many(phi: Deformation, ys: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Number of image elements containing each point (closed-simplex test)."""
    Y = phi.element_images()
    D = np.swapaxes(Y[:, 1:] - Y[:, :1], 1, 2)
    J = np.linalg.det(D)
    ok = J != 0
    Dinv = np.linalg.inv(D[ok])
    Y0 = Y[ok, 0]
    lo, hi = Y[ok].min(axis=1), Y[ok].max(axis=1)
    out = np.zeros(len(ys), dtype=np.int64)
    for a in range(0, len(ys), chunk):
        y = ys[a:a + chunk]
        near = np.all((y[:, None, :] >= lo[None]) & (y[:, None, :] <= hi[None]), axis=2)
        pi, ei = np.nonzero(near)
        lam = np.einsum("kij,kj->ki", Dinv[ei], y[pi] - Y0[ei])
        inside = np.all(lam >= 0, axis=1) & (lam.sum(axis=1) <= 1)
        out[a:a + chunk] = np.bincount(pi[inside], minlength=len(y))
    return out


def change_of_variable_check(phi: Deformation, u: PiecewiseConstant, samples: int = 4096,
                             seed: int = 0) -> ChangeOfVariablesResult:
    """Compare the integral of (u o phi)|J| with the integral of u times the indicatrix."""
    if u.dim != phi.mesh.dim:
        raise ValueError("partition dimension must match the mesh dimension")
    if phi.mesh.dim == 2:
        return _cov_2d(phi, u)
    return _cov_mc(phi, u, samples, seed)


def fold_deformation() -> Deformation:
    """Unit square split along its anti-diagonal, with the upper triangle
    reflected onto the lower one. Points of the lower triangle have two
    preimages; the upper element is inverted."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    mesh = SimplicialMesh(verts, np.array([[0, 1, 2], [1, 3, 2]]))
    images = verts.copy()
    images[3] = [0.0, 0.0]
    return Deformation(mesh, images)
