"""Point location in image elements: Banach indicatrix, topological degree,
and the sense-preserving diagnostic."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh import Deformation, SimplicialMesh
from ..tensor import determinant

FACET_TOL = 1e-12
_NUDGE_DIR = {2: np.array([0.6180339887498949, 0.7861513777574233]),
              3: np.array([0.5773502691896258, 0.6427876096865394, 0.5038710584726338])}
_MAX_NUDGES = 60


class DegenerateConfigurationError(ValueError):
    """The query point lies (numerically) on the image of the region's boundary."""


@dataclass
class PointQuery:
    value: int
    point: np.ndarray
    nudged: bool = False
    shift: list = field(default_factory=list)

    def __int__(self):
        return self.value


def _region(mesh: SimplicialMesh, region) -> np.ndarray:
    if region is None:
        return np.arange(mesh.n_elements)
    region = np.asarray(region)
    if region.dtype == bool:
        return np.flatnonzero(region)
    return np.unique(region.astype(np.int64))


def _image_barycentric(phi: Deformation, elems: np.ndarray, y: np.ndarray):
    """Signed facet distances of y for each (non-degenerate) image element.

    Returns (dist, J) where dist[e, i] is the signed distance from y to the
    hyperplane of the facet opposite local vertex i, positive on the vertex
    side; rows for J == 0 are filled with -inf.
    """
    Y = phi.images[phi.mesh.elements[elems]]
    D = np.swapaxes(Y[:, 1:] - Y[:, :1], 1, 2)
    J = determinant(D)
    n = Y.shape[-1]
    dist = np.full((len(elems), n + 1), -np.inf)
    ok = J != 0
    if np.any(ok):
        Dinv = np.linalg.inv(D[ok])
        lam = np.einsum("eij,ej->ei", Dinv, y - Y[ok, 0])
        lam0 = 1.0 - lam.sum(axis=1)
        grads = np.concatenate([-Dinv.sum(axis=1, keepdims=True), Dinv], axis=1)
        gnorm = np.linalg.norm(grads, axis=2)
        dist[ok] = np.concatenate([lam0[:, None], lam], axis=1) / gnorm
    return dist, J


def _locate(phi: Deformation, elems: np.ndarray, y: np.ndarray):
    """Containing elements for y, nudging y off image facets if needed."""
    n = phi.mesh.dim
    tol = FACET_TOL * max(phi.mesh.diameter, float(np.ptp(phi.images, axis=0).max()))
    y = np.asarray(y, dtype=float).copy()
    shifts = []
    for k in range(_MAX_NUDGES):
        dist, J = _image_barycentric(phi, elems, y)
        dmin = dist.min(axis=1)
        if not np.any(np.abs(dmin) <= tol):
            return y, dmin > tol, J, shifts
        step = tol * 10.0 * (k + 1) * _NUDGE_DIR[n]
        y = y + step
        shifts.append(step.tolist())
    raise DegenerateConfigurationError("could not move query point off the image facets")


def banach_indicatrix(phi: Deformation, y, region=None) -> PointQuery:
    """Number of elements of ``region`` whose affine image contains ``y``."""
    elems = _region(phi.mesh, region)
    y_used, inside, _, shifts = _locate(phi, elems, y)
    return PointQuery(int(inside.sum()), y_used, bool(shifts), shifts)


def signed_preimage_count(phi: Deformation, y, region=None) -> PointQuery:
    """Sum of sign(J) over the elements of ``region`` whose image contains ``y``."""
    elems = _region(phi.mesh, region)
    y_used, inside, J, shifts = _locate(phi, elems, y)
    return PointQuery(int(np.sign(J[inside]).sum()), y_used, bool(shifts), shifts)


def region_boundary(mesh: SimplicialMesh, region=None) -> np.ndarray:
    """Outward-oriented boundary facets of an element subset."""
    elems = _region(mesh, region)
    if len(elems) == mesh.n_elements:
        return mesh.boundary_facets
    facets = mesh.oriented_facets.reshape(mesh.n_elements, mesh.dim + 1, mesh.dim)[elems].reshape(-1, mesh.dim)
    key = np.sort(facets, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return facets[counts[inverse.ravel()] == 1]


def _point_segment_distance(y, P):
    a, b = P[:, 0], P[:, 1]
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", y - a, ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300), 0.0, 1.0)
    return np.linalg.norm(a + t[:, None] * ab - y, axis=1)


def _point_triangle_distance(y, T):
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    nrm = np.cross(b - a, c - a)
    nn = np.linalg.norm(nrm, axis=1)
    safe = np.maximum(nn, 1e-300)
    plane = np.einsum("ij,ij->i", y - a, nrm) / safe
    proj = y - plane[:, None] * nrm / safe[:, None]
    # barycentric inside test of the projection
    inside = np.ones(len(T), dtype=bool)
    for p, q in ((a, b), (b, c), (c, a)):
        inside &= np.einsum("ij,ij->i", np.cross(q - p, proj - p), nrm) >= 0
    edge = np.minimum.reduce([_point_segment_distance(y, np.stack([p, q], axis=1)) for p, q in ((a, b), (b, c), (c, a))])
    return np.where(inside & (nn > 0), np.abs(plane), edge)


def boundary_distance(phi: Deformation, y, region=None) -> float:
    facets = phi.images[region_boundary(phi.mesh, region)]
    y = np.asarray(y, dtype=float)
    if phi.mesh.dim == 2:
        return float(_point_segment_distance(y, facets).min())
    return float(_point_triangle_distance(y, facets).min())


def winding_number(phi: Deformation, y, region=None) -> int:
    """Degree of the boundary image of ``region`` around ``y``.

    2D: signed crossing count of the oriented boundary polygon (exact integer
    arithmetic on orientation signs). 3D: total signed solid angle of the
    oriented boundary triangles divided by 4 pi.
    """
    y = np.asarray(y, dtype=float)
    P = phi.images[region_boundary(phi.mesh, region)]
    if phi.mesh.dim == 2:
        a, b = P[:, 0], P[:, 1]
        is_left = (b[:, 0] - a[:, 0]) * (y[1] - a[:, 1]) - (y[0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        up = (a[:, 1] <= y[1]) & (b[:, 1] > y[1]) & (is_left > 0)
        down = (a[:, 1] > y[1]) & (b[:, 1] <= y[1]) & (is_left < 0)
        return int(up.sum()) - int(down.sum())
    A, B, C = P[:, 0] - y, P[:, 1] - y, P[:, 2] - y
    la, lb, lc = (np.linalg.norm(v, axis=1) for v in (A, B, C))
    num = np.einsum("ij,ij->i", A, np.cross(B, C))
    den = la * lb * lc + np.einsum("ij,ij->i", A, B) * lc + np.einsum("ij,ij->i", A, C) * lb + np.einsum("ij,ij->i", B, C) * la
    total = 2.0 * np.arctan2(num, den).sum()
    return int(np.rint(total / (4.0 * np.pi)))


def topological_degree(phi: Deformation, y, region=None) -> int:
    """Degree of ``phi`` at ``y`` relative to ``region`` (default: whole mesh).

    Computed from the boundary image and cross-checked against the signed
    preimage count when ``y`` is clear of every image facet.
    """
    tol = FACET_TOL * max(phi.mesh.diameter, float(np.ptp(phi.images, axis=0).max()))
    if boundary_distance(phi, y, region) <= tol:
        raise DegenerateConfigurationError(f"point {np.asarray(y).tolist()} lies on the boundary image")
    deg = winding_number(phi, y, region)
    count = signed_preimage_count(phi, y, region)
    if not count.nudged and count.value != deg:
        raise DegenerateConfigurationError(
            f"boundary degree {deg} disagrees with signed preimage count {count.value} at {np.asarray(y).tolist()}")
    return deg


@dataclass
class SensePreservingResult:
    verdict: bool
    degrees: list
    skipped: int
    points: list

    def to_dict(self) -> dict:
        return {"sense_preserving": self.verdict, "degrees": self.degrees, "skipped": self.skipped}


def vertex_star(mesh: SimplicialMesh, v: int) -> np.ndarray:
    return np.flatnonzero(np.any(mesh.elements == v, axis=1))


def sense_preserving_check(phi: Deformation, samples: int = 20, seed: int = 0) -> SensePreservingResult:
    """Degree evidence over the whole mesh and over vertex stars.

    Sample points are images of element centroids; each is tested against the
    whole domain and against the star of one vertex of its element. The
    verdict requires every valid degree to be >= 1 and at least one element
    with positive Jacobian.
    """
    mesh = phi.mesh
    rng = np.random.default_rng(seed)
    picks = rng.choice(mesh.n_elements, size=min(samples, mesh.n_elements), replace=False)
    picks.sort()
    Y = phi.element_images().mean(axis=1)
    interior = set(mesh.interior_nodes.tolist())
    degrees, points, skipped = [], [], 0
    for e in picks:
        regions = [None]
        verts = [v for v in mesh.elements[e] if v in interior]
        if verts:
            regions.append(vertex_star(mesh, int(verts[0])))
        for reg in regions:
            try:
                degrees.append(topological_degree(phi, Y[e], reg))
                points.append(Y[e].tolist())
            except DegenerateConfigurationError:
                skipped += 1
    J = phi.element_gradients().jacobian
    verdict = bool(degrees) and all(d >= 1 for d in degrees) and bool(np.any(J > 0))
    return SensePreservingResult(verdict, degrees, skipped, points)
