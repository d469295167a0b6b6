"""Simplicial meshes, P1 deformations, Dirichlet data and exact energy integration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.spatial import Delaunay

from .energy import EnergyDensity, EnergyDomainError
from .tensor import determinant

log = logging.getLogger(__name__)

# outward-oriented facets of the reference simplex, one per omitted vertex
_FACETS = {
    2: ((1, 2), (2, 0), (0, 1)),
    3: ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)),
}


class MeshError(ValueError):
    pass


class BoundaryDataError(ValueError):
    pass


@dataclass
class SimplicialMesh:
    vertices: np.ndarray
    elements: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise MeshError(f"vertices must be (V, n) with n in (2, 3), got {self.vertices.shape}")
        n = self.dim
        if self.elements.ndim != 2 or self.elements.shape[1] != n + 1:
            raise MeshError(f"elements must be (E, {n + 1}), got {self.elements.shape}")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= len(self.vertices)):
            raise MeshError("element index out of range")
        bad = np.flatnonzero(self.signed_volumes <= 0)
        if bad.size:
            raise MeshError(f"element {int(bad[0])} has non-positive reference volume {self.signed_volumes[bad[0]]:.3g}")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def edge_matrices(self) -> np.ndarray:
        """Columns are x_k - x_0 for k = 1..n, shape (E, n, n)."""
        X = self.vertices[self.elements]
        return np.swapaxes(X[:, 1:] - X[:, :1], 1, 2)

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        return determinant(self.edge_matrices) / math.factorial(self.dim)

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.abs(self.signed_volumes)

    @cached_property
    def edge_inverses(self) -> np.ndarray:
        return np.linalg.inv(self.edge_matrices)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    @cached_property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    @cached_property
    def h(self) -> float:
        """Longest element edge."""
        X = self.vertices[self.elements]
        n = self.dim
        return float(max(np.linalg.norm(X[:, i] - X[:, j], axis=1).max()
                         for i in range(n + 1) for j in range(i + 1, n + 1)))

    def total_volume(self) -> float:
        return math.fsum(self.volumes)

    @cached_property
    def oriented_facets(self) -> np.ndarray:
        """All element facets with outward orientation, shape (E*(n+1), n)."""
        loc = np.array(_FACETS[self.dim])
        return self.elements[:, loc].reshape(-1, self.dim)

    @cached_property
    def boundary_facets(self) -> np.ndarray:
        """Facets belonging to exactly one element, outward oriented."""
        facets = self.oriented_facets
        key = np.sort(facets, axis=1)
        _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return facets[counts[inverse.ravel()] == 1]

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_facets)

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @cached_property
    def edges(self) -> np.ndarray:
        n = self.dim
        pairs = [(i, j) for i in range(n + 1) for j in range(i + 1, n + 1)]
        e = np.concatenate([self.elements[:, p] for p in pairs])
        return np.unique(np.sort(e, axis=1), axis=0)

    def graph_laplacian(self) -> sp.csr_matrix:
        """Uniform-weight graph Laplacian over mesh edges."""
        e = self.edges
        V = self.n_vertices
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        A = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(V, V)).tocsr()
        return (sp.diags(np.asarray(A.sum(axis=1)).ravel()) - A).tocsr()

    def stiffness_matrix(self) -> sp.csr_matrix:
        """P1 stiffness matrix of the reference mesh (scalar Laplacian)."""
        n = self.dim
        G = np.concatenate([-self.edge_inverses.sum(axis=1, keepdims=True), self.edge_inverses], axis=1)
        # G[e, a, :] is the gradient of the barycentric function of local vertex a
        K = np.einsum("eai,ebi->eab", G, G) * self.volumes[:, None, None]
        rows = np.repeat(self.elements, n + 1, axis=1).ravel()
        cols = np.tile(self.elements, (1, n + 1)).ravel()
        return sp.coo_matrix((K.ravel(), (rows, cols)), shape=(self.n_vertices,) * 2).tocsr()


@dataclass
class ElementGradients:
    F: np.ndarray
    volume: np.ndarray

    def __len__(self):
        return len(self.F)

    @property
    def jacobian(self) -> np.ndarray:
        return determinant(self.F)


@dataclass
class Deformation:
    mesh: SimplicialMesh
    images: np.ndarray
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.array(self.images, dtype=float)
        if self.images.shape != self.mesh.vertices.shape:
            raise MeshError(f"nodal images shape {self.images.shape} != vertices shape {self.mesh.vertices.shape}")
        if not np.all(np.isfinite(self.images)):
            raise MeshError("nodal images must be finite")

    @classmethod
    def identity(cls, mesh: SimplicialMesh) -> "Deformation":
        return cls(mesh, mesh.vertices.copy())

    @classmethod
    def from_function(cls, mesh: SimplicialMesh, f: Callable[[np.ndarray], np.ndarray]) -> "Deformation":
        return cls(mesh, np.asarray(f(mesh.vertices), dtype=float))

    @classmethod
    def affine(cls, mesh: SimplicialMesh, F0, b=None) -> "Deformation":
        F0 = np.asarray(F0, dtype=float)
        b = np.zeros(mesh.dim) if b is None else np.asarray(b, dtype=float)
        return cls(mesh, mesh.vertices @ F0.T + b)

    def copy(self) -> "Deformation":
        return Deformation(self.mesh, self.images.copy(), dict(self.notes))

    def element_gradients(self) -> ElementGradients:
        return ElementGradients(gradients_from_images(self.mesh, self.images), self.mesh.volumes)

    def element_images(self) -> np.ndarray:
        """Image vertex coordinates per element, shape (E, n+1, n)."""
        return self.images[self.mesh.elements]

    def __call__(self, x: np.ndarray, element: int) -> np.ndarray:
        """Evaluate the affine piece of ``element`` at reference point(s) x."""
        m = self.mesh
        F = self.element_gradients().F[element]
        x0 = m.vertices[m.elements[element, 0]]
        y0 = self.images[m.elements[element, 0]]
        return y0 + (np.asarray(x) - x0) @ F.T


def gradients_from_images(mesh: SimplicialMesh, images: np.ndarray) -> np.ndarray:
    Y = images[mesh.elements]
    Ds = np.swapaxes(Y[:, 1:] - Y[:, :1], 1, 2)
    return Ds @ mesh.edge_inverses


def element_gradients(phi: Deformation) -> ElementGradients:
    return phi.element_gradients()


def total_energy(
    phi: Deformation,
    W: EnergyDensity,
    body_force: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> float:
    """Sum over elements of |T| W(x_T, F_T), plus |T| Theta(x_T, phi(x_T)) if given.

    Exact for x-independent densities since F is constant per element.
    """
    mesh = phi.mesh
    F = phi.element_gradients().F
    try:
        w = W.eval(F, mesh.centroids)
    except EnergyDomainError as exc:
        raise EnergyDomainError(f"element {exc.index}: {exc}", exc.det, exc.index) from None
    total = math.fsum(mesh.volumes * w)
    if body_force is not None:
        y = phi.element_images().mean(axis=1)
        total += math.fsum(mesh.volumes * np.asarray(body_force(mesh.centroids, y), dtype=float))
    return total


# --- mesh generators ---------------------------------------------------------


def _orient(vertices: np.ndarray, elements: np.ndarray) -> np.ndarray:
    X = vertices[elements]
    D = np.swapaxes(X[:, 1:] - X[:, :1], 1, 2)
    neg = determinant(D) < 0
    elements = elements.copy()
    elements[neg, 0], elements[neg, 1] = elements[neg, 1], elements[neg, 0].copy()
    return elements


def unit_square(resolution: int) -> SimplicialMesh:
    N = int(resolution)
    if N < 1:
        raise ValueError("resolution must be >= 1")
    g = np.linspace(0.0, 1.0, N + 1)
    X, Y = np.meshgrid(g, g, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    v00 = (i + j * (N + 1)).ravel()
    v10, v01, v11 = v00 + 1, v00 + N + 1, v00 + N + 2
    tris = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    return SimplicialMesh(verts, tris)


def unit_cube(resolution: int) -> SimplicialMesh:
    """Structured cube mesh; every sub-cube is Kuhn-split into six tetrahedra."""
    N = int(resolution)
    if N < 1:
        raise ValueError("resolution must be >= 1")
    g = np.linspace(0.0, 1.0, N + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (N + 1) + j) * (N + 1) + k

    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    I, J, K = (a.ravel() for a in np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij"))
    tets = []
    for perm in perms:
        corner = np.zeros(3, dtype=int)
        path = [vid(I, J, K)]
        for ax in perm:
            corner[ax] += 1
            path.append(vid(I + corner[0], J + corner[1], K + corner[2]))
        tets.append(np.column_stack(path))
    tets = np.concatenate(tets)
    return SimplicialMesh(verts, _orient(verts, tets))


def annulus(resolution: int, r_in: float = 0.5, r_out: float = 1.0) -> SimplicialMesh:
    """Polygonal annulus: ``resolution`` radial layers, 8 * resolution sectors."""
    nr = int(resolution)
    if nr < 1:
        raise ValueError("resolution must be >= 1")
    nt = max(8, 8 * nr)
    radii = np.linspace(r_in, r_out, nr + 1)
    theta = 2.0 * np.pi * np.arange(nt) / nt
    R, T = np.meshgrid(radii, theta, indexing="ij")
    verts = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    i, j = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * nt + j
    b = i * nt + (j + 1) % nt
    c = (i + 1) * nt + (j + 1) % nt
    d = (i + 1) * nt + j
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return SimplicialMesh(verts, _orient(verts, tris))


def disk(resolution: int, radius: float = 1.0) -> SimplicialMesh:
    """Polygonal disk: concentric rings with 6k points on ring k, Delaunay-triangulated."""
    n = int(resolution)
    if n < 1:
        raise ValueError("resolution must be >= 1")
    pts = [np.zeros((1, 2))]
    for k in range(1, n + 1):
        t = 2.0 * np.pi * (np.arange(6 * k) + 0.5 * (k % 2)) / (6 * k)
        pts.append(radius * k / n * np.column_stack([np.cos(t), np.sin(t)]))
    verts = np.concatenate(pts)
    tris = Delaunay(verts).simplices.astype(np.int64)
    tris = tris[np.argsort(tris.min(axis=1), kind="stable")]
    return SimplicialMesh(verts, _orient(verts, tris))


SHAPES = {"unit-square": unit_square, "unit-cube": unit_cube, "annulus": annulus,
          "annulus-approx": annulus, "disk": disk}


def make_mesh(shape: str, resolution: int, **kw) -> SimplicialMesh:
    try:
        gen = SHAPES[shape]
    except KeyError:
        raise ValueError(f"unknown mesh shape {shape!r}; expected one of {sorted(SHAPES)}") from None
    return gen(resolution, **kw)


_BEY_CHILDREN = (
    (0, 4, 5, 6), (4, 1, 7, 8), (5, 7, 2, 9), (6, 8, 9, 3),
    (4, 5, 6, 8), (4, 5, 7, 8), (5, 6, 8, 9), (5, 7, 8, 9),
)
_TRI_CHILDREN = ((0, 3, 5), (3, 1, 4), (5, 4, 2), (3, 4, 5))


def refine(mesh: SimplicialMesh) -> SimplicialMesh:
    """Uniform midpoint subdivision: 4 children per triangle, 8 per tetrahedron."""
    n = mesh.dim
    local_edges = [(0, 1), (1, 2), (2, 0)] if n == 2 else [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    el = mesh.elements
    e = np.sort(np.stack([el[:, [a, b]] for a, b in local_edges], axis=1), axis=2)
    uniq, inv = np.unique(e.reshape(-1, 2), axis=0, return_inverse=True)
    mid_ids = mesh.n_vertices + inv.reshape(len(el), len(local_edges))
    verts = np.concatenate([mesh.vertices, 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])])
    local = np.concatenate([el, mid_ids], axis=1)
    children = _TRI_CHILDREN if n == 2 else _BEY_CHILDREN
    new = np.concatenate([local[:, list(c)] for c in children])
    return SimplicialMesh(verts, _orient(verts, new))


# --- boundary data -------------------------------------------------------------


@dataclass
class BoundaryData:
    """Dirichlet data: a vectorized point map or a per-node table of images."""

    kind: str
    func: Callable[[np.ndarray], np.ndarray] | None = None
    table: dict[int, np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def evaluate(self, mesh: SimplicialMesh, nodes: np.ndarray | None = None) -> np.ndarray:
        nodes = mesh.boundary_nodes if nodes is None else np.asarray(nodes)
        if self.table is not None:
            missing = [int(v) for v in nodes if int(v) not in self.table]
            if missing:
                raise BoundaryDataError(f"no boundary image for node {missing[0]}")
            out = np.array([self.table[int(v)] for v in nodes], dtype=float)
        else:
            out = np.asarray(self.func(mesh.vertices[nodes]), dtype=float)
        if out.shape != (len(nodes), mesh.dim):
            raise BoundaryDataError(f"boundary data returned shape {out.shape}, expected {(len(nodes), mesh.dim)}")
        bad = np.flatnonzero(~np.all(np.isfinite(out), axis=1))
        if bad.size:
            raise BoundaryDataError(f"boundary data not finite at node {int(nodes[bad[0]])}")
        return out

    def affine_matrix(self) -> np.ndarray | None:
        return np.asarray(self.params["matrix"]) if "matrix" in self.params else None

    @classmethod
    def identity(cls) -> "BoundaryData":
        return cls("identity", func=lambda x: np.array(x, dtype=float))

    @classmethod
    def affine(cls, matrix, offset=None) -> "BoundaryData":
        A = np.asarray(matrix, dtype=float)
        b = np.zeros(A.shape[0]) if offset is None else np.asarray(offset, dtype=float)
        return cls("affine", func=lambda x: x @ A.T + b, params={"matrix": A.tolist(), "offset": b.tolist()})

    @classmethod
    def squeeze(cls, factor: float, dim: int = 2) -> "BoundaryData":
        D = np.ones(dim)
        D[0], D[1] = factor, 1.0 / factor
        bd = cls.affine(np.diag(D))
        bd.kind = "squeeze"
        bd.params["factor"] = factor
        return bd

    @classmethod
    def twist(cls, angle: float, center=(0.5, 0.5)) -> "BoundaryData":
        """Rotate about ``center`` by an angle decaying linearly with distance (2D).

        The rotation angle is ``angle`` at the center and zero at distance 1.
        """
        c = np.asarray(center, dtype=float)

        def f(x):
            d = x - c
            rho = np.linalg.norm(d, axis=1)
            t = angle * (1.0 - rho)
            ct, st = np.cos(t), np.sin(t)
            return c + np.column_stack([ct * d[:, 0] - st * d[:, 1], st * d[:, 0] + ct * d[:, 1]])

        return cls("twist", func=f, params={"angle": angle, "center": c.tolist()})

    @classmethod
    def from_table(cls, table: dict[int, np.ndarray]) -> "BoundaryData":
        return cls("table", table={int(k): np.asarray(v, dtype=float) for k, v in table.items()})

    @classmethod
    def from_function(cls, f, kind: str = "function") -> "BoundaryData":
        return cls(kind, func=f)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def check_boundary_homeomorphism(mesh: SimplicialMesh, images: np.ndarray) -> None:
    """Reject boundary data that is not injective on boundary nodes or, in 2D,
    whose boundary polygon self-intersects."""
    nodes = mesh.boundary_nodes
    pts = images[nodes]
    scale = max(float(np.ptp(pts, axis=0).max()), 1e-300)
    key = np.round(pts / (1e-12 * scale)).astype(np.int64)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    if np.any(counts > 1):
        raise BoundaryDataError("boundary data maps two boundary nodes to the same point")
    if mesh.dim != 2:
        return
    segs = images[mesh.boundary_facets]
    lo, hi = segs.min(axis=1), segs.max(axis=1)
    for i in range(len(segs)):
        cand = np.flatnonzero(np.all(lo[i + 1:] <= hi[i], axis=1) & np.all(hi[i + 1:] >= lo[i], axis=1)) + i + 1
        for j in cand:
            if set(mesh.boundary_facets[i]) & set(mesh.boundary_facets[j]):
                continue
            if _segments_cross(segs[i, 0], segs[i, 1], segs[j, 0], segs[j, 1]):
                raise BoundaryDataError(f"boundary image self-intersects (facets {i} and {j})")


def _affine_fit(X: np.ndarray, Y: np.ndarray):
    A = np.column_stack([X, np.ones(len(X))])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    return coef[:-1].T, coef[-1]


def interpolate_boundary(mesh: SimplicialMesh, bd: BoundaryData) -> Deformation:
    """Set boundary nodes to the Dirichlet data and initialize the interior.

    Interior initialization: if the data is affine on the boundary, use its
    affine extension. Otherwise solve the uniform-weight harmonic (Tutte)
    problem for interior nodes, which is flip-free for convex 2D targets;
    fall back to the affine fit, then to reference positions, if any element
    determinant is not positive. ``notes["init"]`` records the method used.
    """
    nodes = mesh.boundary_nodes
    target = bd.evaluate(mesh, nodes)
    A, b = _affine_fit(mesh.vertices[nodes], target)
    affine_images = mesh.vertices @ A.T + b
    resid = np.abs(affine_images[nodes] - target).max() if len(nodes) else 0.0
    scale = 1.0 + np.abs(target).max()

    def with_boundary(images):
        images = images.copy()
        images[nodes] = target
        return images

    def feasible(images):
        return bool(np.all(determinant(gradients_from_images(mesh, images)) > 0))

    if resid <= 1e-12 * scale:
        candidates = [("affine", with_boundary(affine_images))]
    else:
        candidates = [("harmonic", with_boundary(_harmonic_extension(mesh, target))),
                      ("affine", with_boundary(affine_images))]
    for name, images in candidates:
        if feasible(images):
            return Deformation(mesh, images, {"init": name})
    log.warning("no flip-free interior initialization found; using reference positions")
    images = with_boundary(mesh.vertices)
    return Deformation(mesh, images, {"init": "reference", "diagnostic": "initializer produced det <= 0"})


def _harmonic_extension(mesh: SimplicialMesh, boundary_images: np.ndarray) -> np.ndarray:
    L = mesh.graph_laplacian()
    I, B = mesh.interior_nodes, mesh.boundary_nodes
    out = np.zeros_like(mesh.vertices)
    out[B] = boundary_images
    if len(I):
        L_II = L[I][:, I].tocsc()
        rhs = -(L[I][:, B] @ boundary_images)
        sol = spsolve(L_II, rhs)
        out[I] = sol.reshape(len(I), -1)
    return out


# --- file formats --------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _data_lines(path: Path) -> list[list[str]]:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    return rows


def write_mesh(mesh: SimplicialMesh, path) -> None:
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}"]
    lines += [" ".join(_fmt(v) for v in row) for row in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in row) for row in mesh.elements]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> SimplicialMesh:
    rows = _data_lines(path)
    if not rows or len(rows[0]) != 3:
        raise MeshError(f"{path}: header must be 'n V E'")
    n, V, E = (int(t) for t in rows[0])
    if len(rows) != 1 + V + E:
        raise MeshError(f"{path}: expected {V} vertex and {E} element lines, found {len(rows) - 1} data lines")
    verts = np.array([[float(t) for t in r] for r in rows[1:1 + V]])
    elems = np.array([[int(t) for t in r] for r in rows[1 + V:]], dtype=np.int64).reshape(E, n + 1)
    if verts.shape != (V, n):
        raise MeshError(f"{path}: vertex lines must have {n} coordinates")
    return SimplicialMesh(verts, elems)


def write_deformation(phi: Deformation, path) -> None:
    m = phi.mesh
    lines = [f"{m.dim} {m.n_vertices} {m.n_elements}"]
    lines += [" ".join(_fmt(v) for v in row) for row in phi.images]
    Path(path).write_text("\n".join(lines) + "\n")


def read_deformation(path, mesh: SimplicialMesh) -> Deformation:
    rows = _data_lines(path)
    n, V, E = (int(t) for t in rows[0])
    if (n, V, E) != (mesh.dim, mesh.n_vertices, mesh.n_elements):
        raise MeshError(f"{path}: header {(n, V, E)} does not match mesh {(mesh.dim, mesh.n_vertices, mesh.n_elements)}")
    images = np.array([[float(t) for t in r] for r in rows[1:]])
    if images.shape != (V, n):
        raise MeshError(f"{path}: expected {V} image lines of {n} coordinates")
    return Deformation(mesh, images)
