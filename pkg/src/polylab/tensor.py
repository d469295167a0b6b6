"""Small dense matrix algebra for deformation gradients.

All functions accept a single ``(n, n)`` matrix or a stack ``(..., n, n)``
with ``n in (2, 3)`` and operate on the trailing two axes.
"""

from __future__ import annotations

import numpy as np

NORMS = ("operator", "frobenius")

# relative discriminant below which the trigonometric eigenvalue formula is
# abandoned in favour of Jacobi sweeps
_DISCRIMINANT_TOL = 1e-12
_JACOBI_SWEEPS = 12


def as_mat(F) -> np.ndarray:
    """Validate and return ``F`` as a float array of square 2x2 or 3x3 blocks."""
    F = np.asarray(F, dtype=float)
    if F.ndim < 2 or F.shape[-1] != F.shape[-2] or F.shape[-1] not in (2, 3):
        raise ValueError(f"expected (..., n, n) with n in (2, 3), got shape {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("matrix entries must be finite")
    return F


def determinant(F) -> np.ndarray | float:
    F = as_mat(F)
    if F.shape[-1] == 2:
        d = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    else:
        d = (
            F[..., 0, 0] * (F[..., 1, 1] * F[..., 2, 2] - F[..., 1, 2] * F[..., 2, 1])
            - F[..., 0, 1] * (F[..., 1, 0] * F[..., 2, 2] - F[..., 1, 2] * F[..., 2, 0])
            + F[..., 0, 2] * (F[..., 1, 0] * F[..., 2, 1] - F[..., 1, 1] * F[..., 2, 0])
        )
    return d[()] if np.ndim(d) == 0 else d


def adjugate(F) -> np.ndarray:
    """Transpose of the cofactor matrix, so that ``F @ adjugate(F) == det(F) I``."""
    F = as_mat(F)
    A = np.empty_like(F)
    if F.shape[-1] == 2:
        A[..., 0, 0] = F[..., 1, 1]
        A[..., 0, 1] = -F[..., 0, 1]
        A[..., 1, 0] = -F[..., 1, 0]
        A[..., 1, 1] = F[..., 0, 0]
        return A
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            # cyclic index choice absorbs the cofactor sign
            A[..., j, i] = F[..., i1, j1] * F[..., i2, j2] - F[..., i1, j2] * F[..., i2, j1]
    return A


def cofactor(F) -> np.ndarray:
    return np.swapaxes(adjugate(F), -1, -2)


def minor(F, rows, cols) -> np.ndarray | float:
    """Determinant of the submatrix picked by zero-based ``rows`` and ``cols``.

    Index tuples must be strictly increasing and of equal length ``m <= n``.
    """
    F = as_mat(F)
    n = F.shape[-1]
    rows, cols = tuple(int(r) for r in rows), tuple(int(c) for c in cols)
    m = len(rows)
    if m != len(cols) or not 1 <= m <= n:
        raise ValueError(f"minor needs equal-length index tuples of size 1..{n}")
    for idx in (rows, cols):
        if any(i < 0 or i >= n for i in idx):
            raise IndexError(f"minor index out of range 0..{n - 1}: {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"minor indices must be strictly increasing: {idx}")
    sub = F[..., rows, :][..., :, cols]
    if m == 1:
        out = sub[..., 0, 0]
        return out[()] if np.ndim(out) == 0 else out
    return determinant(sub)


def all_minors(n: int, m: int):
    """Every (rows, cols) index pair for minors of size ``m`` of an n x n matrix."""
    from itertools import combinations

    idx = list(combinations(range(n), m))
    return [(r, c) for r in idx for c in idx]


def _jacobi_eigvalsh(C: np.ndarray) -> np.ndarray:
    """Cyclic Jacobi on a stack of symmetric 3x3 matrices."""
    A = np.array(C, dtype=float, copy=True)
    for _ in range(_JACOBI_SWEEPS):
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = A[..., p, q]
            app, aqq = A[..., p, p], A[..., q, q]
            active = np.abs(apq) > 1e-18 * (np.abs(app) + np.abs(aqq))
            if not np.any(active):
                continue
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            with np.errstate(over="ignore"):
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- R^T A R with R the (p, q) plane rotation
            Ap = A[..., :, p].copy()
            Aq = A[..., :, q].copy()
            A[..., :, p] = c[..., None] * Ap - s[..., None] * Aq
            A[..., :, q] = s[..., None] * Ap + c[..., None] * Aq
            Ap = A[..., p, :].copy()
            Aq = A[..., q, :].copy()
            A[..., p, :] = c[..., None] * Ap - s[..., None] * Aq
            A[..., q, :] = s[..., None] * Ap + c[..., None] * Aq
    return np.sort(np.diagonal(A, axis1=-2, axis2=-1), axis=-1)[..., ::-1]


def sym_eigvalsh(C) -> np.ndarray:
    """Eigenvalues of symmetric 2x2/3x3 matrices in descending order.

    Closed form for n=2; trigonometric solution of the characteristic cubic
    for n=3 with a Jacobi fallback near repeated eigenvalues.
    """
    C = as_mat(C)
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    if C.shape[-1] == 2:
        half_tr = 0.5 * (C[..., 0, 0] + C[..., 1, 1])
        rad = np.hypot(0.5 * (C[..., 0, 0] - C[..., 1, 1]), C[..., 0, 1])
        return np.stack([half_tr + rad, half_tr - rad], axis=-1)

    q = np.trace(C, axis1=-2, axis2=-1) / 3.0
    off = C[..., 0, 1] ** 2 + C[..., 0, 2] ** 2 + C[..., 1, 2] ** 2
    diag = (C[..., 0, 0] - q) ** 2 + (C[..., 1, 1] - q) ** 2 + (C[..., 2, 2] - q) ** 2
    p = np.sqrt((diag + 2.0 * off) / 6.0)
    scale = np.maximum(np.max(np.abs(C), axis=(-2, -1)), np.finfo(float).tiny)
    safe_p = np.where(p > 0.0, p, 1.0)
    B = (C - q[..., None, None] * np.eye(3)) / safe_p[..., None, None]
    r = np.clip(0.5 * determinant(B), -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam1 = q + 2.0 * p * np.cos(phi)
    lam3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    lam2 = 3.0 * q - lam1 - lam3
    out = np.stack([lam1, lam2, lam3], axis=-1)

    near_repeated = (p <= _DISCRIMINANT_TOL * scale) | (1.0 - r * r < _DISCRIMINANT_TOL)
    if np.any(near_repeated):
        if out.ndim == 1:
            out = _jacobi_eigvalsh(C)
        else:
            out[near_repeated] = _jacobi_eigvalsh(C[near_repeated])
    return out


def singular_values(F) -> np.ndarray:
    """Singular values in descending order, via eigenvalues of F^T F."""
    F = as_mat(F)
    C = np.swapaxes(F, -1, -2) @ F
    return np.sqrt(np.maximum(sym_eigvalsh(C), 0.0))


def trace_power(F, gamma: float) -> np.ndarray | float:
    """``tr((F^T F)^(gamma/2))``, the sum of singular values raised to ``gamma``."""
    if gamma < 1:
        raise ValueError(f"trace_power needs gamma >= 1, got {gamma}")
    out = np.sum(singular_values(F) ** gamma, axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def operator_norm(F) -> np.ndarray | float:
    out = singular_values(F)[..., 0]
    return out[()] if np.ndim(out) == 0 else out


def frobenius_norm(F) -> np.ndarray | float:
    F = as_mat(F)
    out = np.sqrt(np.sum(F * F, axis=(-2, -1)))
    return out[()] if np.ndim(out) == 0 else out


def matrix_norm(F, kind: str = "operator"):
    if kind == "operator":
        return operator_norm(F)
    if kind == "frobenius":
        return frobenius_norm(F)
    raise ValueError(f"unknown norm {kind!r}; expected one of {NORMS}")
