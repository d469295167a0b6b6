"""Jacobian and distortion fields, L_s norms and class-membership reports."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..mesh import Deformation
from ..tensor import determinant, matrix_norm
from .degree import DegenerateConfigurationError, banach_indicatrix, sense_preserving_check, topological_degree

K_SLACK = 1e-10


def jacobian_field(phi: Deformation) -> np.ndarray:
    return np.atleast_1d(determinant(phi.element_gradients().F))


@dataclass
class DistortionField:
    """Per-element J and K = |F|^n / J.

    Conventions: K = 1 where J = 0 and F = 0; K = inf (flagged) where J = 0
    and F != 0. Elements with J < 0 get K = |F|^n / |J| and are listed in
    ``inverted``; they never satisfy a class-membership test.
    """

    J: np.ndarray
    K: np.ndarray
    volumes: np.ndarray
    norm: str = "operator"

    @property
    def infinite(self) -> np.ndarray:
        return np.flatnonzero(np.isinf(self.K))

    @property
    def inverted(self) -> np.ndarray:
        return np.flatnonzero(self.J < 0)

    @property
    def finite_distortion(self) -> bool:
        return not np.any(np.isinf(self.K))

    @property
    def max_K(self) -> float:
        return float(np.max(self.K))

    def summary(self) -> dict:
        finite = self.K[np.isfinite(self.K)]
        return {
            "norm": self.norm,
            "min": float(finite.min()) if len(finite) else math.inf,
            "max": self.max_K,
            "infinite_elements": self.infinite.tolist(),
            "inverted_elements": self.inverted.tolist(),
        }


def distortion_from_gradients(F: np.ndarray, volumes: np.ndarray, norm: str = "operator") -> DistortionField:
    F = np.asarray(F, dtype=float)
    n = F.shape[-1]
    J = np.atleast_1d(determinant(F))
    normF = np.atleast_1d(matrix_norm(F, norm))
    num = normF**n
    K = np.empty_like(J)
    zero = J == 0
    with np.errstate(divide="ignore"):
        K[~zero] = num[~zero] / np.abs(J[~zero])
    K[zero] = np.where(num[zero] == 0, 1.0, np.inf)
    return DistortionField(J, K, np.asarray(volumes, dtype=float), norm)


def distortion_field(phi: Deformation, norm: str = "operator") -> DistortionField:
    eg = phi.element_gradients()
    return distortion_from_gradients(eg.F, eg.volume, norm)


def ls_norm(values, volumes, s: float) -> float:
    """(sum_T |T| |v_T|^s)^(1/s) for a piecewise-constant field; inf if any entry is."""
    if s < 1:
        raise ValueError(f"L_s norm needs s >= 1, got {s}")
    v = np.abs(np.asarray(values, dtype=float))
    vol = np.broadcast_to(np.asarray(volumes, dtype=float), v.shape)
    if np.any(np.isinf(v)):
        return math.inf
    if math.isinf(s):
        return float(v.max())
    # factor out the maximum so large exponents do not overflow
    top = float(v.max()) if v.size else 0.0
    if top == 0.0:
        return 0.0
    return top * math.fsum(vol * (v / top) ** s) ** (1.0 / s)


@dataclass
class BoundField:
    """Distortion bound M (constant or per element) with integrability exponent s."""

    M: float | np.ndarray
    s: float
    dim: int = 2

    def __post_init__(self):
        if not self.s > self.dim - 1:
            raise ValueError(f"bound exponent s must exceed n-1 = {self.dim - 1}, got {self.s}")
        M = np.asarray(self.M, dtype=float)
        if np.any(M < 0) or not np.all(np.isfinite(M)):
            raise ValueError("bound field M must be finite and nonnegative")
        if np.any(M < 1):
            warnings.warn("bound field has entries below 1; no deformation can have K < 1", stacklevel=2)

    def values(self, n_elements: int) -> np.ndarray:
        M = np.asarray(self.M, dtype=float)
        if M.ndim == 0:
            return np.full(n_elements, float(M))
        if M.shape != (n_elements,):
            raise ValueError(f"bound field has {M.size} entries for {n_elements} elements")
        return M

    def norm(self, volumes) -> float:
        return ls_norm(self.values(len(volumes)), volumes, self.s)


@dataclass
class AdmissibilityReport:
    min_jacobian: float
    max_jacobian: float
    max_distortion: float
    distortion: dict
    ls_norm_K: float | None
    ls_norm_M: float | None
    s: float | None
    max_K_over_M: float | None
    in_A: bool | None
    in_AB: bool
    violations: dict = field(default_factory=dict)
    degree_samples: list = field(default_factory=list)
    indicatrix_samples: list = field(default_factory=list)
    sense_preserving: bool | None = None

    def to_dict(self) -> dict:
        return {
            "min_jacobian": self.min_jacobian,
            "max_jacobian": self.max_jacobian,
            "max_distortion": self.max_distortion,
            "distortion": self.distortion,
            "ls_norm_K": self.ls_norm_K,
            "ls_norm_M": self.ls_norm_M,
            "s": self.s,
            "max_K_over_M": self.max_K_over_M,
            "in_A": self.in_A,
            "in_AB": self.in_AB,
            "violations": self.violations,
            "degree_samples": self.degree_samples,
            "indicatrix_samples": self.indicatrix_samples,
            "sense_preserving": self.sense_preserving,
        }

    def recompute_in_AB(self) -> bool:
        return self.min_jacobian > 0

    def recompute_in_A(self) -> bool | None:
        if self.s is None:
            return None
        return (
            self.min_jacobian >= 0
            and math.isfinite(self.max_distortion)
            and self.max_K_over_M is not None
            and self.max_K_over_M <= 1.0 + K_SLACK
            and self.ls_norm_M is not None
            and math.isfinite(self.ls_norm_M)
        )


def _injectivity_samples(phi: Deformation, samples: int, seed: int):
    """Degree and indicatrix at images of random element centroids."""
    mesh = phi.mesh
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(mesh.n_elements, size=min(samples, mesh.n_elements), replace=False))
    Y = phi.element_images().mean(axis=1)
    degs, inds = [], []
    for e in picks:
        y = Y[e]
        q = banach_indicatrix(phi, y)
        inds.append({"element": int(e), "point": q.point.tolist(), "count": q.value, "nudged": q.nudged})
        try:
            d = topological_degree(phi, y)
        except DegenerateConfigurationError as exc:
            degs.append({"element": int(e), "point": y.tolist(), "degree": None, "error": str(exc)})
        else:
            degs.append({"element": int(e), "point": y.tolist(), "degree": d})
    return degs, inds


def _report(phi: Deformation, bound: BoundField | None, norm: str, samples: int, seed: int) -> AdmissibilityReport:
    dist = distortion_field(phi, norm)
    J, K, vol = dist.J, dist.K, dist.volumes
    violations: dict = {}
    if len(dist.inverted):
        violations["negative_jacobian"] = dist.inverted.tolist()
    if np.any(J == 0):
        violations["zero_jacobian"] = np.flatnonzero(J == 0).tolist()
    if len(dist.infinite):
        violations["infinite_distortion"] = dist.infinite.tolist()

    ls_K = ls_M = ratio = s = None
    in_A = None
    if bound is not None:
        s = float(bound.s)
        M = bound.values(len(J))
        ls_M = bound.norm(vol)
        ls_K = ls_norm(K, vol, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(M > 0, K / np.where(M > 0, M, 1.0), np.where(K > 0, np.inf, 0.0))
        ratio = float(np.max(r))
        over = np.flatnonzero(K > M * (1.0 + K_SLACK))
        if len(over):
            violations["distortion_bound"] = over.tolist()
    report = AdmissibilityReport(
        min_jacobian=float(J.min()),
        max_jacobian=float(J.max()),
        max_distortion=dist.max_K,
        distortion=dist.summary(),
        ls_norm_K=ls_K,
        ls_norm_M=ls_M,
        s=s,
        max_K_over_M=ratio,
        in_A=None,
        in_AB=bool(J.min() > 0),
        violations=violations,
    )
    report.in_A = report.recompute_in_A()
    if samples > 0:
        report.degree_samples, report.indicatrix_samples = _injectivity_samples(phi, samples, seed)
        report.sense_preserving = sense_preserving_check(phi, samples, seed).verdict
    return report


def check_class_A(phi: Deformation, bound: BoundField, norm: str = "operator",
                  samples: int = 8, seed: int = 0) -> AdmissibilityReport:
    """Finite-distortion class with K <= M (relative slack 1e-10) and M in L_s."""
    if bound.dim != phi.mesh.dim:
        bound = BoundField(bound.M, bound.s, phi.mesh.dim)
    return _report(phi, bound, norm, samples, seed)


def check_class_AB(phi: Deformation, norm: str = "operator", samples: int = 8, seed: int = 0) -> AdmissibilityReport:
    """Positive-Jacobian class: every element has J > 0."""
    return _report(phi, None, norm, samples, seed)
