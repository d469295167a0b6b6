"""Stored-energy densities W(x, F).

Every density works on stacks of matrices: ``F`` has shape ``(..., n, n)`` and
``eval`` returns an array of shape ``(...)``. The ``x`` argument (reference
point) is accepted everywhere so that heterogeneous densities fit the same
interface; all shipped densities ignore it.

Ogden-type densities expose ``g_form(F, A, d)``, a function convex in
``(F, A, d)`` that reproduces ``W`` when ``A = adj F`` and ``d = det F``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .tensor import adjugate, as_mat, determinant, singular_values, trace_power


class EnergyDomainError(ValueError):
    """Raised when F lies outside the domain of a density (e.g. det F <= 0)."""

    def __init__(self, message: str, det: float, index: int | None = None):
        super().__init__(message)
        self.det = det
        self.index = index


def _first_bad(mask: np.ndarray) -> int | None:
    if mask.ndim == 0:
        return None
    return int(np.flatnonzero(mask.ravel())[0])


@dataclass(frozen=True)
class PowerLaw:
    """Volumetric term c * d**r (convex on d >= 0 for r > 1)."""

    c: float
    r: float

    def __post_init__(self):
        if self.c <= 0 or self.r <= 1:
            raise ValueError(f"power-law volumetric term needs c > 0, r > 1 (got c={self.c}, r={self.r})")

    has_inverse = False

    def value(self, d):
        return self.c * np.maximum(d, 0.0) ** self.r

    def deriv(self, d):
        return self.c * self.r * np.maximum(d, 0.0) ** (self.r - 1.0)


@dataclass(frozen=True)
class PowerPlusInverse:
    """Volumetric term c * d**r + d_coef * d**(-s); blows up as d -> 0+."""

    c: float
    r: float
    d_coef: float
    s: float

    def __post_init__(self):
        if self.c <= 0 or self.r <= 1 or self.d_coef <= 0 or self.s <= 0:
            raise ValueError("volumetric term needs c > 0, r > 1, d_coef > 0, s > 0")

    has_inverse = True

    def value(self, d):
        return self.c * d**self.r + self.d_coef * d ** (-self.s)

    def deriv(self, d):
        return self.c * self.r * d ** (self.r - 1.0) - self.s * self.d_coef * d ** (-self.s - 1.0)


class EnergyDensity:
    """Base class: subclasses define ``_eval`` and ``_grad`` on validated input."""

    kind: str = "abstract"

    def check_domain(self, F: np.ndarray, d: np.ndarray) -> None:
        pass

    def eval(self, F, x=None):
        F = as_mat(F)
        d = determinant(F)
        self.check_domain(F, np.asarray(d))
        return self._eval(F, d)

    def grad(self, F, x=None) -> np.ndarray:
        """Analytic dW/dF, same shape as F."""
        F = as_mat(F)
        d = determinant(F)
        self.check_domain(F, np.asarray(d))
        return self._grad(F, d)

    def g_form(self, F, A, d, x=None):
        return None

    @property
    def has_g_form(self) -> bool:
        return False

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params()}


@dataclass
class OgdenEnergy(EnergyDensity):
    """sum_i a_i tr(F^T F)^(gamma_i/2) + sum_j b_j tr(Adj(F^T F))^(delta_j/2) + Gamma(det F).

    The adjugate term is read as ``tr((Adj(F^T F))^(delta/2))``, which equals
    the sum of the singular values of ``Adj F`` raised to ``delta``; in 3D
    those singular values are the pairwise products sigma_j * sigma_k.
    """

    a: Sequence[float] = (1.0,)
    gamma: Sequence[float] = (2.0,)
    b: Sequence[float] = ()
    delta: Sequence[float] = ()
    volumetric: PowerLaw | PowerPlusInverse = field(default_factory=lambda: PowerLaw(1.0, 2.0))
    kind: str = "ogden"

    def __post_init__(self):
        self.a, self.gamma = tuple(map(float, self.a)), tuple(map(float, self.gamma))
        self.b, self.delta = tuple(map(float, self.b)), tuple(map(float, self.delta))
        if len(self.a) != len(self.gamma) or len(self.b) != len(self.delta):
            raise ValueError("coefficient and exponent lists must have equal length")
        if any(v <= 0 for v in self.a + self.b):
            raise ValueError("Ogden coefficients a_i, b_j must be positive")
        if any(v < 1 for v in self.gamma + self.delta):
            raise ValueError("Ogden exponents gamma_i, delta_j must be >= 1")

    def check_domain(self, F, d):
        bad = d <= 0 if self.volumetric.has_inverse else d < 0
        if np.any(bad):
            i = _first_bad(bad)
            det = float(d if i is None else d.ravel()[i])
            raise EnergyDomainError(f"{self.kind}: det F = {det:.6g} outside domain", det, i)

    @staticmethod
    def _adj_sigma_terms(sig: np.ndarray, delta: float) -> np.ndarray:
        n = sig.shape[-1]
        if n == 2:
            return np.sum(sig**delta, axis=-1)
        return sum((sig[..., j] * sig[..., k]) ** delta for j, k in combinations(range(3), 2))

    def _eval(self, F, d):
        sig = singular_values(F)
        out = sum(ai * np.sum(sig**gi, axis=-1) for ai, gi in zip(self.a, self.gamma))
        for bj, dj in zip(self.b, self.delta):
            out = out + bj * self._adj_sigma_terms(sig, dj)
        return out + self.volumetric.value(d)

    def _grad(self, F, d):
        U, sig, Vh = np.linalg.svd(F)
        n = F.shape[-1]
        dsig = np.zeros_like(sig)
        for ai, gi in zip(self.a, self.gamma):
            dsig += ai * gi * sig ** (gi - 1.0)
        for bj, dj in zip(self.b, self.delta):
            if n == 2:
                dsig += bj * dj * sig ** (dj - 1.0)
            else:
                p = sig**dj
                for i in range(3):
                    others = [k for k in range(3) if k != i]
                    dsig[..., i] += bj * dj * sig[..., i] ** (dj - 1.0) * (p[..., others[0]] + p[..., others[1]])
        iso = (U * dsig[..., None, :]) @ Vh
        vol = self.volumetric.deriv(d)
        return iso + np.asarray(vol)[..., None, None] * np.swapaxes(adjugate(F), -1, -2)

    @property
    def has_g_form(self) -> bool:
        return True

    def g_form(self, F, A, d, x=None):
        """Convex representative G(F, A, d) evaluated on arbitrary (F, A, d>0)."""
        F, A = as_mat(F), as_mat(A)
        d = np.asarray(d, dtype=float)
        out = sum(ai * trace_power(F, gi) for ai, gi in zip(self.a, self.gamma))
        for bj, dj in zip(self.b, self.delta):
            out = out + bj * trace_power(A, dj)
        return out + self.volumetric.value(d)

    def params(self) -> dict:
        vol = self.volumetric
        p = {"a": list(self.a), "gamma": list(self.gamma), "b": list(self.b), "delta": list(self.delta)}
        p.update({"c": vol.c, "r": vol.r})
        if isinstance(vol, PowerPlusInverse):
            p.update({"d_coef": vol.d_coef, "s": vol.s})
        return p


def w1(a=1.0, b=1.0, c=1.0, d=1.0, p=4.0, q=4.0, r=2.0, s=9.0) -> OgdenEnergy:
    """a tr((F^T F)^(p/2)) + b tr((Adj(F^T F))^(q/2)) + c det^r + d det^(-s), i.e.
    a sum sigma_i^p + b sum sigma(Adj F)_i^q + c det^r + d det^(-s)."""
    if min(a, b, c, d) <= 0:
        raise ValueError("w1 needs a, b, c, d > 0")
    if p <= 3 or q <= 3 or r <= 1:
        raise ValueError("w1 needs p > 3, q > 3, r > 1")
    if s <= 2 * q / (q - 3):
        raise ValueError(f"w1 needs s > 2q/(q-3) = {2 * q / (q - 3):.6g}, got s={s}")
    e = OgdenEnergy(a=(a,), gamma=(p,), b=(b,), delta=(q,), volumetric=PowerPlusInverse(c, r, d, s), kind="w1")
    return e


def w2(a=1.0, c=1.0, r=2.0) -> OgdenEnergy:
    """a tr((F^T F)^(3/2)) + c det^r = a sum sigma_i^3 + c det^r, defined for det F >= 0."""
    if a <= 0 or c <= 0 or r <= 1:
        raise ValueError("w2 needs a > 0, c > 0, r > 1")
    return OgdenEnergy(a=(a,), gamma=(3.0,), volumetric=PowerLaw(c, r), kind="w2")


@dataclass
class SaintVenantKirchhoff(EnergyDensity):
    """lam/2 (tr E)^2 + mu tr E^2 with I + 2E = F^T F. Not polyconvex."""

    lam: float = 1.0
    mu: float = 1.0
    kind: str = "svk"

    def _strain(self, F):
        n = F.shape[-1]
        return 0.5 * (np.swapaxes(F, -1, -2) @ F - np.eye(n))

    def _eval(self, F, d):
        E = self._strain(F)
        trE = np.trace(E, axis1=-2, axis2=-1)
        return 0.5 * self.lam * trE**2 + self.mu * np.sum(E * E, axis=(-2, -1))

    def _grad(self, F, d):
        E = self._strain(F)
        n = F.shape[-1]
        trE = np.trace(E, axis1=-2, axis2=-1)
        S = self.lam * trE[..., None, None] * np.eye(n) + 2.0 * self.mu * E
        return F @ S

    def params(self) -> dict:
        return {"lam": self.lam, "mu": self.mu}


@dataclass
class DetOnly(EnergyDensity):
    """W(F) = det F: polyconvex (G linear in d) but neither convex nor coercive."""

    kind: str = "det_only"

    def _eval(self, F, d):
        return np.asarray(d, dtype=float)[()]

    def _grad(self, F, d):
        return np.swapaxes(adjugate(F), -1, -2)

    @property
    def has_g_form(self) -> bool:
        return True

    def g_form(self, F, A, d, x=None):
        return np.asarray(d, dtype=float)[()]


def make_energy(kind: str, **params) -> EnergyDensity:
    """Build a density from a kind tag and keyword parameters."""
    kind = kind.lower().replace("-", "_")
    if kind == "w1":
        return w1(**params)
    if kind == "w2":
        return w2(**params)
    if kind == "svk":
        return SaintVenantKirchhoff(**params)
    if kind == "det_only":
        if params:
            raise ValueError(f"det_only takes no parameters, got {sorted(params)}")
        return DetOnly()
    if kind == "ogden":
        c, r = params.pop("c", 1.0), params.pop("r", 2.0)
        if "s" in params or "d_coef" in params:
            vol = PowerPlusInverse(c, r, params.pop("d_coef", 1.0), params.pop("s"))
        else:
            vol = PowerLaw(c, r)
        return OgdenEnergy(volumetric=vol, **params)
    raise ValueError(f"unknown energy kind {kind!r}")
