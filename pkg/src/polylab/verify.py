"""Sampled diagnostics for stored-energy densities.

These are necessary-condition searches: a reported witness is a genuine
counterexample (up to the stated slack), while a pass only means that none was
found among the sampled matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyDensity, EnergyDomainError
from .tensor import adjugate, determinant, matrix_norm

SLACK = 1e-10


@dataclass
class Verdict:
    status: str
    trials: int = 0
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in ("pass", "no-violation", "holds")

    def to_dict(self) -> dict:
        return {"status": self.status, "trials": self.trials, "witness": self.witness, **self.details}


def random_rotations(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Haar-distributed rotations (det +1) via QR of Gaussian matrices."""
    Q, R = np.linalg.qr(rng.standard_normal((count, n, n)))
    Q = Q * np.sign(np.diagonal(R, axis1=-2, axis2=-1))[:, None, :]
    flip = np.linalg.det(Q) < 0
    Q[flip, :, 0] *= -1.0
    return Q


def sample_matrices(rng: np.random.Generator, count: int, n: int, lo: float = 1e-3, hi: float = 1e3) -> np.ndarray:
    """F = Q1 diag(sigma) Q2 with log-uniform sigma in [lo, hi]; det F > 0."""
    sigma = np.exp(rng.uniform(np.log(lo), np.log(hi), size=(count, n)))
    Q1 = random_rotations(rng, count, n)
    Q2 = random_rotations(rng, count, n)
    return (Q1 * sigma[:, None, :]) @ Q2


def _tol(*vals) -> np.ndarray:
    return SLACK * (1.0 + sum(np.abs(v) for v in vals))


def check_polyconvexity_sampled(energy: EnergyDensity, trials: int = 1000, seed: int = 0, n: int = 3) -> Verdict:
    """Midpoint convexity of the energy's convex representative G(F, A, d).

    Endpoints are drawn from the graph {(F, adj F, det F) : det F > 0}, so the
    midpoint always has d > 0.
    """
    if not energy.has_g_form:
        return Verdict("not-applicable")
    rng = np.random.default_rng(seed)
    F1, F2 = sample_matrices(rng, trials, n), sample_matrices(rng, trials, n)
    u = (F1, adjugate(F1), determinant(F1))
    v = (F2, adjugate(F2), determinant(F2))
    mid = tuple(0.5 * (p + q) for p, q in zip(u, v))
    gu, gv, gm = energy.g_form(*u), energy.g_form(*v), energy.g_form(*mid)
    bad = gm > 0.5 * (gu + gv) + _tol(gu, gv)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        return Verdict("violation", trials, {"F1": F1[i].tolist(), "F2": F2[i].tolist(),
                                             "g_mid": float(gm[i]), "g_avg": float(0.5 * (gu[i] + gv[i]))})
    return Verdict("pass", trials)


def check_convexity_sampled(energy: EnergyDensity, trials: int = 1000, seed: int = 0, n: int = 2) -> Verdict:
    """Midpoint convexity of W as a function of F alone (pairs with det > 0)."""
    rng = np.random.default_rng(seed)
    F1 = sample_matrices(rng, trials, n, 1e-1, 1e1)
    F2 = sample_matrices(rng, trials, n, 1e-1, 1e1)
    Fm = 0.5 * (F1 + F2)
    keep = determinant(Fm) > 0
    F1, F2, Fm = F1[keep], F2[keep], Fm[keep]
    w1, w2, wm = energy.eval(F1), energy.eval(F2), energy.eval(Fm)
    bad = wm > 0.5 * (w1 + w2) + _tol(w1, w2)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        return Verdict("violation", trials, {"F1": F1[i].tolist(), "F2": F2[i].tolist(),
                                             "w_mid": float(wm[i]), "w_avg": float(0.5 * (w1[i] + w2[i]))})
    return Verdict("pass", trials)


def _stretch_family(n: int, ts: np.ndarray) -> np.ndarray:
    """diag(t, 1/t, 1, ...) and diag(t, t, ...) families on a t-grid."""
    out = []
    for t in ts:
        D = np.ones(n)
        D[0], D[1] = t, 1.0 / t
        out.append(np.diag(D))
        out.append(t * np.eye(n))
    return np.array(out)


def check_coercivity_sampled(
    energy: EnergyDensity,
    alpha: float,
    r: float,
    g_const: float = 0.0,
    trials: int = 1000,
    seed: int = 0,
    n: int = 3,
    norm: str = "frobenius",
) -> Verdict:
    """Search for F with det F > 0 violating W(F) >= alpha(|F|^n + det(F)^r) + g_const."""
    if alpha <= 0 or r <= 1:
        raise ValueError("coercivity check needs alpha > 0 and r > 1")
    rng = np.random.default_rng(seed)
    F = np.concatenate([sample_matrices(rng, trials, n), _stretch_family(n, np.logspace(-3, 3, 25))])
    W = energy.eval(F)
    det = determinant(F)
    rhs = alpha * (matrix_norm(F, norm) ** n + det**r) + g_const
    bad = W < rhs - _tol(W, rhs)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        return Verdict("violation", len(F), {"F": F[i].tolist(), "W": float(W[i]), "bound": float(rhs[i])})
    return Verdict("no-violation", len(F), details={"min_margin": float(np.min(W - rhs))})


def check_barrier_condition(energy: EnergyDensity, n: int = 3, decades: int = 12, threshold: float = 1e6) -> Verdict:
    """Probe W along F_k = diag(eps_k, 1, ...) with eps_k = 10^-1 ... 10^-decades.

    "holds" when the tail of the sequence increases monotonically and ends
    above ``threshold * (1 + |W(I)|)``; "fails" otherwise. Leaving the domain
    (an inverse-determinant term rejecting the matrix) counts as blow-up.
    """
    eps = 10.0 ** -np.arange(1, decades + 1)
    vals = []
    for e in eps:
        D = np.ones(n)
        D[0] = e
        try:
            vals.append(float(energy.eval(np.diag(D))))
        except EnergyDomainError:
            vals.append(np.inf)
    vals = np.array(vals)
    ref = float(energy.eval(np.eye(n)))
    tail = vals[len(vals) // 2:]
    monotone = all(b > a or (np.isinf(a) and np.isinf(b)) for a, b in zip(tail, tail[1:]))
    blows_up = monotone and tail[-1] > threshold * (1.0 + abs(ref))
    details = {"eps": eps.tolist(), "values": vals.tolist()}
    return Verdict("holds" if blows_up else "fails", len(eps), None, details)


def energy_scan(energy: EnergyDensity, n: int, alpha: float, r: float, g_const: float,
                trials: int, seed: int) -> dict[str, Verdict]:
    """Run the whole verifier suite for one density."""
    return {
        "polyconvexity": check_polyconvexity_sampled(energy, trials, seed, n),
        "convexity": check_convexity_sampled(energy, trials, seed, n),
        "coercivity": check_coercivity_sampled(energy, alpha, r, g_const, trials, seed, n),
        "barrier": check_barrier_condition(energy, n),
    }


__all__ = [
    "Verdict",
    "check_barrier_condition",
    "check_convexity_sampled",
    "check_coercivity_sampled",
    "check_polyconvexity_sampled",
    "energy_scan",
    "random_rotations",
    "sample_matrices",
]
