"""Affine-competitor and sequence experiments built on the discrete energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..energy import EnergyDensity, EnergyDomainError
from ..mesh import Deformation, SimplicialMesh, total_energy

QC_SLACK = 1e-10


@dataclass
class QuasiconvexityResult:
    status: str
    trials: int
    reference: float
    min_energy: float
    max_deviation: float
    witness: dict | None = None
    skipped: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"status": self.status, "trials": self.trials, "reference": self.reference,
                "min_energy": self.min_energy, "max_deviation": self.max_deviation,
                "witness": self.witness, "skipped": self.skipped}


def random_interior_perturbation(phi: Deformation, rng: np.random.Generator, max_amplitude: float = 0.45,
                                 min_det_fraction: float = 0.1) -> Deformation | None:
    """phi + zeta with zeta zero on boundary nodes, halved until every element
    keeps det >= min_det_fraction times its unperturbed value.

    The amplitude is drawn uniformly in (0, max_amplitude) times the mesh size;
    roughly half the trials use a smooth bubble-weighted field, the rest
    independent nodal noise.
    """
    mesh = phi.mesh
    interior = mesh.interior_nodes
    amp = rng.uniform(0.0, max_amplitude) * mesh.h
    if rng.random() < 0.5:
        zeta = rng.uniform(-1.0, 1.0, size=(len(interior), mesh.dim))
    else:
        x = mesh.vertices[interior]
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        u = (x - lo) / (hi - lo)
        bubble = np.prod(np.sin(np.pi * u), axis=1)
        k = rng.integers(1, 4, size=mesh.dim)
        phase = rng.uniform(0, 2 * np.pi, size=mesh.dim)
        wave = np.sin(np.pi * (u @ k)[:, None] + phase)
        zeta = bubble[:, None] * wave * rng.choice([-1.0, 1.0], size=mesh.dim) / mesh.h
    scale = amp / max(float(np.max(np.abs(zeta))), 1e-300)
    J0 = phi.element_gradients().jacobian
    for _ in range(40):
        trial = phi.copy()
        trial.images[interior] += scale * zeta
        J = trial.element_gradients().jacobian
        if np.all(J > 0) and np.all(J >= min_det_fraction * J0):
            return trial
        scale *= 0.5
    return None


def quasiconvexity_affine_test(W: EnergyDensity, F0, mesh: SimplicialMesh, trials: int = 1000, seed: int = 0,
                               slack: float = QC_SLACK) -> QuasiconvexityResult:
    """Search for interior perturbations of the affine map F0 x that lower the energy.

    Passes when every trial satisfies E(F0 x + zeta) >= |Omega| W(F0) - slack * max(1, |ref|).
    ``max_deviation`` is the largest |E - ref| seen, which for a null
    Lagrangian measures how exactly the energy is preserved.
    """
    F0 = np.asarray(F0, dtype=float)
    rng = np.random.default_rng(seed)
    base = Deformation.affine(mesh, F0)
    ref = mesh.total_volume() * float(W.eval(F0))
    tol = slack * max(1.0, abs(ref))
    worst, dev, witness, skipped = math.inf, 0.0, None, 0
    for i in range(trials):
        trial = random_interior_perturbation(base, rng)
        if trial is None:
            skipped += 1
            continue
        try:
            E = total_energy(trial, W)
        except EnergyDomainError:
            skipped += 1
            continue
        dev = max(dev, abs(E - ref))
        if E < worst:
            worst = E
        if E < ref - tol and witness is None:
            disp = trial.images - base.images
            witness = {"trial": i, "energy": E, "reference": ref,
                       "max_displacement": float(np.max(np.abs(disp)))}
    status = "violation" if witness is not None else "pass"
    return QuasiconvexityResult(status, trials, ref, worst, dev, witness, skipped)


@dataclass
class SemicontinuityTable:
    k: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    limit: list = field(default_factory=list)
    verdict: bool = False
    tail_min: float = math.nan

    def rows(self) -> list[dict]:
        return [{"k": k, "I_k": e, "I_0": l} for k, e, l in zip(self.k, self.energy, self.limit)]

    def to_dict(self) -> dict:
        return {"rows": self.rows(), "tail_min": self.tail_min, "holds": self.verdict}


def semicontinuity_experiment(family, W: EnergyDensity, ks: Sequence[int] = (1, 2, 4, 8),
                              rel_slack: float = 1e-8) -> SemicontinuityTable:
    """I(phi_k) and I(phi_0) per k; holds iff I(phi_0) <= min over the last
    ceil(len/2) members + rel_slack * max(1, |I(phi_0)|)."""
    table = SemicontinuityTable()
    for k in ks:
        phi_k, phi_0 = family.member(k)
        table.k.append(int(k))
        table.energy.append(total_energy(phi_k, W))
        table.limit.append(total_energy(phi_0, W))
    tail = table.energy[len(table.energy) // 2:]
    table.tail_min = min(tail)
    ref = table.limit[-1]
    table.verdict = bool(ref <= table.tail_min + rel_slack * max(1.0, abs(ref)))
    return table
