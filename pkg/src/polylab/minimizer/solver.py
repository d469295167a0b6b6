"""Preconditioned gradient descent with backtracking, a fraction-to-boundary
cap, log-det barrier continuation and an augmented-Lagrangian distortion bound."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from ..admissibility.distortion import BoundField
from ..energy import EnergyDensity, EnergyDomainError
from ..mesh import BoundaryData, Deformation, SimplicialMesh, interpolate_boundary
from .objective import BodyForce, Constraints, evaluate
from .step import max_feasible_step

PRECONDITIONERS = ("laplacian", "none")
_ROUNDING = 1e-15
_NOISY = 1e3
_WOLFE_SHRINK = 0.9


class InfeasibleStartError(RuntimeError):
    pass


class LineSearchError(RuntimeError):
    def __init__(self, message: str, trace: "MinimizationTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class MinimizerConfig:
    eps_start: float = 1e-2
    eps_min: float = 1e-8
    eps_factor: float = 0.1
    beta: float | None = None
    tau: float = 0.9
    grad_tol: float = 1e-8
    max_iter: int = 100_000
    shrink: float = 0.5
    c1: float = 1e-4
    max_backtracks: int = 60
    al_rounds: int = 30
    bound_tol: float = 1e-6
    perturb: float = 0.0
    preconditioner: str = "laplacian"
    norm: str = "operator"
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0 < self.tau < 1:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not 0 < self.shrink < 1:
            raise ValueError(f"shrink must lie in (0, 1), got {self.shrink}")
        if not 0 < self.c1 < 1:
            raise ValueError(f"c1 must lie in (0, 1), got {self.c1}")
        if self.grad_tol <= 0 or self.bound_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.eps_start < 0 or self.eps_min < 0 or self.eps_min > self.eps_start:
            raise ValueError("barrier weights need 0 <= eps_min <= eps_start")
        if self.eps_start > 0 and not 0 < self.eps_factor < 1:
            raise ValueError("eps_factor must lie in (0, 1)")
        if self.beta is not None and self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.max_iter < 1 or self.max_backtracks < 1 or self.al_rounds < 0:
            raise ValueError("iteration limits must be positive")
        if self.perturb < 0:
            raise ValueError("perturb must be nonnegative")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def eps_schedule(self) -> list[float]:
        if self.eps_start == 0:
            return [0.0]
        out, e = [], self.eps_start
        while e > self.eps_min * (1 + 1e-9):
            out.append(e)
            e *= self.eps_factor
        out.append(self.eps_min)
        return out

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MinimizationTrace:
    records: list = field(default_factory=list)
    termination: str = ""
    rounds: list = field(default_factory=list)

    def append(self, **rec) -> None:
        self.records.append(rec)

    def column(self, key: str) -> list:
        return [r[key] for r in self.records]

    def to_jsonl(self) -> str:
        from ..serialize import dumps

        return "".join(dumps(r, indent=None) + "\n" for r in self.records)

    def summary(self) -> dict:
        last = self.records[-1] if self.records else {}
        return {"iterations": len(self.records) - 1 if self.records else 0, "termination": self.termination,
                "final": last, "rounds": self.rounds}


@dataclass
class _Problem:
    phi: Deformation
    W: EnergyDensity
    con: Constraints
    interior: np.ndarray
    solve: object
    scale_h: float
    volume: float
    workers: int


def _preconditioner(mesh: SimplicialMesh, interior: np.ndarray, kind: str):
    if kind == "none" or len(interior) == 0:
        return lambda g: g
    L = mesh.stiffness_matrix().tocsc()[interior][:, interior].tocsc()
    lu = spla.splu(L)
    return lambda g: lu.solve(g)


def _relative_gradient(g: np.ndarray, obj: float, prob: _Problem) -> float:
    if g.size == 0:
        return 0.0
    density = max(abs(obj) / prob.volume, 1e-300)
    return float(np.max(np.abs(g))) / (density * prob.scale_h)


def _perturbed_start(phi: Deformation, interior: np.ndarray, amplitude: float, seed: int) -> Deformation:
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=(len(interior), phi.mesh.dim)) * amplitude * phi.mesh.h
    for _ in range(60):
        trial = phi.copy()
        trial.images[interior] += noise
        if np.all(trial.element_gradients().jacobian > 0):
            return trial
        noise *= 0.5
    return phi


def _initial_step(prev, g: np.ndarray, solve, t_prev: float) -> float:
    """Barzilai-Borwein step length in the preconditioner metric.

    With s the last displacement and y the gradient change, t = (s.y) / (y.P y)
    where P applies the preconditioner; falls back to 2 * t_prev when the
    curvature estimate is not positive.
    """
    if prev is None:
        return t_prev
    s_vec, g_old = prev
    y = g - g_old
    sy = float(np.sum(s_vec * y))
    Py = np.column_stack([solve(y[:, j]) for j in range(y.shape[1])])
    yPy = float(np.sum(y * Py))
    if sy <= 0 or yPy <= 0:
        return 2.0 * t_prev
    return min(sy / yPy, 1e3 * t_prev)


def _inner_solve(prob: _Problem, tol: float, budget: int, trace: MinimizationTrace, it0: int,
                 cfg: MinimizerConfig, round_id: int) -> tuple[int, str]:
    phi, interior = prob.phi, prob.interior
    val, G = evaluate(phi, prob.W, prob.con, prob.workers)
    t_prev = 1.0
    prev = None  # (step vector, gradient) of the last accepted iterate
    it = it0
    while True:
        g = G[interior]
        rel = _relative_gradient(g, val.objective, prob)
        if rel <= tol:
            return it, "converged"
        if it - it0 >= budget or it >= cfg.max_iter:
            return it, "max_iterations"
        d_int = -np.column_stack([prob.solve(g[:, j]) for j in range(g.shape[1])])
        slope = float(np.sum(g * d_int))
        if not slope < 0:
            # the preconditioned direction lost descent; fall back to steepest descent
            d_int = -g
            slope = float(np.sum(g * d_int))
        direction = np.zeros_like(phi.images)
        direction[interior] = d_int
        t_max = max_feasible_step(phi, direction, cfg.tau)
        t = min(_initial_step(prev, g, prob.solve, t_prev), t_max)
        predicted = abs(slope) * t
        floor = _ROUNDING * max(abs(val.objective), 1e-300)
        accepted = None
        for bt in range(cfg.max_backtracks):
            trial = phi.copy()
            trial.images[interior] += t * d_int
            try:
                tv, tG = evaluate(trial, prob.W, prob.con, prob.workers)
            except EnergyDomainError:
                t *= cfg.shrink
                continue
            required = cfg.c1 * t * slope
            # an accepted Armijo step must also show a decrease above rounding level
            if tv.objective <= val.objective + required and val.objective - tv.objective > floor:
                accepted = (trial, tv, tG, bt, "armijo")
                break
            if t * abs(slope) <= _NOISY * floor and tv.objective <= val.objective:
                # objective differences are at rounding level: certify progress by
                # the directional derivative instead (approximate Wolfe test)
                slope_t = float(np.sum(tG[interior] * d_int))
                if abs(slope_t) <= _WOLFE_SHRINK * abs(slope):
                    accepted = (trial, tv, tG, bt, "approx_wolfe")
                    break
            t *= cfg.shrink
        if accepted is None:
            # the model decrease at the natural step is below the objective's rounding level
            if predicted <= _NOISY * floor:
                return it, "stalled"
            trace.termination = "line_search_failure"
            raise LineSearchError(f"line search failed at iteration {it} (relative gradient {rel:.3e})", trace)
        phi_new, val, G, bt, rule = accepted
        prev = (t * d_int, g)
        prob.phi.images[...] = phi_new.images
        it += 1
        t_prev = t
        trace.append(iter=it, round=round_id, eps=prob.con.eps, energy=val.energy, objective=val.objective,
                     grad_max=float(np.max(np.abs(g))), rel_grad=rel, step=t, t_max=t_max, backtracks=bt,
                     rule=rule, slope=slope, min_det=val.min_det, max_K_over_M=val.max_K_over_M)


def minimize(mesh: SimplicialMesh, W: EnergyDensity, boundary: BoundaryData, bound: BoundField | None = None,
             config: MinimizerConfig | None = None, body_force: BodyForce | None = None,
             start: Deformation | None = None) -> tuple[Deformation, MinimizationTrace]:
    """Minimize the discrete energy over interior nodes with Dirichlet data ``boundary``.

    Rounds: one per barrier weight of the continuation schedule; when a
    distortion bound is given, further rounds at the final barrier weight
    update the multipliers until max K/M <= 1 + bound_tol. If the bound is
    still violated after the last round the termination is "bound_not_met".
    """
    cfg = config or MinimizerConfig()
    cfg.validate()
    phi = interpolate_boundary(mesh, boundary) if start is None else start.copy()
    J = phi.element_gradients().jacobian
    if np.any(J <= 0):
        bad = int(np.flatnonzero(J <= 0)[0])
        raise InfeasibleStartError(f"initial deformation has det <= 0 at element {bad} (J = {J[bad]:.6g})")
    interior = mesh.interior_nodes
    boundary_nodes = mesh.boundary_nodes
    target_boundary = phi.images[boundary_nodes].copy()
    if cfg.perturb > 0:
        phi = _perturbed_start(phi, interior, cfg.perturb, cfg.seed)

    con = Constraints(norm=cfg.norm, body_force=body_force)
    if bound is not None:
        # aim slightly inside the bound so the returned map passes the strict membership test
        con.M_report = bound.values(mesh.n_elements)
        con.M = con.M_report * (1.0 - cfg.bound_tol)
        scale = max(abs(float(W.eval(np.eye(mesh.dim)))), 1.0)
        con.beta = 1e2 * scale if cfg.beta is None else cfg.beta
        con.lam = np.zeros(mesh.n_elements)

    prob = _Problem(phi, W, con, interior, _preconditioner(mesh, interior, cfg.preconditioner),
                    mesh.h ** (mesh.dim - 1), mesh.total_volume(), cfg.workers)
    trace = MinimizationTrace()
    val, G = evaluate(phi, W, con, cfg.workers)
    trace.append(iter=0, round=0, eps=cfg.eps_schedule()[0], energy=val.energy, objective=val.objective,
                 grad_max=float(np.max(np.abs(G[interior]))) if len(interior) else 0.0, rel_grad=None, step=0.0,
                 t_max=None, backtracks=0, slope=None, min_det=val.min_det, max_K_over_M=val.max_K_over_M)

    schedule = cfg.eps_schedule()
    plan = [(e, False) for e in schedule]
    if bound is not None:
        plan += [(schedule[-1], True)] * cfg.al_rounds
    it, status = 0, "converged"
    for r, (eps, update) in enumerate(plan):
        con.eps = eps
        if update:
            cur, _ = evaluate(prob.phi, W, con, cfg.workers, want_grad=False)
            if np.max(cur.K / con.M) <= 1.0 + cfg.bound_tol:
                break
            con.lam = np.maximum(0.0, con.lam + 2.0 * con.beta * (cur.K - con.M))
        tol = cfg.grad_tol if eps == schedule[-1] else max(cfg.grad_tol, eps)
        it, status = _inner_solve(prob, tol, cfg.max_iter - it, trace, it, cfg, r)
        trace.rounds.append({"round": r, "eps": eps, "multiplier_update": update, "status": status,
                             "iterations": it})
        if status == "max_iterations" and it >= cfg.max_iter:
            break
    if bound is not None and status != "max_iterations":
        final, _ = evaluate(prob.phi, W, con, cfg.workers, want_grad=False)
        if np.max(final.K / con.M_report) > 1.0 + cfg.bound_tol:
            status = "bound_not_met"
    trace.termination = status
    if not np.array_equal(prob.phi.images[boundary_nodes], target_boundary):
        raise RuntimeError("boundary nodes moved during minimization")
    prob.phi.notes.update({"termination": status, "iterations": it})
    return prob.phi, trace


__all__ = [
    "InfeasibleStartError",
    "LineSearchError",
    "MinimizationTrace",
    "MinimizerConfig",
    "minimize",
]

