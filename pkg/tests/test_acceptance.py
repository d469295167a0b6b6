"""Acceptance criteria, each at its stated tolerance and time budget.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion together with the measured quantities.
"""

import math
import time

import numpy as np
import pytest

from polylab import serialize
from polylab.admissibility import (
    BoundField,
    PiecewiseConstant,
    banach_indicatrix,
    change_of_variable_check,
    check_class_A,
    composition_norm_check,
    fold_deformation,
    mesh_sequence,
    minor_weak_continuity_test,
    piola_identity_residual,
)
from polylab.admissibility.weak import bump_map, quadratic_map
from polylab.cli import run
from polylab.energy import DetOnly, make_energy, w1, w2
from polylab.mesh import BoundaryData, Deformation, interpolate_boundary, total_energy, unit_square
from polylab.minimizer import (
    MinimizerConfig,
    assemble_gradient,
    minimize,
    objective_value,
    quasiconvexity_affine_test,
    random_interior_perturbation,
)
from polylab.minimizer.objective import Constraints
from polylab.sequences import OscillationFamily
from polylab.tensor import adjugate, determinant
from polylab.verify import check_barrier_condition, check_coercivity_sampled, sample_matrices


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.mark.criterion(1, "adjugate identities on 1e4 random matrices (1e-12 / 1e-10), < 1 s")
def test_algebraic_identities(record):
    rng = np.random.default_rng(20240101)
    worst1 = worst2 = 0.0
    with Timer() as t:
        for n in (2, 3):
            F = rng.standard_normal((10_000, n, n))
            A, d = adjugate(F), determinant(F)
            scale = np.linalg.norm(F, axis=(1, 2))
            e1 = np.abs(F @ A - d[:, None, None] * np.eye(n)).max(axis=(1, 2)) / scale**n
            e2 = np.abs(determinant(A) - d ** (n - 1)) / scale ** (n * (n - 1))
            worst1, worst2 = max(worst1, e1.max()), max(worst2, e2.max())
    record(f"max rel F Adj F - det I: {worst1:.2e}; max rel det Adj F - det^(n-1): {worst2:.2e}; {t.elapsed:.2f} s")
    assert worst1 <= 1e-12
    assert worst2 <= 1e-10
    assert t.elapsed < 1.0


def _fd_matrix(W, F, h):
    G = np.zeros_like(F)
    for i in range(F.shape[0]):
        for j in range(F.shape[1]):
            E = np.zeros_like(F)
            E[i, j] = h
            G[i, j] = (W.eval(F + E) - W.eval(F - E)) / (2 * h)
    return G


@pytest.mark.criterion(2, "dW/dF and nodal gradients vs central differences, rel < 1e-5, 100 samples per kind, < 5 s")
def test_gradient_correctness(record):
    rng = np.random.default_rng(2)
    worst = {}
    with Timer() as t:
        for kind in ("w1", "w2", "svk", "det_only"):
            W = make_energy(kind)
            errs = []
            for n in (2, 3):
                for F in sample_matrices(rng, 50, n, 0.25, 4.0):
                    h = 1e-6 * max(1.0, np.abs(F).max())
                    fd = _fd_matrix(W, F, h)
                    errs.append(np.abs(W.grad(F) - fd).max() / max(np.abs(fd).max(), 1e-300))
            worst[kind] = max(errs)
        # nodal gradients of the augmented objective on a twisted map, 100 (node, component) samples
        phi = interpolate_boundary(unit_square(6), BoundaryData.twist(0.6))
        n_el = phi.mesh.n_elements
        con = Constraints(eps=1e-3, beta=50.0, M=np.full(n_el, 1.1), lam=rng.random(n_el))
        nodal = []
        for W in (w1(), w2()):
            G = np.zeros_like(phi.images)
            G[phi.mesh.interior_nodes] = assemble_gradient(phi, W, con)
            for _ in range(50):
                v = int(rng.choice(phi.mesh.interior_nodes))
                c = int(rng.integers(2))
                h = 1e-6
                p, m = phi.copy(), phi.copy()
                p.images[v, c] += h
                m.images[v, c] -= h
                fd = (objective_value(p, W, con).objective - objective_value(m, W, con).objective) / (2 * h)
                nodal.append(abs(G[v, c] - fd) / max(abs(fd), 1e-8))
        worst["nodal"] = max(nodal)
    record(", ".join(f"{k}: {v:.1e}" for k, v in worst.items()) + f"; {t.elapsed:.2f} s")
    assert max(worst.values()) < 1e-5
    assert t.elapsed < 5.0


@pytest.mark.criterion(3, "affine maps beat 1e3 perturbations (slack 1e-10) and minimizer returns within 1e-6, < 60 s")
def test_quasiconvexity_oracle(record):
    mesh = unit_square(32)
    ok = True
    with Timer() as t:
        for name, W in (("W1", w1()), ("W2", w2())):
            for label, F0 in (("I", np.eye(2)), ("diag(2,1)", np.diag([2.0, 1.0]))):
                qc = quasiconvexity_affine_test(W, F0, mesh, trials=1000, seed=3)
                ref = mesh.total_volume() * float(W.eval(F0))
                phi, trace = minimize(mesh, W, BoundaryData.affine(F0), config=MinimizerConfig(perturb=0.3, seed=4))
                rel = abs(total_energy(phi, W) - ref) / abs(ref)
                record(f"{name} F0={label}: {qc.status} (skipped {qc.skipped}, min excess "
                       f"{qc.min_energy - qc.reference:.2e}); minimizer rel error {rel:.1e} "
                       f"after {len(trace.records) - 1} iterations")
                ok = ok and qc.status == "pass" and qc.skipped == 0 and rel <= 1e-6
    record(f"{t.elapsed:.1f} s")
    assert ok
    assert t.elapsed < 60.0


@pytest.mark.criterion(4, "integral of det invariant (1e-12 rel) under 100 interior perturbations, < 5 s")
def test_null_lagrangian(record):
    mesh = unit_square(16)
    with Timer() as t:
        res = quasiconvexity_affine_test(DetOnly(), np.diag([2.0, 0.5]), mesh, trials=100, seed=5)
        base = interpolate_boundary(mesh, BoundaryData.twist(0.7))
        ref = total_energy(base, DetOnly())
        rng = np.random.default_rng(6)
        dev = max(abs(total_energy(random_interior_perturbation(base, rng), DetOnly()) - ref) for _ in range(100))
    rel_affine = res.max_deviation / abs(res.reference)
    rel_twist = dev / abs(ref)
    record(f"affine base: {rel_affine:.1e}; twisted base: {rel_twist:.1e}; {t.elapsed:.2f} s")
    assert res.skipped == 0
    assert rel_affine <= 1e-12 and rel_twist <= 1e-12
    assert t.elapsed < 5.0


@pytest.mark.criterion(5, "Piola residual ratio in [0.3, 0.7] per level (2 maps, 4 levels); minors within 5%, < 30 s")
def test_piola_and_minor_weak_continuity(record):
    meshes = mesh_sequence(2, 4, 8)
    ratios_ok = True
    with Timer() as t:
        for fmap in (quadratic_map(2), bump_map(2)):
            study = piola_identity_residual(fmap, meshes)
            inside = all(0.3 <= r <= 0.7 for r in study.ratios)
            ratios_ok = ratios_ok and inside
            record(f"{fmap.name}: residuals " + ", ".join(f"{r:.2e}" for r in study.residual)
                   + "; ratios " + ", ".join(f"{r:.3f}" for r in study.ratios))
        fam = OscillationFamily()
        minors_ok = True
        for label, rows, cols in (("F11", (0,), (0,)), ("F21", (1,), (0,)), ("det", (0, 1), (0, 1))):
            table = minor_weak_continuity_test(fam, rows, cols, ks=(1, 2, 4, 8), tol=0.05)
            minors_ok = minors_ok and table.converged
            record(f"minor {label}: rel error at k=8 {table.rel_error[-1]:.2e}")
    record(f"{t.elapsed:.1f} s")
    assert minors_ok
    assert t.elapsed < 30.0
    assert ratios_ok, "Piola residual decay ratios fall outside [0.3, 0.7]"


@pytest.mark.criterion(6, "exact 2D change-of-variables residual < 1e-10, fold with indicatrix 2, < 5 s")
def test_change_of_variables(record):
    big = PiecewiseConstant.constant([-2, -2], [4, 4], 1.0)
    cases = {
        "identity/half-plane": (Deformation.identity(unit_square(6)), PiecewiseConstant.half_space([0, 0], [1, 1], 0, 0.37)),
        "affine/grid": (Deformation.affine(unit_square(5), [[1.5, 0.4], [-0.3, 0.9]], [0.2, 0.1]),
                        PiecewiseConstant.grid([-1, -1], [3, 3], np.arange(1.0, 17.0).reshape(4, 4))),
        "twist/grid": (interpolate_boundary(unit_square(10), BoundaryData.twist(0.6)),
                       PiecewiseConstant.grid([-0.3, -0.3], [1.3, 1.3], np.arange(1.0, 37.0).reshape(6, 6))),
        "fold/constant": (fold_deformation(), big),
    }
    worst = 0.0
    with Timer() as t:
        for name, (phi, u) in cases.items():
            r = change_of_variable_check(phi, u)
            assert r.exact
            worst = max(worst, r.residual)
            record(f"{name}: lhs {r.lhs:.15g}, rhs {r.rhs:.15g}, residual {r.residual:.1e}")
        fold_count = banach_indicatrix(fold_deformation(), [0.25, 0.25]).value
    record(f"fold indicatrix at (0.25, 0.25): {fold_count}; {t.elapsed:.2f} s")
    assert worst < 1e-10
    assert fold_count == 2
    assert t.elapsed < 5.0


@pytest.mark.criterion(7, "composition-norm inequality on 100 random flip-free homeomorphisms, equality at identity, < 10 s")
def test_composition_norm(record):
    mesh = unit_square(8)
    base = Deformation.identity(mesh)
    rng = np.random.default_rng(7)
    with Timer() as t:
        results = [composition_norm_check(random_interior_perturbation(base, rng), 2.0) for _ in range(100)]
        ident = composition_norm_check(base, 2.0)
    worst = max(r.lhs / r.rhs for r in results)
    record(f"max lhs/rhs over 100 trials {worst:.6f}; identity lhs {ident.lhs!r} rhs {ident.rhs!r}; {t.elapsed:.2f} s")
    assert all(r.satisfied for r in results)
    assert abs(ident.lhs - ident.rhs) <= 1e-14 and abs(ident.lhs - 1.0) <= 1e-14
    assert t.elapsed < 10.0


@pytest.mark.criterion(8, "squeeze diag(3, 1/3) with M = 4, s = 2: max K/M <= 1 + 1e-6 and related checks, < 120 s")
def test_constrained_squeeze(record):
    mesh = unit_square(32)
    bd = BoundaryData.squeeze(3.0)
    bound = BoundField(4.0, 2.0)
    cfg = MinimizerConfig(perturb=0.3, seed=8)
    with Timer() as t:
        free, _ = minimize(mesh, w2(), bd, config=cfg)
        phi, trace = minimize(mesh, w2(), bd, bound, cfg)
        report = check_class_A(phi, bound, samples=20, seed=8)
    degrees = [d["degree"] for d in report.degree_samples]
    E, E_free = total_energy(phi, w2()), total_energy(free, w2())
    record(f"termination {trace.termination}; max K/M {report.max_K_over_M:.9f}; min det {report.min_jacobian:.6f}; "
           f"degrees == 1: {degrees.count(1)}/{len(degrees)}; energy {E:.12g} vs unconstrained {E_free:.12g}; "
           f"{t.elapsed:.1f} s")
    assert report.min_jacobian > 0
    assert len(degrees) == 20 and all(d == 1 for d in degrees)
    assert E >= E_free * (1 - 1e-12)
    assert t.elapsed < 120.0
    assert report.max_K_over_M <= 1.0 + 1e-6, "distortion bound not attained"


@pytest.mark.criterion(9, "verifier verdicts: W1 barrier holds, W2 barrier fails, W2 coercive (n=3), det-only witness, < 10 s")
def test_verifier_verdicts(record):
    with Timer() as t:
        b1 = check_barrier_condition(w1(), n=3).status
        b2 = check_barrier_condition(w2(), n=3).status
        c2 = check_coercivity_sampled(w2(), 0.5, 2.0, 0.0, 1000, 9, 3)
        cd = check_coercivity_sampled(DetOnly(), 0.5, 2.0, 0.0, 1000, 9, 3)
    record(f"W1 barrier {b1}; W2 barrier {b2}; W2 coercivity {c2.status}; det-only coercivity {cd.status} "
           f"(witness {'found' if cd.witness else 'none'}); {t.elapsed:.2f} s")
    assert b1 == "holds" and b2 == "fails"
    assert c2.status == "no-violation"
    assert cd.status == "violation" and cd.witness is not None
    assert t.elapsed < 10.0


@pytest.mark.criterion(10, "byte-identical minimize summary JSON across 1 and N worker threads")
def test_determinism(tmp_path, record):
    base = ("energy.kind = w1\nmesh.resolution = 64\nboundary.kind = twist\nboundary.angle = 0.5\n"
            "minimizer.perturb = 0.2\nrun.seed = 10\n")
    texts = []
    for w in (1, 4, 1):
        cfg = tmp_path / f"w{w}_{len(texts)}.cfg"
        cfg.write_text(base + f"run.workers = {w}\n")
        out = tmp_path / f"out{len(texts)}"
        assert run("minimize", cfg, out) == 0
        text = (out / "summary.json").read_text()
        texts.append(text[: text.index('"metadata"')])
    meta = serialize.loads((tmp_path / "out1" / "summary.json").read_text())["metadata"]
    record(f"summary bytes before metadata: {len(texts[0])}; workers in second run: {meta['workers']}")
    assert texts[0] == texts[1] == texts[2]
