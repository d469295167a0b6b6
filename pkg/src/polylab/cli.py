"""Batch entry point: ``polylab <subcommand> --config <path> [--out <dir>] [--seed <u64>]``.

Every subcommand writes ``summary.json`` plus CSV plot data into the output
directory. Exit codes: 0 success, 1 validation error, 2 runtime or
infeasibility error, 3 a verification subcommand found a failed expectation.
"""

from __future__ import annotations

import argparse
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import serialize
from .admissibility import (
    BoundField,
    DegenerateConfigurationError,
    PiecewiseConstant,
    change_of_variable_check,
    check_class_A,
    check_class_AB,
    distortion_field,
    fold_deformation,
    mesh_sequence,
    minor_weak_continuity_test,
    piola_identity_residual,
)
from .admissibility.weak import SMOOTH_MAPS
from .config import ConfigError, RunConfig, load_config
from .energy import EnergyDomainError, make_energy
from .mesh import (
    BoundaryData,
    BoundaryDataError,
    Deformation,
    MeshError,
    SimplicialMesh,
    make_mesh,
    read_deformation,
    read_mesh,
    write_deformation,
    write_mesh,
)
from .minimizer import InfeasibleStartError, LineSearchError, minimize, semicontinuity_experiment
from .sequences import make_family
from .verify import energy_scan

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_ASSERTION = 0, 1, 2, 3
SUBCOMMANDS = ("minimize", "check", "energy-scan", "semicontinuity", "piola", "cov")
from . import __version__ as VERSION

TRACE_COLUMNS = ["iter", "round", "eps", "energy", "objective", "grad_max", "rel_grad", "step", "t_max",
                 "backtracks", "rule", "min_det", "max_K_over_M"]


class InputError(ValueError):
    """Unreadable or inconsistent input files (treated as validation errors)."""


class Infeasible(str):
    """A problem found after the outputs were written that maps to exit code 2."""


# --- ingestion ----------------------------------------------------------------


def _resolve(cfg: RunConfig, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(cfg.source).parent / p


def load_mesh(cfg: RunConfig) -> SimplicialMesh:
    if cfg.get("mesh.file"):
        try:
            return read_mesh(_resolve(cfg, cfg["mesh.file"]))
        except OSError as exc:
            raise InputError(f"cannot read mesh file: {exc}") from None
    kw = {k: cfg[f"mesh.{k}"] for k in ("radius", "r_in", "r_out") if cfg.get(f"mesh.{k}") is not None}
    return make_mesh(cfg["mesh.shape"], cfg["mesh.resolution"], **kw)


def read_boundary_table(path) -> BoundaryData:
    """Lines ``node y_1 ... y_n``; '#' starts a comment."""
    table = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].split()
        if not line:
            continue
        try:
            table[int(line[0])] = [float(t) for t in line[1:]]
        except ValueError:
            raise InputError(f"{path}:{lineno}: expected 'node y_1 ... y_n'") from None
    return BoundaryData.from_table(table)


def load_boundary(cfg: RunConfig, dim: int) -> BoundaryData:
    kind = cfg["boundary.kind"]
    if kind == "identity":
        return BoundaryData.identity()
    if kind == "affine":
        return BoundaryData.affine(cfg["boundary.matrix"], cfg.get("boundary.offset"))
    if kind == "squeeze":
        return BoundaryData.squeeze(cfg["boundary.factor"], dim)
    if kind == "twist":
        return BoundaryData.twist(cfg["boundary.angle"], cfg.get("boundary.center", [0.5, 0.5]))
    try:
        return read_boundary_table(_resolve(cfg, cfg["boundary.file"]))
    except OSError as exc:
        raise InputError(f"cannot read boundary table: {exc}") from None


def load_bound(cfg: RunConfig, dim: int) -> BoundField | None:
    if cfg.get("bound.M") is None:
        return None
    return BoundField(cfg["bound.M"], cfg["bound.s"], dim)


def admissibility(phi: Deformation, bound: BoundField | None, norm: str, samples: int, seed: int):
    if bound is None:
        return check_class_AB(phi, norm, samples, seed)
    return check_class_A(phi, bound, norm, samples, seed)


# --- subcommands ----------------------------------------------------------------


def cmd_minimize(cfg: RunConfig, out: Path):
    mesh = load_mesh(cfg)
    W = make_energy(cfg.energy_kind, **cfg.energy_params)
    boundary = load_boundary(cfg, mesh.dim)
    bound = load_bound(cfg, mesh.dim)
    mc = cfg.minimizer_config()
    phi, trace = minimize(mesh, W, boundary, bound, mc)
    report = admissibility(phi, bound, cfg["bound.norm"], 8, cfg["run.seed"])
    write_mesh(mesh, out / "mesh.txt")
    write_deformation(phi, out / "deformation.txt")
    (out / "trace.jsonl").write_text(trace.to_jsonl())
    serialize.write_csv(out / "trace.csv", TRACE_COLUMNS, trace.records)
    result = {"energy": W.describe(), "minimization": trace.summary(), "report": report.to_dict(),
              "reference_energy": _affine_reference(mesh, W, boundary)}
    problems = []
    if trace.termination in ("bound_not_met", "max_iterations"):
        problems.append(Infeasible(f"minimization ended with '{trace.termination}'"
                                   f" (max K/M = {report.max_K_over_M})" if bound is not None else
                                   f"minimization ended with '{trace.termination}'"))
    return result, problems


def _affine_reference(mesh, W, boundary) -> float | None:
    A = boundary.affine_matrix()
    if A is None:
        return None
    return mesh.total_volume() * float(W.eval(A))


def cmd_check(cfg: RunConfig, out: Path) -> dict:
    mesh = load_mesh(cfg)
    try:
        phi = read_deformation(_resolve(cfg, cfg["check.deformation"]), mesh)
    except OSError as exc:
        raise InputError(f"cannot read deformation file: {exc}") from None
    bound = load_bound(cfg, mesh.dim)
    report = admissibility(phi, bound, cfg["bound.norm"], cfg["check.samples"], cfg["run.seed"])
    field = distortion_field(phi, cfg["bound.norm"])
    serialize.write_csv(out / "elements.csv", ["element", "jacobian", "K"],
                        zip(range(mesh.n_elements), field.J, field.K))
    return {"report": report.to_dict()}


def cmd_energy_scan(cfg: RunConfig, out: Path):
    W = make_energy(cfg.energy_kind, **cfg.energy_params)
    verdicts = energy_scan(W, cfg["scan.dim"], cfg["scan.alpha"], cfg["scan.r"], cfg["scan.g_const"],
                           cfg["scan.trials"], cfg["run.seed"])
    barrier = verdicts["barrier"].details
    serialize.write_csv(out / "barrier.csv", ["eps", "W"], zip(barrier["eps"], barrier["values"]))
    failures = []
    for name, verdict in verdicts.items():
        want = cfg.get(f"expect.{name}")
        if want is not None and verdict.status != want:
            failures.append(f"{name}: expected {want}, got {verdict.status}")
    return {"energy": W.describe(), "verdicts": {k: v.to_dict() for k, v in verdicts.items()}}, failures


def _family(cfg: RunConfig):
    kind = cfg["semicontinuity.family"]
    params = {k: cfg[f"semicontinuity.{k}"] for k in ("a", "b", "F0", "cells_per_k", "amplitude", "resolution")
              if cfg.get(f"semicontinuity.{k}") is not None}
    try:
        return make_family(kind, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"semicontinuity family: {exc}") from None


def cmd_semicontinuity(cfg: RunConfig, out: Path):
    W = make_energy(cfg.energy_kind, **cfg.energy_params)
    family = _family(cfg)
    ks = [int(k) for k in cfg["semicontinuity.ks"]]
    table = semicontinuity_experiment(family, W, ks)
    serialize.write_csv(out / "semicontinuity.csv", ["k", "I_k", "I_0"], table.rows())
    result = {"energy": W.describe(), "table": table.to_dict()}
    failures = []
    if table.verdict != cfg["expect.holds"]:
        failures.append(f"lower semicontinuity verdict {table.verdict}, expected {cfg['expect.holds']}")
    if cfg["semicontinuity.minors"]:
        minors, rows = _minor_tables(family, ks, 0.05)
        result["minors"] = minors
        serialize.write_csv(out / "minors.csv", ["minor", "k", "value", "limit", "rel_error"], rows)
    return result, failures


def _minor_tables(family, ks, tol):
    n = family.member(ks[0])[0].mesh.dim
    minors = {"F11": ((0,), (0,)), "F21": ((1,), (0,)), "det": (tuple(range(n)), tuple(range(n)))}
    out, rows = {}, []
    for name, (r, c) in minors.items():
        table = minor_weak_continuity_test(family, r, c, ks=ks, tol=tol)
        out[name] = table.to_dict()
        rows += [[name, row["k"], row["value"], row["limit"], row["rel_error"]] for row in table.rows()]
    return out, rows


def cmd_piola(cfg: RunConfig, out: Path):
    n = cfg["piola.dim"]
    meshes = mesh_sequence(n, cfg["piola.levels"], cfg["piola.base"])
    studies, rows, failures = {}, [], []
    lo, hi = cfg.get("expect.ratio_lo"), cfg.get("expect.ratio_hi")
    for name in cfg["piola.maps"]:
        if name not in SMOOTH_MAPS:
            raise ConfigError(f"unknown piola map {name!r}; expected one of {sorted(SMOOTH_MAPS)}")
        study = piola_identity_residual(SMOOTH_MAPS[name](n), meshes, sampling=cfg["piola.sampling"])
        studies[name] = study.to_dict()
        ratios = [None] + study.ratios
        rows += [[name, i, h, r, q] for i, (h, r, q) in enumerate(zip(study.h, study.residual, ratios))]
        for q in study.ratios:
            if (lo is not None and not q >= lo) or (hi is not None and not q <= hi):
                failures.append(f"{name}: decay ratio {q:.4g} outside [{lo}, {hi}]")
                break
    serialize.write_csv(out / "refinement.csv", ["map", "level", "h", "residual", "ratio"], rows)
    result = {"refinement": studies}
    if n == 2:
        family = make_family("oscillation")
        minors, mrows = _minor_tables(family, [int(k) for k in cfg["piola.minor_ks"]], cfg["piola.minor_tol"])
        result["minors"] = minors
        serialize.write_csv(out / "minors.csv", ["minor", "k", "value", "limit", "rel_error"], mrows)
        failures += [f"minor {k} not within tolerance at the finest level" for k, t in minors.items()
                     if not t["converged"]]
    return result, failures


def _cov_cases(cfg: RunConfig):
    square = make_mesh("unit-square", 4)
    box_lo, box_hi = [-1.0, -1.0], [3.0, 3.0]
    for name in cfg["cov.cases"]:
        if name == "affine":
            phi = Deformation.affine(square, [[1.5, 0.3], [-0.2, 0.8]], [0.1, -0.05])
            yield name, phi, PiecewiseConstant.grid(box_lo, box_hi, np.arange(1.0, 17.0).reshape(4, 4))
        elif name == "half_space":
            yield name, Deformation.identity(square), PiecewiseConstant.half_space([0, 0], [1, 1], 0, 0.37)
        elif name == "fold":
            yield name, fold_deformation(), PiecewiseConstant.constant(box_lo, box_hi, 1.0)
        elif name == "grid_twist":
            mesh = make_mesh("unit-square", 8)
            phi = Deformation.from_function(mesh, BoundaryData.twist(0.4).func)
            values = np.add.outer(np.arange(5.0), 2.0 * np.arange(5.0)) + 1.0
            yield name, phi, PiecewiseConstant.grid([-0.25, -0.25], [1.25, 1.25], values)
        else:
            mesh = load_mesh(cfg)
            try:
                phi = read_deformation(_resolve(cfg, cfg["cov.deformation"]), mesh)
            except OSError as exc:
                raise InputError(f"cannot read deformation file: {exc}") from None
            Y = phi.images
            pad = 0.1 * max(float(np.ptp(Y)), 1.0)
            yield name, phi, PiecewiseConstant.constant(Y.min(axis=0) - pad, Y.max(axis=0) + pad, 1.0)


def cmd_cov(cfg: RunConfig, out: Path):
    results, failures = {}, []
    for name, phi, u in _cov_cases(cfg):
        res = change_of_variable_check(phi, u, cfg["cov.samples"], cfg["run.seed"])
        results[name] = res.to_dict()
        if res.exact and not res.residual < cfg["cov.tol"]:
            failures.append(f"{name}: residual {res.residual:.3g} >= {cfg['cov.tol']:.3g}")
    rows = [[k, v["lhs"], v["rhs"], v["residual"], v["exact"]] for k, v in results.items()]
    serialize.write_csv(out / "cov.csv", ["case", "lhs", "rhs", "residual", "exact"], rows)
    return {"cases": results}, failures


COMMANDS = {
    "minimize": cmd_minimize,
    "check": cmd_check,
    "energy-scan": cmd_energy_scan,
    "semicontinuity": cmd_semicontinuity,
    "piola": cmd_piola,
    "cov": cmd_cov,
}


# --- driver -------------------------------------------------------------------


def run(subcommand: str, config_path, out: str | None = None, seed: int | None = None,
        stderr=None) -> int:
    err = stderr or sys.stderr
    overrides = {} if seed is None else {"run.seed": seed}
    try:
        cfg = load_config(subcommand, config_path, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_VALIDATION
    out_dir = Path(out) if out is not None else _resolve(cfg, cfg["run.out"])
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[subcommand](cfg, out_dir)
    except (ConfigError, InputError, MeshError, BoundaryDataError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_VALIDATION
    except (InfeasibleStartError, LineSearchError, EnergyDomainError, DegenerateConfigurationError,
            RuntimeError, ValueError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_RUNTIME
    failures = []
    if isinstance(result, tuple):
        result, failures = result
    summary = {
        "subcommand": subcommand,
        "config": cfg.to_dict(),
        "results": result,
        "verification_failures": [f for f in failures if not isinstance(f, Infeasible)],
        "errors": [str(f) for f in failures if isinstance(f, Infeasible)],
        "metadata": {
            "started": started.isoformat(),
            "elapsed_seconds": time.perf_counter() - t0,
            "workers": cfg["run.workers"],
            "output_dir": str(out_dir),
            "version": VERSION,
        },
    }
    serialize.write_json(out_dir / "summary.json", summary)
    infeasible = [f for f in failures if isinstance(f, Infeasible)]
    for f in infeasible:
        print(f"error: {f}", file=err)
    for f in failures:
        if not isinstance(f, Infeasible):
            print(f"verification failed: {f}", file=err)
    if infeasible:
        return EXIT_RUNTIME
    return EXIT_ASSERTION if failures else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polylab", description="Discrete polyconvex energies and mapping diagnostics.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat 'section.key = value' file")
        p.add_argument("--out", help="output directory (overrides run.out)")
        p.add_argument("--seed", type=_u64, help="overrides run.seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
