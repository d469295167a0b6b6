import json

import numpy as np
import pytest

from polylab import serialize
from polylab.cli import main, run
from polylab.mesh import Deformation, unit_square, write_deformation, write_mesh


def _cfg(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def _summary(out):
    return serialize.loads((out / "summary.json").read_text())


def _without_metadata(out) -> str:
    text = (out / "summary.json").read_text()
    return text[: text.index('"metadata"')]


def test_minimize_identity_w2(tmp_path):
    cfg = _cfg(tmp_path, "m.cfg", "energy.kind = w2\nmesh.resolution = 6\nminimizer.perturb = 0.2\n")
    out = tmp_path / "out"
    assert main(["minimize", "--config", str(cfg), "--out", str(out)]) == 0
    s = _summary(out)
    assert s["results"]["report"]["in_AB"] is True
    assert s["results"]["minimization"]["final"]["energy"] == pytest.approx(3.0, rel=1e-6)
    for f in ("trace.jsonl", "trace.csv", "mesh.txt", "deformation.txt"):
        assert (out / f).exists()
    first = json.loads((out / "trace.jsonl").read_text().splitlines()[0])
    assert first["iter"] == 0
    assert (out / "trace.csv").read_text().startswith("iter,round,eps,energy")


def test_minimize_then_check_round_trip(tmp_path):
    cfg = _cfg(tmp_path, "m.cfg", "boundary.kind = twist\nboundary.angle = 0.5\nmesh.resolution = 6\n"
                                  "bound.M = 3\nbound.s = 2\n")
    assert run("minimize", cfg, tmp_path / "a") == 0
    chk = _cfg(tmp_path, "c.cfg", "mesh.file = a/mesh.txt\ncheck.deformation = a/deformation.txt\n"
                                  "bound.M = 3\nbound.s = 2\n")
    assert run("check", chk, tmp_path / "b") == 0
    assert _summary(tmp_path / "a")["results"]["report"] == _summary(tmp_path / "b")["results"]["report"]


def test_check_inverted_element_reports(tmp_path):
    mesh = unit_square(2)
    phi = Deformation.identity(mesh)
    phi.images[mesh.interior_nodes[0]] = [1.5, 1.5]
    write_mesh(mesh, tmp_path / "mesh.txt")
    write_deformation(phi, tmp_path / "d.txt")
    cfg = _cfg(tmp_path, "c.cfg", "mesh.file = mesh.txt\ncheck.deformation = d.txt\ncheck.samples = 2\n")
    assert run("check", cfg, tmp_path / "out") == 0
    s = _summary(tmp_path / "out")
    assert s["results"]["report"]["in_AB"] is False
    assert (tmp_path / "out" / "elements.csv").read_text().startswith("element,jacobian,K")


def test_energy_scan_w2_barrier_fails(tmp_path):
    cfg = _cfg(tmp_path, "e.cfg", "energy.kind = w2\nscan.trials = 200\nscan.alpha = 0.5\n"
                                  "expect.barrier = fails\nexpect.coercivity = no-violation\n")
    assert run("energy-scan", cfg, tmp_path / "o") == 0
    s = _summary(tmp_path / "o")
    assert s["results"]["verdicts"]["barrier"]["status"] == "fails"
    assert (tmp_path / "o" / "barrier.csv").exists()


def test_energy_scan_unmet_expectation_exits_3(tmp_path, capsys):
    cfg = _cfg(tmp_path, "e.cfg", "energy.kind = w2\nscan.trials = 50\nexpect.barrier = holds\n")
    assert run("energy-scan", cfg, tmp_path / "o") == 3
    assert "barrier" in capsys.readouterr().err
    assert _summary(tmp_path / "o")["verification_failures"]


def test_semicontinuity_and_cov(tmp_path):
    cfg = _cfg(tmp_path, "s.cfg", "semicontinuity.ks = [1, 2]\n")
    assert run("semicontinuity", cfg, tmp_path / "s") == 0
    assert _summary(tmp_path / "s")["results"]["table"]["holds"] is True
    cfg = _cfg(tmp_path, "c.cfg", 'cov.cases = ["fold", "half_space"]\n')
    assert run("cov", cfg, tmp_path / "c") == 0
    cases = _summary(tmp_path / "c")["results"]["cases"]
    assert cases["fold"]["rhs"] == pytest.approx(1.0)
    assert (tmp_path / "c" / "cov.csv").read_text().startswith("case,lhs,rhs,residual,exact")


def test_piola_writes_refinement_table(tmp_path):
    cfg = _cfg(tmp_path, "p.cfg", 'piola.maps = ["quadratic"]\npiola.levels = 2\npiola.minor_ks = [1, 2]\n'
                                  "piola.minor_tol = 0.5\n")
    assert run("piola", cfg, tmp_path / "p") == 0
    rows = (tmp_path / "p" / "refinement.csv").read_text().splitlines()
    assert rows[0] == "map,level,h,residual,ratio" and len(rows) == 3


def test_exit_codes(tmp_path, capsys):
    bad = _cfg(tmp_path, "bad.cfg", "mesh.colour = red\n")
    assert run("minimize", bad, tmp_path / "o") == 1
    missing = _cfg(tmp_path, "missing.cfg", "mesh.file = nowhere.txt\n")
    assert run("minimize", missing, tmp_path / "o") == 1
    squeeze = _cfg(tmp_path, "sq.cfg", "boundary.kind = squeeze\nboundary.factor = 3\nmesh.resolution = 4\n"
                                       "bound.M = 4\nbound.s = 2\n")
    assert run("minimize", squeeze, tmp_path / "sq") == 2
    assert "bound_not_met" in capsys.readouterr().err
    assert (tmp_path / "sq" / "summary.json").exists()
    with pytest.raises(SystemExit) as exc:
        main(["minimize"])
    assert exc.value.code == 1


def test_seed_flag_overrides_config(tmp_path):
    cfg = _cfg(tmp_path, "m.cfg", "mesh.resolution = 4\nminimizer.perturb = 0.3\n")
    assert main(["minimize", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "17"]) == 0
    assert _summary(tmp_path / "a")["config"]["run.seed"] == 17


def test_summary_identical_across_workers(tmp_path):
    base = "mesh.resolution = 40\nboundary.kind = twist\nboundary.angle = 0.5\nminimizer.perturb = 0.2\n"
    for w in (1, 3):
        cfg = _cfg(tmp_path, f"w{w}.cfg", base + f"run.workers = {w}\n")
        assert run("minimize", cfg, tmp_path / f"w{w}") == 0
    assert _without_metadata(tmp_path / "w1") == _without_metadata(tmp_path / "w3")
    assert (tmp_path / "w1" / "trace.jsonl").read_bytes() == (tmp_path / "w3" / "trace.jsonl").read_bytes()
    assert _summary(tmp_path / "w3")["metadata"]["workers"] == 3
