import pytest

from polylab.config import ConfigError, build_config, load_config, parse_text, parse_value


def test_parse_values():
    assert parse_value("true") is True
    assert parse_value("12") == 12
    assert parse_value("1e-3") == 1e-3
    assert parse_value("[[3, 0], [0, 0.5]]") == [[3, 0], [0, 0.5]]
    assert parse_value('"a # b"') == "a # b"
    assert parse_value("unit-square") == "unit-square"


def test_parse_text_with_comments():
    raw = parse_text("# header\nenergy.kind = w1  # trailing\n\nrun.out = \"x#y\"\n")
    assert raw == {"energy.kind": "w1", "run.out": "x#y"}


@pytest.mark.parametrize("text", ["energy.kind w1", "kind = w1", "a.b = 1\na.b = 2", "a.b =", "a.b = [1,"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_text(text)


def test_defaults_and_minimizer_section():
    cfg = build_config("minimize", {"minimizer.grad_tol": 1e-6, "run.workers": 3})
    mc = cfg.minimizer_config()
    assert mc.grad_tol == 1e-6 and mc.workers == 3 and mc.seed == 0
    assert cfg["mesh.shape"] == "unit-square"
    assert cfg.energy_kind == "w2"
    assert "run.workers" not in cfg.to_dict()


def test_energy_parameters_validated():
    cfg = build_config("minimize", {"energy.kind": "w1", "energy.s": 10})
    assert cfg.energy_params == {"s": 10.0}
    with pytest.raises(ConfigError):
        build_config("minimize", {"energy.kind": "w1", "energy.s": 2})
    with pytest.raises(ConfigError):
        build_config("minimize", {"energy.kind": "w1", "energy.p": "big"})


@pytest.mark.parametrize("raw", [
    {"mesh.colour": "red"},
    {"mesh.resolution": 1.5},
    {"boundary.kind": "affine"},
    {"boundary.kind": "spiral"},
    {"bound.M": 2.0, "bound.s": 1.0},
    {"minimizer.tau": 2.0},
    {"run.seed": -1},
])
def test_minimize_validation_errors(raw):
    with pytest.raises(ConfigError):
        build_config("minimize", raw)


def test_subcommand_specific_keys():
    with pytest.raises(ConfigError):
        build_config("cov", {"energy.kind": "w2"})
    with pytest.raises(ConfigError):
        build_config("check", {})
    with pytest.raises(ConfigError):
        build_config("cov", {"cov.cases": ["mystery"]})
    with pytest.raises(ConfigError):
        build_config("piola", {"piola.sampling": "edge"})


def test_seed_override(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("run.seed = 4\n")
    assert load_config("energy-scan", p, {"run.seed": 9})["run.seed"] == 9
    with pytest.raises(ConfigError):
        load_config("energy-scan", tmp_path / "missing.cfg")
