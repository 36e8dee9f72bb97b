import json

import pytest

from orv import cli

REF = {"shapes": [1, 1], "driving": {"family": "inverted-dirichlet", "params": {"beta": 3}}}
EXPO = {"shapes": [1, 1], "driving": {"family": "exponential", "params": {"rate": 1}}}


def ratio_scenario(name="ref-ratio", model=REF, **extra):
    sc = {"name": name, "operation": "verify-density-ratio", "model": model,
          "scaling": {"exponents": [1, 1]},
          "params": {"x": [1, 1], "t_grid": {"lo": 10, "hi": 1e4}}, "tolerances": {"rel": 1e-3}}
    sc.update(extra)
    return sc


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    return str(p)


def load_report(out):
    return json.loads((out / "report.json").read_text())


def test_reference_density_ratio_passes(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["--config", write(tmp_path, {"seed": 1, "scenarios": [ratio_scenario()]}), "--out", str(out)])
    assert code == 0
    rep = load_report(out)
    assert rep["summary"]["passed"] and rep["scenarios"][0]["passed"]
    lines = (out / "ref-ratio.csv").read_text().splitlines()
    assert lines[0] == "t,ratio,target,rel_error"
    assert len(lines) == 1 + 37


def test_exponential_negative_control_fails(tmp_path):
    out = tmp_path / "out"
    cfg = {"scenarios": [ratio_scenario("expo", EXPO)]}
    assert cli.main(["--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    assert load_report(out)["scenarios"][0]["passed"] is False


def test_expect_fail_inverts(tmp_path):
    out = tmp_path / "out"
    cfg = {"scenarios": [ratio_scenario("expo", EXPO, expect_fail=True)]}
    assert cli.main(["--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    entry = load_report(out)["scenarios"][0]
    assert entry["verification_passed"] is False and entry["passed"] is True


def test_missing_shapes_names_field(tmp_path, capsys):
    sc = ratio_scenario(model={"driving": REF["driving"]})
    assert cli.main(["--config", write(tmp_path, {"scenarios": [sc]}), "--out", str(tmp_path / "o")]) == 2
    assert "scenarios[0].model.shapes" in capsys.readouterr().err


def test_parse_error_reports_position(tmp_path, capsys):
    assert cli.main(["--config", write(tmp_path, '{"scenarios": [\n  {"name": }]}'), "--list"]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


@pytest.mark.parametrize("mutate,field", [
    (lambda s: s.update(operation="plot"), "scenarios[0].operation"),
    (lambda s: s["params"].update(x=[1, -1]), "scenarios[0].params.x[1]"),
    (lambda s: s["params"].update(x=[1]), "scenarios[0].params.x"),
    (lambda s: s["model"]["driving"].update(family="gauss"), "scenarios[0].model.driving.family"),
    (lambda s: s.update(name="bad name"), "scenarios[0].name"),
    (lambda s: s["params"].update(t_grid=[10, 5]), "scenarios[0].params.t_grid"),
])
def test_validation_errors(tmp_path, capsys, mutate, field):
    sc = json.loads(json.dumps(ratio_scenario()))
    mutate(sc)
    assert cli.main(["--config", write(tmp_path, {"scenarios": [sc]}), "--list"]) == 2
    assert field in capsys.readouterr().err


def test_non_integrable_model_is_config_error(tmp_path, capsys):
    model = {"shapes": [1, 1], "driving": {"family": "inverted-dirichlet", "params": {"beta": 2}}}
    assert cli.main(["--config", write(tmp_path, {"scenarios": [ratio_scenario(model=model)]}), "--list"]) == 2
    assert "scenarios[0].model" in capsys.readouterr().err


def test_list(tmp_path, capsys):
    cfg = {"scenarios": [ratio_scenario("a"), ratio_scenario("b"), ratio_scenario("c")]}
    assert cli.main(["--config", write(tmp_path, cfg), "--list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split() == ["name", "operation", "grid"]
    assert len(lines) == 4 and lines[1].startswith("a ")


def test_list_empty(tmp_path, capsys):
    assert cli.main(["--config", write(tmp_path, {"scenarios": []}), "--list"]) == 0
    assert capsys.readouterr().out.strip().splitlines() == ["name  operation  grid"]


def test_duplicate_names(tmp_path, capsys):
    cfg = {"scenarios": [ratio_scenario("a"), ratio_scenario("a")]}
    assert cli.main(["--config", write(tmp_path, cfg), "--list"]) == 2
    assert "duplicate" in capsys.readouterr().err


def test_overrides_win_and_are_echoed(tmp_path):
    out = tmp_path / "out"
    cfg = {"seed": 3, "scenarios": [ratio_scenario("a")]}
    code = cli.main(["--config", write(tmp_path, cfg), "--out", str(out),
                     "--set", "scenarios.a.tolerances.rel=1e-9", "--set", "scenarios.0.params.x=[2, 1]"])
    rep = load_report(out)
    assert code == 1  # tolerance tightened past what t = 1e4 reaches
    assert rep["config"]["overrides"] == {"scenarios.a.tolerances.rel": 1e-9, "scenarios.0.params.x": [2, 1]}
    assert rep["scenarios"][0]["scenario"]["params"]["x"] == [2, 1]


def test_bad_override(tmp_path, capsys):
    cfg = write(tmp_path, {"scenarios": [ratio_scenario("a")]})
    assert cli.main(["--config", cfg, "--list", "--set", "scenarios.zz.params.x=1"]) == 2
    assert cli.main(["--config", cfg, "--list", "--set", "novalue"]) == 2


def sample_cfg():
    return {"seed": 7, "scenarios": [
        {"name": "draw", "operation": "sample", "model": REF, "params": {"n": 2000}},
        {"name": "mc", "operation": "verify-tail-prob", "model": REF,
         "params": {"box": {"lower": [1, 1], "upper": [2, 2]}, "t": [2, 4], "n": 200000}},
    ]}


def test_determinism_and_seed_override(tmp_path):
    cfg = write(tmp_path, sample_cfg())
    reports = []
    for k, extra in enumerate([[], [], ["--parallel"], ["--seed", "8"]]):
        out = tmp_path / f"o{k}"
        cli.main(["--config", cfg, "--out", str(out)] + extra)
        rep = load_report(out)
        rep.pop("runtime")
        reports.append((rep, (out / "draw_samples.csv").read_bytes()))
    assert reports[0] == reports[1] == reports[2]
    assert reports[3][0]["scenarios"][0]["seed"] != reports[0][0]["scenarios"][0]["seed"]
    assert reports[3][1] != reports[0][1]
    assert reports[3][0]["config"]["overrides"] == {"--seed": 8}


def test_scenario_seed_depends_on_name_not_position():
    assert cli.derive_seed(1, "a") == cli.derive_seed(1, "a")
    assert cli.derive_seed(1, "a") != cli.derive_seed(1, "b")
    assert cli.derive_seed(1, "a") != cli.derive_seed(2, "a")


def test_sample_outputs(tmp_path):
    out = tmp_path / "out"
    cli.main(["--config", write(tmp_path, sample_cfg()), "--out", str(out)])
    meta = json.loads((out / "draw_samples.json").read_text())
    assert meta["n"] == 2000 and meta["seed"] == load_report(out)["scenarios"][0]["seed"]
    assert (out / "draw_samples.csv").read_text().splitlines()[0] == "x1,x2"


def test_numerical_failure_recorded(tmp_path):
    out = tmp_path / "out"
    cfg = {"scenarios": [{"name": "far", "operation": "verify-tail-prob", "model": REF,
                          "params": {"box": {"lower": [1, 1], "upper": ["inf", "inf"]}, "t": [1e9], "n": 1000}}]}
    assert cli.main(["--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    entry = load_report(out)["scenarios"][0]
    assert entry["passed"] is False and "largest t" in entry["error"]


def test_other_operations(tmp_path):
    out = tmp_path / "out"
    cfg = {"scenarios": [
        {"name": "dens", "operation": "density", "model": REF,
         "params": {"points": [[1, 1], [0, 1]], "expected": [2 / 27, 0.25], "expected_kappa": 2}},
        {"name": "scal", "operation": "verify-scaling", "model": REF, "scaling": {"exponents": [1, 2]},
         "params": {"box": {"lower": [1, 1], "upper": [2, "inf"]}, "t_grid": [1, 2, 4]}},
        {"name": "weyl", "operation": "verify-weyl", "model": REF, "params": {"order": 1}},
        {"name": "cond", "operation": "verify-conditional",
         "model": {"shapes": [1, 1], "driving": {"family": "inverted-dirichlet", "params": {"beta": 5}}},
         "params": {"kind": "moment", "r": 1, "j": [1]}},
        {"name": "idx", "operation": "estimate-index", "model": REF, "params": {"function": "weyl", "order": 1}},
        {"name": "ops", "operation": "verify-operator", "params": {"count": 4}},
    ]}
    assert cli.main(["--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    rep = load_report(out)
    assert rep["summary"]["n_passed"] == 6
    assert {p.name for p in out.glob("*.csv")} == {"scal.csv", "weyl.csv", "cond.csv", "idx.csv"}


def test_log_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ORV_LOG", "INFO")
    import logging

    logging.getLogger().handlers.clear()
    cli.main(["--config", write(tmp_path, {"scenarios": [ratio_scenario()]}), "--out", str(tmp_path / "o")])
    assert "scenario ref-ratio: PASS" in capsys.readouterr().err
    logging.getLogger().handlers.clear()
    logging.getLogger().setLevel(logging.WARNING)


def test_paper_suite_alias_lists(capsys):
    assert cli.main(["--config", "paper-suite", "--list"]) == 0
    out = capsys.readouterr().out
    assert "c05-tail-probability" in out and "c10-reduction" in out
