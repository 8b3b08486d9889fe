import csv
import json

import pytest
import yaml

from qlab import cli


def run_cli(tmp_path, experiment, config=None, *extra, name="out"):
    out = tmp_path / name
    argv = [experiment, "--out", str(out), *extra]
    if config is not None:
        path = tmp_path / f"{name}.yaml"
        path.write_text(yaml.safe_dump(config))
        argv += ["--config", str(path)]
    return cli.main(argv), out


def data_files(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "manifest.json"}


def test_parse_config_defaults_and_errors():
    cfg = cli.parse_config(None, "cone-census")
    assert cfg.params["q_max"] == 3 and cfg.seed == 0
    with pytest.raises(cli.ConfigError):
        cli.parse_config({"bogus": 1}, "cone-census")
    with pytest.raises(cli.ConfigError):
        cli.parse_config({"h": -0.1}, "quarter-frequency")
    with pytest.raises(cli.ConfigError):
        cli.parse_config({"experiment": "cone-census"}, "excess-decay")
    with pytest.raises(cli.ConfigError):
        cli.parse_config({"tolerances": {"nope": 1}}, "quarter-frequency")


def test_quarter_frequency_default(tmp_path):
    code, out = run_cli(tmp_path, "quarter-frequency")
    assert code == cli.EXIT_OK
    v = json.loads((out / "verdicts.json").read_text())
    assert v["monotone"] and v["corner_bound"] and v["height_decay"]
    assert 1.9 <= v["I_at_half"] <= 2.1
    assert v["sup_error"] <= 0.05
    rows = list(csv.reader((out / "frequency.csv").open()))
    assert rows[0] == ["r", "D", "H", "I"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_code"] == 0 and set(manifest["files"]) == {"convergence.csv", "frequency.csv", "verdicts.json"}
    assert manifest["config"]["h"] == 1 / 64 and "numpy" in manifest["versions"]


def test_quarter_frequency_zero_data_is_degenerate(tmp_path):
    code, out = run_cli(tmp_path, "quarter-frequency", {"h": 1 / 16, "data": "zero"})
    assert code == cli.EXIT_OK
    assert json.loads((out / "verdicts.json").read_text())["degenerate"] is True


@pytest.mark.parametrize("config", [{"h": 1.0}, {"h": 1 / 16, "radii": [0.05, 0.5]}, {"h": "fine"},
                                    {"data": "cos7"}])
def test_bad_config_exits_2(tmp_path, config):
    code, _ = run_cli(tmp_path, "quarter-frequency", config)
    assert code == cli.EXIT_CONFIG


def test_unreadable_config_exits_2(tmp_path):
    assert cli.main(["cone-census", "--out", str(tmp_path / "o"), "--config", str(tmp_path / "missing.yaml")]) == 2
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    assert cli.main(["cone-census", "--out", str(tmp_path / "o"), "--config", str(tmp_path / "list.yaml")]) == 2


def test_non_convergence_exits_4(tmp_path):
    code, out = run_cli(tmp_path, "quarter-frequency", {"h": 1 / 16, "tolerances": {"max_sweeps": 2}})
    assert code == cli.EXIT_NOT_CONVERGED
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 4


def test_quarter_frequency_is_reproducible(tmp_path):
    cfg = {"h": 1 / 32, "seed": 3}
    c1, a = run_cli(tmp_path, "quarter-frequency", cfg, name="a")
    c2, b = run_cli(tmp_path, "quarter-frequency", cfg, "--threads", "1", name="b")
    assert c1 == c2 == cli.EXIT_OK
    assert data_files(a) == data_files(b)


def test_cylinder_singularity_default_and_oracle(tmp_path):
    code, out = run_cli(tmp_path, "cylinder-singularity", name="solve")
    assert code == cli.EXIT_OK
    v = json.loads((out / "verdict.json").read_text())
    assert v["verdict"] == "FORCED" and v["boundary_monodromy"] == "(1 2)"
    assert v["forced_components"] >= 1 and v["solver_status"] == "CONVERGED"
    report = json.loads((out / "singularity.json").read_text())
    assert report["forced_components"] and report["forced_components"][0]["certificate_loop"]
    code, oracle = run_cli(tmp_path, "cylinder-singularity", None, "--oracle-mode", name="oracle")
    assert code == cli.EXIT_OK
    assert json.loads((oracle / "verdict.json").read_text())["origin_in_component"] is True


def test_cylinder_seed_does_not_change_verdicts(tmp_path):
    _, a = run_cli(tmp_path, "cylinder-singularity", {"seed": 1}, name="a")
    _, b = run_cli(tmp_path, "cylinder-singularity", {"seed": 2}, name="b")
    assert data_files(a) == data_files(b)


def test_excess_decay(tmp_path):
    code, out = run_cli(tmp_path, "excess-decay", name="small")
    assert code == cli.EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["flags"] == [] and rep["decays"] and all(r < 1 for r in rep["ratios"])
    _, flat = run_cli(tmp_path, "excess-decay", {"lam": 0.0}, name="flat")
    assert json.loads((flat / "report.json").read_text())["all_zero"] is True
    _, big = run_cli(tmp_path, "excess-decay", {"lam": 0.5}, name="big")
    assert "NO_DECAY_CLAIM" in json.loads((big / "report.json").read_text())["flags"]


def test_cone_census(tmp_path):
    code, out = run_cli(tmp_path, "cone-census")
    assert code == cli.EXIT_OK
    assert json.loads((out / "report.json").read_text())["violations"] == 0
    census = list(csv.DictReader((out / "census.csv").open()))
    assert all(r["bound_ok"] == "1" for r in census)
    books = list(csv.DictReader((out / "books.csv").open()))
    by_cfg = {r["config"]: r for r in books}
    assert by_cfg["Q0=1 Q1=1"]["books_for_config"] == "1" and by_cfg["Q0=1 Q1=1"]["uniqueness_gap"] == "INF"
    assert by_cfg["Q0=2 Q1=1/1"]["density"] == "1/2"
    assert float(by_cfg["Q0=1/1 Q1=1/1"]["uniqueness_gap"]) > 0
    _, again = run_cli(tmp_path, "cone-census", name="again")
    assert data_files(out) == data_files(again)


def test_threads_must_be_positive(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["cone-census", "--out", str(tmp_path), "--threads", "0"])
