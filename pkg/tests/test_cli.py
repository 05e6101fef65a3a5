import json

import pytest

from torusgauge.cli import main, run_experiment


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_complex_show_and_check(capsys):
    code, out = run(capsys, "complex", "show", "cube")
    assert code == 0 and json.loads(out)["euler"] == 2
    code, out = run(capsys, "complex", "check", "hex_torus:2:2")
    assert code == 0 and json.loads(out)["ok"]


def test_lie_level(capsys):
    code, out = run(capsys, "lie", "level", "--k", "5")
    assert code == 0 and len(json.loads(out)["colors"]) == 4


def test_missing_link_is_input_error(tmp_path, capsys):
    code = main(["wlo", "eval", "--link", str(tmp_path / "none.json"), "--k", "3"])
    assert code == 2
    assert "link file not found" in capsys.readouterr().err


def test_bad_arguments(capsys):
    assert main(["lie", "level"]) == 2
    assert main(["complex", "show", "no_such_complex"]) == 2


@pytest.fixture
def link_file(tmp_path, capsys):
    path = tmp_path / "link.json"
    code = main(["link", "vertical", "--complex", "tetrahedron", "--n", "2",
                 "--edges", "e:e0:2,e:e1:2,e:e3:2", "--colors", "1,1,0", "--out", str(path)])
    assert code == 0
    return path


def test_link_and_shadow(link_file, capsys, tmp_path):
    code, out = run(capsys, "link", "check", "--link", str(link_file))
    rep = json.loads(out)
    assert code == 0 and len(rep["marks"]) == 3 and rep["regions"][0]["euler"] == 2
    report = tmp_path / "shadow.json"
    assert main(["shadow", "eval", "--link", str(link_file), "--k", "3", "--report", str(report)]) == 0
    assert json.loads(report.read_text())["ratio"][0] == pytest.approx(1.0)


def test_theorem_check_and_shift(link_file, tmp_path, capsys):
    report = tmp_path / "theorem.json"
    assert main(["check", "theorem", "--link", str(link_file), "--k", "3", "--report", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["ok"] and data["difference"] < 1e-3
    # ratio (1,1,0) equals one at every level, so the shifted oracle agrees here as well
    assert main(["check", "theorem", "--link", str(link_file), "--k", "3", "--k-shift",
                 "--report", str(report)]) == 0


def test_run_experiment_with_csv(link_file, tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"schema": "v1", "pipeline": "wlo", "links": [str(link_file)], "k": [3],
                               "mode": "poisson", "csv": True, "output": "out"}))
    summary = run_experiment(str(cfg))
    assert summary["ok"] and len(summary["reports"]) == 1
    csv_path = tmp_path / "out" / "wlo_link_k3_integrand.csv"
    assert csv_path.read_text().startswith("theta,")
    cfg.write_text(json.dumps({"schema": "v1", "pipeline": "structure-tests", "complexes": ["cube"]}))
    assert run_experiment(str(cfg))["ok"]


def test_run_rejects_bad_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"schema": "v2", "pipeline": "wlo"}))
    assert main(["run", str(cfg)]) == 2
    assert main(["run", str(tmp_path / "absent.json")]) == 2
