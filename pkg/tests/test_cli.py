import json
import math

import pytest

from sderk.cli import main
from sderk.convergence import parse_csv

SMALL = ["--n-fine", "256", "--levels", "16,32,64", "--realizations", "24", "--seed", "3"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_list_problems(capsys):
    code, out, _ = run(["list-problems"], capsys)
    assert code == 0
    for pid in ("autonomous", "nonautonomous", "linear2nd", "ex1", "ex2", "ex3", "ex4", "ex5",
                "pure_wiener"):
        assert pid in out


def test_simulate_five_levels(tmp_path, capsys):
    argv = ["simulate", "--problem", "autonomous", "--levels", "16,32,64,128,256", "--seed", "1",
            "-o", str(tmp_path)]
    assert run(argv, capsys)[0] == 0
    files = sorted(tmp_path.iterdir())
    assert [f.name for f in files] == sorted(f"autonomous_n{n}.csv" for n in (16, 32, 64, 128, 256))
    lines = (tmp_path / "autonomous_n16.csv").read_text().splitlines()
    assert lines[0] == "t,X,W"
    assert len(lines) == 18
    assert lines[1].startswith("0.0,") and lines[-1].startswith("1.0,")
    first = {f.name: f.read_bytes() for f in files}
    assert run(argv, capsys)[0] == 0
    assert first == {f.name: f.read_bytes() for f in sorted(tmp_path.iterdir())}


def test_simulate_pure_wiener_exact(tmp_path, capsys):
    argv = ["simulate", "--problem", "pure_wiener", "--n", "8", "--scheme", "em",
            "--dump-paths", "-o", str(tmp_path)]
    assert run(argv, capsys)[0] == 0
    rows = (tmp_path / "pure_wiener_n8.csv").read_text().splitlines()
    t, x, w = map(float, rows[-1].split(","))
    assert t == 1.0 and x == w
    path_rows = (tmp_path / "pure_wiener_path.csv").read_text().splitlines()
    assert path_rows[0] == "k,t,dW,W" and len(path_rows) == 9
    assert float(path_rows[-1].split(",")[3]) == w


def test_simulate_pure_wiener_rk_to_rounding(tmp_path, capsys):
    argv = ["simulate", "--problem", "pure_wiener", "--n", "8", "-o", str(tmp_path)]
    assert run(argv, capsys)[0] == 0
    t, x, w = map(float, (tmp_path / "pure_wiener_n8.csv").read_text().splitlines()[-1].split(","))
    assert abs(x - w) <= 1e-15


def test_simulate_json(tmp_path, capsys):
    argv = ["simulate", "--problem", "vec2", "--levels", "16,32", "--format", "json", "-o", str(tmp_path)]
    assert run(argv, capsys)[0] == 0
    doc = json.loads((tmp_path / "vec2.json").read_text())
    assert [lvl["n"] for lvl in doc["levels"]] == [16, 32]
    assert len(doc["levels"][0]["X"][0]) == 2


def test_converge_csv_json_agree(tmp_path, capsys):
    base = ["converge", "--problem", "ex3"] + SMALL
    code, csv_text, err = run(base, capsys)
    assert code == 0 and "slope" in err
    code, json_text, _ = run(base + ["--format", "json"], capsys)
    assert code == 0
    doc, back = json.loads(json_text), parse_csv(csv_text)
    assert back["levels"] == doc["levels"]
    assert back["slope"] == doc["slope"]


def test_converge_output_file_and_workers(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["converge", "--problem", "ex5", "--workers", "1", "-o", str(a)] + SMALL, capsys)[0] == 0
    assert run(["converge", "--problem", "ex5", "--workers", "3", "-o", str(b)] + SMALL, capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_converge_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n_fine": 256, "levels": [16, 32, 64], "realizations": 24, "seed": 3}))
    code, from_file, _ = run(["converge", "--problem", "ex3", "--config", str(cfg)], capsys)
    assert code == 0
    assert from_file == run(["converge", "--problem", "ex3"] + SMALL, capsys)[1]
    # explicit flags override the file
    code, out, _ = run(["converge", "--problem", "ex3", "--config", str(cfg), "--seed", "4"], capsys)
    assert "# seed=4" in out
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(["converge", "--problem", "ex3", "--config", str(cfg)], capsys)[0] == 1


def test_converge_to_ito(capsys):
    code, out, _ = run(["converge", "--problem", "ex2_strat", "--to-ito"] + SMALL, capsys)
    assert code == 0
    assert "# to_ito=True" in out


def test_check_solutions(capsys):
    code, out, _ = run(["check-solutions"], capsys)
    assert code == 0
    assert "8/8" in out


def test_check_solutions_strict_tolerance(capsys):
    code, out, _ = run(["check-solutions", "--tolerance", "1e-12"], capsys)
    assert code == 2
    assert "FAIL" in out


def test_check_solutions_single(capsys):
    code, out, _ = run(["check-solutions", "--problem", "ex3"], capsys)
    rows = [line for line in out.splitlines() if line.startswith("ex3")]
    assert code == 0 and len(rows) == 1
    assert "1/1" in out


@pytest.mark.parametrize("argv", [
    ["converge", "--problem", "nope"],
    ["simulate", "--problem", "nope"],
    ["converge", "--problem", "ex1", "--levels", "16,48"],
    ["converge", "--problem", "ex1", "--realizations", "1"],
    ["converge", "--problem", "ex2_strat", "--scheme", "em"],
    ["simulate", "--problem", "ex1", "--n", "8", "--levels", "3"],
])
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_unknown_command_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_unknown_problem_lists_catalogue(capsys):
    code, _, err = run(["converge", "--problem", "nope"], capsys)
    assert code == 1
    assert "autonomous" in err


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(["simulate", "--problem", "ex1", "--n", "8", "-o", str(blocker / "sub")], capsys)
    assert code == 3
    code, _, _ = run(["converge", "--problem", "ex1", "-o", str(blocker / "r.csv")] + SMALL, capsys)
    assert code == 3


def test_experiment_failure_exit_code(monkeypatch, capsys):
    from sderk import convergence

    real = convergence.run_experiment

    def failing(config, workers=1, problem=None):
        rep = real(config, workers)
        rep.failures.append("synthetic")
        return rep

    monkeypatch.setattr("sderk.cli.run_experiment", failing)
    code, out, err = run(["converge", "--problem", "ex3"] + SMALL, capsys)
    assert code == 2
    assert "synthetic" in err and "# failure=synthetic" in out
    assert not math.isnan(parse_csv(out)["slope"])
