import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interp_solve.cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_OK, main
from interp_solve.core import ParseError
from interp_solve.runner import RunConfig, aggregate, format_float, resolve

QUAD = ["--problem", "quadratic", "--rho", "-0.3", "--L", "1"]


def read_rows(path):
    with open(os.path.join(path, "trajectory.csv")) as fh:
        return list(csv.reader(fh))


def read_report(path):
    with open(os.path.join(path, "report.json")) as fh:
        return json.load(fh)


def test_run_writes_k_plus_one_rows(tmp_path):
    out = tmp_path / "r"
    code = main(["run", *QUAD, "--solver", "rapp", "--gamma", "0.7", "--lambda", "0.5",
                 "--K", "1000", "--tau", "auto-last", "--output", str(out)])
    assert code == EXIT_OK
    rows = read_rows(out)
    assert rows[0] == ["iter", "oracle_calls", "residual", "dist_to_zero", "z_0", "z_1"]
    assert len(rows) == 1002
    assert all(len(r) == 4 + 2 for r in rows)
    rep = read_report(out)
    assert rep["resolved"]["residual_kind"] == "exact"
    # tau = ceil(log(1000^2) / log(1/0.7))
    assert rep["resolved"]["tau"] == 39
    assert rep["bounds"]["km"]["satisfied"] is True


def test_csv_floats_round_trip(tmp_path):
    out = tmp_path / "r"
    main(["run", *QUAD, "--solver", "km-exact", "--gamma", "0.7", "--K", "20", "--output", str(out)])
    for row in read_rows(out)[1:]:
        for cell in row[2:]:
            x = float(cell)
            assert format_float(x) == cell
            assert len(cell.split("e")[0].replace("-", "").replace(".", "")) == 17


def test_forsaken_target_stop_with_auto_gamma(tmp_path):
    out = tmp_path / "f"
    code = main(["run", "--problem", "forsaken", "--solver", "la-gda", "--tau", "20", "--lambda", "0.2",
                 "--gamma", "auto", "--target", "1e-4", "--K", "1000", "--output", str(out)])
    assert code == EXIT_OK
    rep = read_report(out)
    assert rep["stop_reason"] == "target"
    assert rep["resolved"]["gamma"] == pytest.approx(1 / 12.402569232153313)
    assert 0.075 < rep["resolved"]["gamma"] < 0.085
    assert rep["final_residual"] <= 1e-4


def test_gamma_auto_with_cegplus_check(tmp_path):
    out = tmp_path / "c"
    main(["run", "--problem", "polar", "--solver", "cegplus", "--alpha", "0.1", "--K", "50",
          "--checks", "cegplus", "--output", str(out)])
    rep = read_report(out)
    L = rep["problem"]["lipschitz"]
    assert rep["resolved"]["gamma"] == pytest.approx(0.9 / L)
    assert rep["config"]["gamma"] == "auto"
    assert rep["bounds"]["cegplus"]["satisfied"] is True


def test_runs_are_byte_identical(tmp_path):
    args = [*QUAD, "--solver", "rapp", "--gamma", "0.7", "--tau", "3", "--K", "200",
            "--sigma0", "0.2", "--batch", "best", "--seed", "17"]
    main(["run", *args, "--output", str(tmp_path / "a")])
    main(["run", *args, "--output", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_divergence_exit_code_keeps_partial_output(tmp_path):
    out = tmp_path / "d"
    code = main(["run", *QUAD, "--solver", "gda", "--gamma", "0.5", "--K", "100000", "--output", str(out)])
    assert code == EXIT_DIVERGED
    rep = read_report(out)
    assert rep["status"] == "divergence"
    assert len(read_rows(out)) == rep["iterations"] + 2


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--problem", "nope"],
        ["run", "--solver", "sgd"],
        ["run", *QUAD, "--gamma", "1.2", "--solver", "rapp"],
        ["run", "--K", "ten"],
        ["run", "--checks", "magic"],
        ["report"],
    ],
)
def test_validation_errors_exit_one(argv, tmp_path, capsys):
    assert main(argv + (["--output", str(tmp_path / "x")] if argv[0] == "run" else [])) == EXIT_INVALID
    assert "error" in capsys.readouterr().err


def test_unwritable_output_fails_before_running(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", *QUAD, "--gamma", "0.7", "--output", str(blocker / "sub")]) == EXIT_INVALID
    assert not (tmp_path / "file" / "sub").exists()


def test_unchecked_records_warnings(tmp_path):
    out = tmp_path / "u"
    code = main(["run", *QUAD, "--solver", "rapp", "--gamma", "0.5", "--K", "10", "--unchecked",
                 "--output", str(out)])
    assert code == EXIT_OK
    assert any("rho" in w for w in read_report(out)["warnings"])


def test_config_file_and_flag_override(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# provenance\nproblem = quadratic\nrho = -0.3\nL = 1\nsolver = rapp\ngamma = 0.7\n"
                        "lambda = 0.25\nK = 5\n")
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg_path), "--K", "7", "--output", str(out)]) == EXIT_OK
    rep = read_report(out)
    assert rep["iterations"] == 7
    assert rep["params"]["lam"] == 0.25


def test_config_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        RunConfig.from_text("problem quadratic\n")
    with pytest.raises(ParseError):
        RunConfig.from_text("colour = blue\n")
    with pytest.raises(ParseError):
        RunConfig.from_text("K = many\n")
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense\n")
    assert main(["run", "--config", str(bad)]) == EXIT_INVALID


finite = st.floats(-1e6, 1e6, allow_nan=False).filter(lambda x: x != 0)


@settings(max_examples=50)
@given(
    st.sampled_from(["quadratic", "polar", "forsaken", "lne-forsaken"]),
    st.sampled_from(["rapp", "la-gda", "cegplus", "relaxed-pp"]),
    st.one_of(st.just("auto"), st.floats(1e-6, 10)),
    st.floats(0.01, 1.0),
    st.one_of(st.integers(1, 50), st.sampled_from(["auto-best", "auto-last"])),
    st.integers(0, 10**6),
    st.one_of(st.just("default"), st.lists(finite, min_size=2, max_size=2)),
    st.lists(st.sampled_from(["km", "fejer", "cegplus"]), unique=True),
    st.one_of(st.none(), st.floats(1e-12, 1.0)),
    st.booleans(),
    st.one_of(st.integers(1, 100), st.sampled_from(["best", "last"])),
)
def test_config_round_trip(problem, solver, gamma, lam, tau, seed, z0, checks, target, unchecked, batch):
    cfg = RunConfig(problem=problem, solver=solver, gamma=gamma, lam=lam, tau=tau, seed=seed, z0=z0,
                    checks=checks, target=target, unchecked=unchecked, batch=batch, rho=-0.25)
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_sweep_grid(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", "--problem", "polar", "--solver", "la-gda", "--lambda", "0.1", "--K", "50",
                 "--grid", "tau=2,5,10", "--out", str(out)])
    assert code == EXIT_OK
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["label"] for r in rows] == ["tau=2", "tau=5", "tau=10"]
    dirs = sorted(d for d in os.listdir(out) if (out / d).is_dir())
    assert len(dirs) == 3
    for d in dirs:
        assert (out / d / "trajectory.csv").exists()


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["sweep", *QUAD, "--solver", "rapp", "--gamma", "0.7", "--K", "30",
            "--grid", "tau=1,2,3", "--grid", "lambda=0.25,0.5"]
    assert main(args + ["--out", str(tmp_path / "serial")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "par"), "--jobs", "2"]) == EXIT_OK
    s = (tmp_path / "serial" / "summary.csv").read_text().replace(str(tmp_path / "serial"), "X")
    p = (tmp_path / "par" / "summary.csv").read_text().replace(str(tmp_path / "par"), "X")
    assert s == p
    for d in os.listdir(tmp_path / "serial"):
        if (tmp_path / "serial" / d).is_dir():
            a = (tmp_path / "serial" / d / "trajectory.csv").read_bytes()
            assert a == (tmp_path / "par" / d / "trajectory.csv").read_bytes()


def test_sweep_records_partial_failures(tmp_path):
    out = tmp_path / "p"
    code = main(["sweep", *QUAD, "--solver", "rapp", "--K", "10", "--grid", "gamma=0.7,1.5", "--out", str(out)])
    assert code == EXIT_OK
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["status"] for r in rows] == ["ok", "error"]
    assert "gamma*L" in rows[1]["error"]


def test_sweep_jobs_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("INTERP_SOLVE_JOBS", "0")
    assert main(["sweep", *QUAD, "--gamma", "0.7", "--grid", "tau=1", "--out", str(tmp_path / "e")]) == EXIT_INVALID


def test_presets_declare_the_expected_runs():
    from interp_solve.runner import preset_runs

    fors = preset_runs("fig-forsaken", RunConfig())
    assert [label for label, _ in fors] == ["la-gda", "la-cegplus", "rapp", "app"]
    app = dict(fors)["app"]
    assert app["lam"] == 1.0 and app["tau"] == 10
    la = preset_runs("fig-la", RunConfig())
    assert len(la) == 8
    quad = [kw for label, kw in la if label.startswith("quadratic")]
    assert all(kw["rho"] == pytest.approx(-1 / 3) for kw in quad)
    assert {kw["tau"] for kw in quad if kw["solver"] == "la-gda"} == {2, 10}


def test_report_counts(tmp_path, capsys):
    out = tmp_path / "s"
    main(["sweep", *QUAD, "--solver", "rapp", "--gamma", "0.7", "--K", "20", "--grid", "tau=1,3", "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["runs"] == 2
    km = doc["bounds"]["km"]
    assert km["pass"] + km["fail"] == 2


def test_report_single_passing_run(tmp_path, capsys):
    out = tmp_path / "one"
    main(["run", *QUAD, "--solver", "km-exact", "--gamma", "0.7", "--K", "50", "--checks", "km",
          "--output", str(out)])
    capsys.readouterr()
    main(["report", str(out / "report.json")])
    doc = json.loads(capsys.readouterr().out)
    assert doc["bounds"] == {"km": {"pass": 1, "fail": 0, "inapplicable": 0}}


def test_report_malformed_file_names_it(tmp_path):
    bad = tmp_path / "report.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError, match="report.json"):
        aggregate([str(bad)])
    assert main(["report", str(bad)]) == EXIT_INVALID


def test_resolve_defaults():
    res = resolve(RunConfig(problem="polar", solver="la-gda"))
    assert res.residual_kind == "step"
    np.testing.assert_array_equal(res.z0, [1.0, 1.0])
    np.testing.assert_array_equal(res.z_star, [0.0, 0.0])
    assert res.params.gamma == pytest.approx(1 / res.problem.lipschitz)


def test_module_entry_point(tmp_path):
    out = tmp_path / "m"
    proc = subprocess.run(
        [sys.executable, "-m", "interp_solve", "run", *QUAD, "--gamma", "0.7", "--K", "5", "--output", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "rapp on quadratic" in proc.stdout
