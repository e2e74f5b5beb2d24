import csv
import json

import pytest

from kgstep import cli
from kgstep.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_params_preset(capsys):
    assert main(["params", "--preset"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "1.2977168413867373" in out
    assert "1.317" in out and "discrepancies" in out
    assert "0.0506773" in out


def test_params_simple(capsys):
    assert main(["params", "--mu0", "1", "--k", "0.5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0.8660254037844386" in out
    assert "discrepancies" not in out


@pytest.mark.parametrize(
    "argv",
    [
        ["params"],
        ["params", "--k", "0.5"],
        ["params", "--mu0", "1"],
        ["params", "--mu0", "1", "--k", "0.5", "--energy-ev", "3"],
        ["params", "--mu0", "1", "--k", "1.5"],
        ["snapshot", "--mu0", "1", "--k", "0.5", "--t", "0.01", "--grid", "0,3,1"],
        ["snapshot", "--mu0", "1", "--k", "0.5", "--t", "0.01", "--grid", "3,0,5"],
        ["snapshot", "--mu0", "1", "--k", "0.5", "--t", "0.01", "--grid", "0,3"],
        ["snapshot", "--mu0", "1", "--k", "0.5", "--grid", "0,3,5"],
        ["snapshot", "--mu0", "1", "--k", "0.5", "--t", "0.01", "--grid", "0,3,5", "--tol", "1e-3"],
        ["figure", "--figure", "fig9"],
        ["frobnicate"],
    ],
)
def test_usage_errors(tmp_path, argv):
    with pytest.raises(SystemExit) as info:
        code = main(argv + ["--out", str(tmp_path / "o")])
        raise SystemExit(code)
    assert info.value.code == EXIT_USAGE
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_snapshot_csv(tmp_path):
    out = tmp_path / "snap"
    argv = ["snapshot", "--preset", "--t", "0.01", "--grid", "0,4,41", "--out", str(out)]
    assert main(argv) == EXIT_OK
    rows = read_csv(out / "snapshot_t0.01.csv")
    assert rows[0] == ["x_nm", "re_psi", "im_psi", "abs2_psi", "abs2_phi", "method", "est_error"]
    assert len(rows) == 42
    assert all(r[5] and r[6] for r in rows[1:])
    # beyond ct = 2.998 nm the evaluator is bypassed and reports so
    assert rows[-1][5] == "StableSeries-bypass" and rows[-1][1] == "0"
    assert rows[2][5] == "StableSeries"
    assert b"\r\n" not in (out / "snapshot_t0.01.csv").read_bytes()
    man = json.loads((out / "manifest.json").read_text())
    assert man["params"]["two_x_p"] == pytest.approx(1.2977168413867373)
    assert {f["id"] for f in man["open_questions"]} == {"energy_literal", "two_x_p"}
    assert man["outputs"] == ["snapshot_t0.01.csv"]


def test_seventeen_digits(tmp_path):
    out = tmp_path / "s"
    main(["snapshot", "--preset", "--t", "0.01", "--grid", "0.1,0.2,2", "--out", str(out)])
    row = read_csv(out / "snapshot_t0.01.csv")[1]
    assert float(row[1]) == float(f"{float(row[1]):.17g}")
    assert len(row[1].lstrip("-").replace(".", "").lstrip("0").split("e")[0]) >= 15


def _strip(man):
    man.pop("run")
    return man


def test_determinism_and_manifest_roundtrip(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    argv = ["timeseries", "--preset", "--x", "0.4,0.8", "--grid", "0,0.02,101"]
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert main(["timeseries", "--config", str(a / "manifest.json"), "--out", str(c)]) == EXIT_OK
    files = sorted(p.name for p in a.iterdir())
    assert files == ["manifest.json", "timeseries_all.csv", "timeseries_x0.4.csv", "timeseries_x0.8.csv"]
    for name in files:
        if name.endswith(".csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()
    mans = [_strip(json.loads((d / "manifest.json").read_text())) for d in (a, b, c)]
    assert mans[0] == mans[1] == mans[2]


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mu0": 1.0, "energy_k": 0.5, "t": [0.01], "grid": [0, 1, 5], "tol": 1e-10}))
    out = tmp_path / "o"
    assert main(["snapshot", "--config", str(cfg), "--grid", "0,1,3", "--out", str(out)]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["grid"] == [0.0, 1.0, 3]
    assert man["config"]["tol"] == 1e-10
    assert man["open_questions"] == []
    assert len(read_csv(out / "snapshot_t0.01.csv")) == 4


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["params", "--config", str(bad)]) == EXIT_USAGE
    bad.write_text(json.dumps({"mu0": 1.0, "energy_k": 0.5, "colour": "red"}))
    assert main(["params", "--config", str(bad)]) == EXIT_USAGE


def test_energy_ev_flag(tmp_path):
    out = tmp_path / "e"
    assert main(["snapshot", "--mu0", "1.542", "--energy-ev", "10", "--t", "0.01", "--grid", "0,1,3", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["params"]["energy_k"] == pytest.approx(10 / 197.3269804)
    assert man["config"]["energy_ev"] == 10.0
    assert man["open_questions"] == []


def test_timeseries_warns_before_front(tmp_path, caplog):
    out = tmp_path / "w"
    with caplog.at_level("WARNING", logger="kgstep"):
        assert main(["timeseries", "--preset", "--x", "3.0", "--grid", "0,0.005,11", "--out", str(out)]) == EXIT_OK
    assert "all-zero" in caplog.text
    rows = read_csv(out / "timeseries_x3.csv")
    assert all(r[1] == "0" and r[2] == "0" for r in rows[1:])


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["snapshot", "--preset", "--t", "0.01", "--grid", "0,1,3", "--out", str(blocker / "sub")])
    assert code == EXIT_RUNTIME


def test_tolerance_failure_is_runtime(tmp_path):
    code = main(["timeseries", "--preset", "--x", "0", "--grid", "49,50,2", "--tol", "1e-14", "--out", str(tmp_path / "t")])
    assert code == EXIT_RUNTIME


def test_workers_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["snapshot", "--preset", "--t", "0.05", "--grid", "0,16,200"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b), "--workers", "2"]) == 0
    assert (a / "snapshot_t0.05.csv").read_bytes() == (b / "snapshot_t0.05.csv").read_bytes()


def test_figure_fig7(tmp_path):
    out = tmp_path / "f7"
    assert main(["figure", "--figure", "fig7", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "fig7_report.json").read_text())
    assert rep["diffraction"]["3"]["present"] is False
    assert len(read_csv(out / "fig7_x3.csv")) == 2002


def test_figure_presets_match_published_grids():
    assert cli.FIGURES["fig4"].fixed == (0.05,) and cli.FIGURES["fig4"].grid == (0.0, 16.0, 2000)
    assert cli.FIGURES["fig5"].fixed == (0.3,) and cli.FIGURES["fig5"].grid[:2] == (0.0, 92.0)
    assert cli.FIGURES["fig6"].fixed == (0.4, 0.6, 0.8)
    assert cli.FIGURES["fig7"].fixed == (3.0,)
    assert cli.FIGURES["fig8"].fixed == (0.1, 0.3, 0.5)


def test_validate_memory_cap(tmp_path, capsys):
    code = main(["validate", "--max-memory-mb", "0.5", "--out", str(tmp_path / "v")])
    assert code == EXIT_RUNTIME
    assert "resource limit" in capsys.readouterr().err


def test_validate_rejects_propagating_before_running(tmp_path):
    assert main(["validate", "--mu0", "1", "--k", "2", "--out", str(tmp_path / "v")]) == EXIT_USAGE
    assert not (tmp_path / "v").exists()


@pytest.mark.slow
def test_validate_reports_every_check(tmp_path, capsys):
    out = tmp_path / "v"
    code = main(["validate", "--fdtd-threshold", "1e-14", "--out", str(out)])
    rep = json.loads((out / "report.json").read_text())
    names = [c["name"] for c in rep["checks"]]
    assert names == [
        "series_vs_quadrature",
        "fdtd_ratio_per_halving",
        "fdtd_final_error",
        "free_limit",
        "stationary_limit",
        "cutoff_asymptote",
        "causality",
    ]
    by_name = {c["name"]: c for c in rep["checks"]}
    # a 1e-14 FDTD tolerance is below the discretisation floor and must be reported as a failure
    assert not by_name["fdtd_final_error"]["passed"]
    assert by_name["fdtd_final_error"]["measured"] > 1e-7
    assert code == 2 and rep["passed"] is False
    assert "FAIL  fdtd_final_error" in capsys.readouterr().out
    for name in ("series_vs_quadrature", "free_limit", "stationary_limit", "cutoff_asymptote", "causality"):
        assert by_name[name]["passed"], name
