import json

import numpy as np
import pytest

from cmcscreen.cli import load_result, main, read_table
from cmcscreen.screening import ScreeningConfig, scmc_screen


def _write(path, header, rows, delim=","):
    lines = [delim.join(header)] + [delim.join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def table(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 6))
    y = x[:, 0] + x[:, 1] * x[:, 2] + 0.3 * rng.normal(size=40)
    header = ["A", "B", "C", "Y", "D", "E", "F"]
    rows = np.column_stack([x[:, :3], y, x[:, 3:]])
    return _write(tmp_path / "data.csv", header, rows.tolist()), x, y


def test_header_only(tmp_path, capsys):
    f = _write(tmp_path / "h.csv", ["Y", "X1"], [])
    assert main(["screen", str(f), "--response", "Y", "-o", str(tmp_path / "out")]) == 2
    assert "no data rows" in capsys.readouterr().err


@pytest.mark.parametrize(
    "rows, needle",
    [([[1, 2], [3, ""]], "row 3, column 'X1'"), ([[1, 2], [3, "abc"]], "row 3, column 'X1'"),
     ([[1, 2], [3]], "row 3 has 1 fields"), ([[1, "NA"]], "missing value at row 2")],
)
def test_malformed_rows(tmp_path, capsys, rows, needle):
    f = _write(tmp_path / "bad.csv", ["Y", "X1"], rows)
    assert main(["screen", str(f), "--response", "Y", "-o", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err


def test_tab_delimited(tmp_path):
    f = _write(tmp_path / "t.tsv", ["Y", "X1", "X2"], [[1, 2, 3], [4, 5, 6]], delim="\t")
    t = read_table(f)
    assert t.names == ["Y", "X1", "X2"] and t.data.shape == (2, 3)


@pytest.mark.parametrize(
    "extra",
    [["--d1", "3", "--d2", "3"], ["--d1", "4", "--d2", "2"], ["--tau", "1.5"], ["--conditional", "Q"],
     ["--kernel", "box"], ["--cmc-bandwidth", "zero"]],
)
def test_config_errors(table, tmp_path, extra):
    f, _, _ = table
    assert main(["screen", str(f), "--response", "Y", "-o", str(tmp_path / "o")] + extra) == 3


def test_missing_response_column(table, tmp_path):
    f, _, _ = table
    assert main(["screen", str(f), "--response", "Z", "-o", str(tmp_path / "o")]) == 3


def test_too_few_rows(tmp_path):
    f = _write(tmp_path / "s.csv", ["Y", "X1", "X2"], [[1, 2, 3], [2, 3, 1], [3, 1, 2]])
    assert main(["screen", str(f), "--response", "Y", "--d1", "1", "--d2", "2", "-o", str(tmp_path / "o")]) == 4


def test_screen_outputs_and_roundtrip(table, tmp_path):
    f, x, y = table
    out = tmp_path / "o"
    assert main(["screen", str(f), "--response", "Y", "--d1", "2", "--d2", "4", "-o", str(out)]) == 0
    doc = json.loads((out / "result.json").read_text())
    assert doc["predictors"] == ["A", "B", "C", "D", "E", "F"]
    assert doc["manifest"]["input_sha256"] and doc["manifest"]["version"]
    assert "workers" not in doc["manifest"]["config"]
    in_memory = scmc_screen(y, x, ScreeningConfig(d1=2, d2=4))
    assert load_result(out / "result.json") == in_memory
    lines = (out / "scores.tsv").read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    assert lines[1].split("\t") == ["index", "name", "psi", "cmc", "combined", "rank"]
    assert len(lines) == 2 + 6
    first = lines[2].split("\t")
    assert first[3] == "NA" and first[5] == "1"


def test_rerun_and_workers_byte_identical(table, tmp_path, monkeypatch):
    f, _, _ = table
    outs = []
    for k, w in enumerate(["1", "3"]):
        monkeypatch.setenv("CMCSCREEN_WORKERS", w)
        out = tmp_path / f"o{k}"
        assert main(["screen", str(f), "--response", "Y", "--conditional", "A,B", "--d2", "4", "-o", str(out)]) == 0
        outs.append(out)
    for name in ("scores.tsv", "result.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_bad_workers_env(table, tmp_path, monkeypatch):
    f, _, _ = table
    monkeypatch.setenv("CMCSCREEN_WORKERS", "lots")
    assert main(["screen", str(f), "--response", "Y", "-o", str(tmp_path / "o")]) == 3


def test_measure(tmp_path, capsys):
    rng = np.random.default_rng(1)
    y = rng.normal(size=30)
    rows = np.column_stack([y, np.full(30, 2.0), y, rng.normal(size=30)])
    f = _write(tmp_path / "m.csv", ["Y", "K", "Ycopy", "C"], rows.tolist())
    assert main(["measure", str(f), "--response", "Y", "--targets", "K,Ycopy", "--bandwidth", "2var"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
    assert lines[0].split("\t") == ["target", "divergence_sq", "correlation", "s_n"]
    vals = {l.split("\t")[0]: [float(v) for v in l.split("\t")[1:]] for l in lines[1:]}
    assert vals["K"][1] == 0.0
    assert vals["Ycopy"][1] > 0.0
    assert main(["measure", str(f), "--response", "Y", "--targets", "Ycopy", "--conditional", "C"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len([l for l in out if not l.startswith("#")]) == 2


def test_simulate_single_rep(tmp_path):
    out = tmp_path / "sim"
    args = ["simulate", "--example", "4", "--n", "40", "--p", "12", "--reps", "1", "--seed", "3", "-o", str(out)]
    assert main(args) == 0
    lines = (out / "report.tsv").read_text().splitlines()
    assert lines[1].split("\t")[:7] == ["method", "P_X1", "P_X2", "P_X3", "P_X4", "P_X5", "P_all"]
    for row in lines[2:]:
        assert all(v in ("0.000", "1.000") for v in row.split("\t")[1:7])
    recs = (out / "replicates.jsonl").read_text().splitlines()
    assert "manifest" in json.loads(recs[0])
    assert {json.loads(r)["method"] for r in recs[1:]} == {"mdc", "scmc"}


def test_simulate_config_errors(tmp_path):
    base = ["simulate", "--n", "40", "--p", "12", "--reps", "1", "-o", str(tmp_path / "s")]
    assert main(base + ["--example", "1", "--rho", "1.5"]) == 3
    assert main(base + ["--example", "2"]) == 3  # p too small for the active set
    assert main(base + ["--example", "1", "--methods", "lasso"]) == 3


def test_generate_then_screen(tmp_path):
    csv = tmp_path / "ex.csv"
    assert main(["generate", "--example", "1", "--n", "50", "--p", "20", "--rho", "0.5", "--seed", "1", "-o", str(csv)]) == 0
    t = read_table(csv)
    assert t.names[:3] == ["Y", "X1", "X2"] and t.data.shape == (50, 21)


def test_example1_dump_selects_x6(tmp_path):
    # seed 0 pinned after checking against the simulation harness
    csv = tmp_path / "ex1.csv"
    gen = ["generate", "--example", "1", "--n", "200", "--p", "500", "--rho", "0.5", "--seed", "0", "-o", str(csv)]
    assert main(gen) == 0
    out = tmp_path / "o"
    assert main(["screen", str(csv), "--response", "Y", "--conditional", "X1", "-o", str(out)]) == 0
    doc = json.loads((out / "result.json").read_text())
    assert "X6" in doc["selected_names"]
    assert doc["conditional_names"] == ["X1"]
    assert main(["screen", str(csv), "--response", "Y", "--method", "mdc", "-o", str(tmp_path / "m")]) == 0
    assert "X6" not in json.loads((tmp_path / "m" / "result.json").read_text())["selected_names"]
