import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from fraclap_kit import cli

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_counterexample_scenario_passes(capsys):
    code, out, _ = run(["run", str(SCENARIOS / "ac-10-counterexamples.json")], capsys)
    assert code == cli.EXIT_PASS
    rep = json.loads(out)
    assert rep["verdict"] == "pass"
    assert any("-2 phi(0)" in m["label"] for m in rep["margins"])


def test_scenario_by_name(capsys):
    code, out, _ = run(["run", "ac-03-poisson"], capsys)
    assert code == 0 and json.loads(out)["scenario"]["name"] == "ac-03-poisson"


def test_constant_field_scenario(tmp_path, capsys):
    p = tmp_path / "const.json"
    p.write_text(json.dumps({"name": "const", "verifier": "fraclap-eval", "parameters": {"field": "constant", "n": [2], "s": [0.5]}}))
    code, out, _ = run(["run", str(p)], capsys)
    rep = json.loads(out)
    assert code == 0
    assert all(abs(m["value"]) <= 1e-6 for m in rep["margins"])


def test_maxprinciple_report_contents(capsys):
    code, out, _ = run(["run", "ac-08-maxprinciple"], capsys)
    rep = json.loads(out)
    assert code == 0
    text = json.dumps(rep["details"])
    assert "alpha" in text and "grid_min" in text


def test_json_is_byte_identical_and_round_trips(tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        assert cli.main(["run", "ac-03-poisson", "ac-10-counterexamples", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert b"\r\n" not in outs[0]
    data = json.loads(outs[0].decode("utf-8"))
    assert isinstance(data, list) and [r["scenario"]["name"] for r in data] == ["ac-03-poisson", "ac-10-counterexamples"]
    assert cli.dumps_json(data).encode("utf-8") == outs[0]


def test_csv_columns_and_quoting(capsys):
    code, out, _ = run(["run", "ac-10-counterexamples", "--report-format", "csv"], capsys)
    assert code == 0
    assert out.startswith("scenario,label,value,tolerance,pass\r\n")
    rows = list(csv.reader(io.StringIO(out, newline="")))
    assert all(len(r) == 5 for r in rows)
    assert {r[4] for r in rows[1:]} == {"true"}
    # labels containing commas survive quoting
    assert any("," in r[1] for r in rows[1:]) or all(r[0] == "ac-10-counterexamples" for r in rows[1:])


def test_parallel_preserves_input_order(tmp_path):
    names = ["ac-10-counterexamples", "ac-03-poisson", "ac-04-barrier-classical"]
    seq, par = tmp_path / "s.json", tmp_path / "p.json"
    assert cli.main(["run", *names, "--out", str(seq)]) == 0
    assert cli.main(["run", *names, "--parallel", "3", "--out", str(par)]) == 0
    assert seq.read_bytes() == par.read_bytes()
    assert [r["scenario"]["name"] for r in json.loads(par.read_text())] == names


def test_flags_override_file_values(capsys):
    code, out, _ = run(["run", "ac-03-poisson", "--frac-order", "0.6", "--seed", "9"], capsys)
    rep = json.loads(out)
    assert rep["scenario"]["parameters"]["s"] == 0.6 and rep["scenario"]["seed"] == 9


def test_timings_only_on_request(capsys):
    _, out, _ = run(["run", "ac-03-poisson"], capsys)
    assert "timings_ms" not in json.loads(out)
    _, out, _ = run(["run", "ac-03-poisson", "--timings"], capsys)
    assert "timings_ms" in json.loads(out)


def test_quad_budget_recorded(monkeypatch, capsys):
    monkeypatch.setenv("FLK_QUAD_BUDGET", "2")
    _, out, _ = run(["run", "ac-10-counterexamples"], capsys)
    assert json.loads(out)["provenance"]["quad_budget"] == 2


def test_failing_scenario_exit_code(tmp_path, capsys):
    p = tmp_path / "tight.json"
    p.write_text(json.dumps({"name": "tight", "verifier": "fraclap-eval", "parameters": {"field": "fundamental", "n": [2], "s": [0.75], "tolerance": 1e-300}}))
    code, out, _ = run(["run", str(p)], capsys)
    assert code == cli.EXIT_FAIL and json.loads(out)["verdict"] == "fail"


@pytest.mark.parametrize(
    "doc",
    [
        {"name": "x", "verifier": "nonsense", "parameters": {}},
        {"name": "x", "verifier": "poisson", "parameters": {"s": 1.5}},
        {"name": "x", "verifier": "poisson", "parameters": {"bogus_key": 1}},
        {"name": "x", "verifier": "poisson", "seed": "abc"},
        {"name": "x", "verifier": "poisson", "extra": 1},
    ],
)
def test_invalid_scenarios_exit_3(tmp_path, capsys, doc):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    code, _, err = run(["run", str(p)], capsys)
    assert code == cli.EXIT_INVALID
    assert err


def test_unreadable_inputs_exit_3(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert run(["run", str(p)], capsys)[0] == cli.EXIT_INVALID
    assert run(["run", str(tmp_path / "missing.json")], capsys)[0] == cli.EXIT_INVALID
    assert run(["frobnicate"], capsys)[0] == cli.EXIT_INVALID
    assert run(["run", "ac-03-poisson", "--parallel", "0"], capsys)[0] == cli.EXIT_INVALID


def test_list_shows_bundled_scenarios(capsys):
    code, out, _ = run(["list"], capsys)
    assert code == 0
    for i in range(1, 12):
        assert f"ac-{i:02d}-" in out
    assert "verifiers:" in out


def test_eval_command(capsys):
    code, out, _ = run(["eval", "--field", "constant", "--point", "0.5,0.2", "--frac-order", "0.5"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert abs(rep["value"]) < 1e-6 and rep["point"] == [0.5, 0.2]
    assert run(["eval", "--field", "constant", "--point", "a,b", "--frac-order", "0.5"], capsys)[0] == 3
    assert run(["eval", "--field", "constant", "--point", "0.5", "--frac-order", "1.5"], capsys)[0] == 3


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "fraclap_kit.cli", "list"], capture_output=True, text=True, cwd=ROOT)
    assert res.returncode == 0 and "ac-01" in res.stdout
