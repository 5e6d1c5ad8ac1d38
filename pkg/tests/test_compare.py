import json
import shutil

import numpy as np
import pytest
import yaml

from martcomp.cli import main
from martcomp.compare import (ComparisonReport, compile_expression, decide, emit_report, exit_code,
                              load_scenario, parse_number, report_text, run_scenario, scenario_from_dict)
from martcomp.errors import ConfigurationError
from martcomp.mc_engine import MCEstimate

from conftest import SCENARIOS

FAST = {"mc": {"n_paths": 4000, "n_steps": 32, "linking_paths": 200},
        "grids": {"time_step": 1 / 64, "space_step": 1 / 64}}


def _raw(**kw):
    raw = {"spec_version": 1, "name": "t", "theorem": "cx_emm", "model_X": {"diffusion": 0.09},
           "model_Y": {"diffusion": 0.0225}, "payoff": {"type": "call", "strike": 0.0}}
    raw.update(kw)
    return raw


@pytest.fixture(scope="module")
def bachelier_report():
    return run_scenario(load_scenario(SCENARIOS / "bachelier_cx.yaml", FAST))


def test_expression_compiler():
    f = compile_expression("exp(-x**2) * where(t < 0.5, 1, 2)")
    assert np.allclose(f(0.25, np.array([0.0, 1.0])), [1.0, np.exp(-1)])
    for bad in ("__import__('os')", "x.real", "y + 1", "'a'", "x +", "lambda: 1"):
        with pytest.raises(ConfigurationError):
            compile_expression(bad)


def test_parse_number():
    assert parse_number("1/256") == 1 / 256 and parse_number(3) == 3.0
    for bad in ("abc", "1/0", True, None):
        with pytest.raises(ConfigurationError):
            parse_number(bad)


@pytest.mark.parametrize("patch", [{"spec_version": 2}, {"theorem": "nope"}, {"model_Y": None},
                                   {"payoff": {"type": "put", "strike": 0.0}, "theorem": "icx_emm"},
                                   {"model_X": {"kernel": {"type": "mystery"}}}])
def test_loader_rejects(patch):
    raw = _raw(**patch)
    raw = {k: v for k, v in raw.items() if v is not None}
    with pytest.raises(ConfigurationError):
        scenario_from_dict(raw)


def test_loader_yaml_error(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("spec_version: [1,\n")
    with pytest.raises(ConfigurationError):
        load_scenario(p)


def test_overrides_and_defaults():
    sc = scenario_from_dict(_raw(grids={"time_step": "1/128"}), {"mc": {"seed": 5}})
    assert sc.grids["time_step"] == 1 / 128 and sc.grids["space_step"] == 1 / 128
    assert sc.mc["seed"] == 5 and sc.mc["n_paths"] == 20000


def test_all_shipped_scenarios_load():
    for p in sorted(SCENARIOS.glob("*.yaml")):
        assert load_scenario(p).name == p.stem


def test_decide_rules():
    x, y = MCEstimate(1.0, 0.01, 100), MCEstimate(0.9, 0.01, 100)
    assert decide("ordered", True, x, y, 0.0)[0] == "ordering_confirmed"
    assert decide("reversed", True, x, y, 0.0)[0] == "ordering_contradicted"
    assert decide("ordered", True, x, y, 0.2)[0] == "ordering_contradicted"
    assert decide("ordered", False, x, y, 0.0)[0] == "inconclusive"
    assert decide(None, True, x, y, 0.0)[0] == "inconclusive"


def test_report_json_round_trip(bachelier_report, tmp_path):
    s = bachelier_report.to_json()
    again = ComparisonReport.from_dict(json.loads(s)).to_json()
    assert s == again
    emit_report(bachelier_report, "json", tmp_path / "r.json")
    assert (tmp_path / "r.json").read_text() == s


def test_report_text(bachelier_report):
    txt = report_text(bachelier_report)
    assert "verdict: ordering_confirmed" in txt and "margin:" in txt


def test_csv_bundle(bachelier_report, tmp_path):
    files = emit_report(bachelier_report, "csv_bundle", tmp_path / "b")
    assert {f.name for f in files} == {"field.csv", "residual.csv", "paths_Y.csv", "checklist.csv"}
    r = bachelier_report.residual
    rows = (tmp_path / "b" / "residual.csv").read_text().splitlines()
    assert len(rows) == 1 + r["n_t"] * r["n_x"]


def test_mirrored_scenario_is_reversed():
    rep = run_scenario(load_scenario(SCENARIOS / "bachelier_swapped.yaml", FAST))
    dec = rep.estimates["decision"]
    assert rep.conclusion == "ordering_confirmed" and dec["branch"] == "reversed"
    assert exit_code(rep) == 0


def test_partial_report_on_error():
    y = {"diffusion": 0.01, "kernel": {"type": "compound_poisson", "intensity": 1.0,
                                       "law": {"type": "normal", "mean": 0.0, "std": 0.1},
                                       "modulation": {"expr": "2 + 0*x", "bound": 1.0}}}
    rep = run_scenario(scenario_from_dict(_raw(model_Y=y), FAST))
    assert rep.conclusion == "inconclusive" and exit_code(rep) == 2
    assert rep.error["stage"] == "mc_engine" and rep.error["type"] == "DataError"
    assert rep.residual is not None and rep.checklist


def test_cli_run_and_report(tmp_path, capsys):
    out = tmp_path / "bach"
    code = main(["run", str(SCENARIOS / "bachelier_cx.yaml"), "--paths", "4000", "--steps", "32",
                 "--grid", "1/64,1/64", "--out", str(out)])
    assert code == 0
    data = json.loads(out.with_suffix(".json").read_text())
    assert data["conclusion"] == "ordering_confirmed"
    assert data["provenance"]["field"]["n_t"] == 65
    capsys.readouterr()
    assert main(["report", str(out.with_suffix(".json"))]) == 0
    assert "verdict: ordering_confirmed" in capsys.readouterr().out


def test_cli_errors(tmp_path):
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    assert main(["run", str(SCENARIOS / "bachelier_cx.yaml"), "--grid", "1/64"]) == 2
    (tmp_path / "empty").mkdir()
    assert main(["batch", str(tmp_path / "empty")]) == 2


def test_cli_contradiction_exit_code(tmp_path):
    # mixed hypotheses give no direction; the default flag claims ordered but Y is far wider
    x = {"diffusion": 0.01, "kernel": {"type": "compound_poisson", "intensity": 0.5,
                                       "law": {"type": "normal", "mean": 0.0, "std": 0.1}}}
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(_raw(model_X=x, model_Y={"diffusion": 0.09})))
    code = main(["run", str(p), "--paths", "4000", "--steps", "32", "--grid", "1/64,1/64",
                 "--out", str(tmp_path / "c")])
    rep = json.loads((tmp_path / "c.json").read_text())
    assert rep["conclusion"] == "ordering_contradicted"
    assert rep["estimates"]["decision"]["direction_source"] == "scenario_flag"
    assert code == 1


def test_cli_batch(tmp_path):
    d = tmp_path / "sc"
    d.mkdir()
    shutil.copy(SCENARIOS / "bachelier_cx.yaml", d)
    shutil.copy(SCENARIOS / "bachelier_swapped.yaml", d)
    args = ["batch", str(d), "--paths", "2000", "--steps", "32", "--grid", "1/64,1/64"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("bachelier_cx.json", "bachelier_swapped.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
