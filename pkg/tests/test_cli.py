import json
import subprocess
import sys

import pytest

from carbonsched.cli import build_parser, main
from carbonsched.registry import builtin_pool, dump_pool
from helpers import grid_carbon, grid_requests


@pytest.fixture
def trace_files(tmp_path):
    carbon = tmp_path / "carbon.csv"
    requests = tmp_path / "requests.csv"
    carbon.write_text(grid_carbon([100, 140, 180, 220, 160, 120]).to_csv())
    requests.write_text(grid_requests([1000, 2000, 1500, 800, 1200, 900]).to_csv())
    return carbon, requests


def test_parser_covers_all_subcommands():
    parser = build_parser()
    args = parser.parse_args(["simulate", "--mapping", "literal", "--window", "6"])
    assert args.command == "simulate"
    assert args.mapping == "literal"
    args = parser.parse_args(["serve", "--feed-url", "http://x/", "--port", "9000"])
    assert args.command == "serve"
    args = parser.parse_args(
        ["cee", "--baseline-error", "7.138", "--candidate-error", "5.954",
         "--baseline-carbon", "0", "--candidate-carbon", "5720"]
    )
    assert args.command == "cee"
    args = parser.parse_args(["validate", "--pool-builtin", "full"])
    assert args.command == "validate"


def test_parser_rejects_unknown_mapping():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["simulate", "--mapping", "auto"])
    assert exc.value.code == 2


def test_simulate_writes_report_and_prints_matching_summary(tmp_path, trace_files, capsys):
    carbon, requests = trace_files
    out = tmp_path / "report.json"
    code = main(
        ["simulate", "--carbon", str(carbon), "--requests", str(requests),
         "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    policies = {p["policy"] for p in doc["policies"]}
    assert policies == {"heuristic", "ResNet34", "ResNet50", "ResNet101", "ResNet152"}
    captured = capsys.readouterr().out
    assert "rounded to 4 significant digits" in captured
    # printed numbers are the report's fields rounded to 4 significant digits
    for policy_doc in doc["policies"]:
        row = next(
            line for line in captured.splitlines()
            if line.startswith(policy_doc["policy"] + " ")
        )
        assert f"{policy_doc['total_carbon_g']:.4g}" in row
        assert f"{policy_doc['blended_error_pct']:.4g}" in row
    for comparison in doc["comparisons"]:
        row = next(
            line for line in captured.splitlines()
            if line.startswith(comparison["candidate"] + " ")
        )
        assert f"{comparison['cee']:.4g}" in row


def test_simulate_csv_format(tmp_path, trace_files):
    carbon, requests = trace_files
    out = tmp_path / "report.csv"
    code = main(
        ["simulate", "--carbon", str(carbon), "--requests", str(requests),
         "--out", str(out), "--format", "csv"]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "policy,start_utc,end_utc,model,count,energy_mj_total,carbon_g"
    assert len(lines) == 1 + 5 * 6  # five policies x six intervals


def test_simulate_missing_carbon_file_exits_1_naming_path(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = main(["simulate", "--carbon", str(missing)])
    assert code == 1
    assert "nope.csv" in capsys.readouterr().err


def test_simulate_unknown_baseline_is_config_error(trace_files, tmp_path, capsys):
    carbon, requests = trace_files
    code = main(
        ["simulate", "--carbon", str(carbon), "--requests", str(requests),
         "--baseline", "GoogLeNet", "--out", str(tmp_path / "r.json")]
    )
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_simulate_mapping_changes_model_mix(tmp_path, trace_files):
    carbon, requests = trace_files
    out_prose = tmp_path / "prose.json"
    out_literal = tmp_path / "literal.json"
    assert main(["simulate", "--carbon", str(carbon), "--requests", str(requests),
                 "--mapping", "prose", "--out", str(out_prose)]) == 0
    assert main(["simulate", "--carbon", str(carbon), "--requests", str(requests),
                 "--mapping", "literal", "--out", str(out_literal)]) == 0
    prose_doc = json.loads(out_prose.read_text())
    literal_doc = json.loads(out_literal.read_text())

    def models(doc):
        policy = next(p for p in doc["policies"] if p["policy"] == "heuristic")
        return [e["model"] for e in policy["per_interval"]]

    assert models(prose_doc) != models(literal_doc)


def test_simulate_defaults_to_bundled_samples(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(["simulate", "--out", str(tmp_path / "r.json")])
    assert code == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    assert len(doc["policies"][0]["per_interval"]) == 336


def test_simulate_config_file_supplies_settings(tmp_path, trace_files):
    carbon, requests = trace_files
    config = tmp_path / "config.json"
    out = tmp_path / "from_config.json"
    config.write_text(json.dumps({
        "carbon": str(carbon),
        "requests": str(requests),
        "mapping": "literal",
        "bounds": {"mode": "trailing", "hours": 3},
        "pool": "full",
        "baseline": "ResNet50",
        "out": str(out),
    }))
    assert main(["simulate", "--config", str(config)]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["mapping"] == "literal"
    assert doc["config"]["window"] == {"mode": "trailing", "hours": 3.0}
    assert len(doc["config"]["pool_models"]) == 7


def test_simulate_env_overrides_mapping(tmp_path, trace_files, monkeypatch):
    carbon, requests = trace_files
    monkeypatch.setenv("CARBONSCHED_MAPPING", "literal")
    out = tmp_path / "env.json"
    assert main(["simulate", "--carbon", str(carbon), "--requests", str(requests),
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["config"]["mapping"] == "literal"


def test_simulate_flag_beats_env(tmp_path, trace_files, monkeypatch):
    carbon, requests = trace_files
    monkeypatch.setenv("CARBONSCHED_MAPPING", "literal")
    out = tmp_path / "flag.json"
    assert main(["simulate", "--carbon", str(carbon), "--requests", str(requests),
                 "--mapping", "prose", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["config"]["mapping"] == "prose"


def test_cee_reproduces_reference_quotients(capsys):
    assert main(["cee", "--baseline-error", "7.138", "--candidate-error", "5.954",
                 "--baseline-carbon", "0", "--candidate-carbon", "5720"]) == 0
    out = capsys.readouterr().out
    assert "cee: 0.00289987" in out
    assert main(["cee", "--baseline-error", "7.138", "--candidate-error", "6.57",
                 "--baseline-carbon", "0", "--candidate-carbon", "1532"]) == 0
    out = capsys.readouterr().out
    assert "cee: 0.00519413" in out


def test_cee_zero_improvement(capsys):
    assert main(["cee", "--baseline-error", "7.138", "--candidate-error", "7.138",
                 "--baseline-carbon", "0", "--candidate-carbon", "100"]) == 0
    out = capsys.readouterr().out
    assert "quality_improvement_pct: 0" in out
    assert "cee: 0" in out


def test_cee_undefined_exits_1(capsys):
    code = main(["cee", "--baseline-error", "7.138", "--candidate-error", "5.954",
                 "--baseline-carbon", "50", "--candidate-carbon", "50"])
    assert code == 1
    assert "CEE undefined" in capsys.readouterr().err


def test_validate_carbon_summary(trace_files, capsys):
    carbon, _ = trace_files
    assert main(["validate", "--carbon", str(carbon)]) == 0
    out = capsys.readouterr().out
    assert "6 rows" in out
    assert "min 100" in out and "max 220" in out


def test_validate_requests_summary(trace_files, capsys):
    _, requests = trace_files
    assert main(["validate", "--requests", str(requests)]) == 0
    out = capsys.readouterr().out
    assert "6 rows" in out
    assert "total 7400" in out


def test_validate_overlap_names_both_rows(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "start_utc,end_utc,intensity_g_per_kwh\n"
        "2023-06-01T00:00Z,2023-06-01T00:30Z,100\n"
        "2023-06-01T00:15Z,2023-06-01T00:45Z,120\n"
    )
    assert main(["validate", "--carbon", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "lines 2 and 3" in err


def test_validate_builtin_pool_echoes_seven_rows(capsys):
    assert main(["validate", "--pool-builtin", "full"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "pool OK: 7 rows"
    assert len(out) == 8


def test_validate_pool_file(tmp_path, capsys):
    path = tmp_path / "pool.csv"
    path.write_text(dump_pool(builtin_pool("resnet")))
    assert main(["validate", "--pool", str(path)]) == 0
    assert "4 rows" in capsys.readouterr().out


def test_serve_without_feed_is_config_error(capsys):
    assert main(["serve"]) == 2
    assert "no intensity feed configured" in capsys.readouterr().err


def test_cli_entrypoint_runs_as_module(trace_files, tmp_path):
    carbon, requests = trace_files
    out = tmp_path / "module.json"
    result = subprocess.run(
        [sys.executable, "-m", "carbonsched.cli", "simulate",
         "--carbon", str(carbon), "--requests", str(requests), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert out.exists()
