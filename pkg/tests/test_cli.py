import asyncio
import json

import pytest

from imcflab.errors import ConfigError
from imcflab.handlers.sweep import expand_sweep, run_key
from imcflab.routers import parse_args, parse_config
from main import main


def run(*argv):
    return asyncio.run(main(list(argv)))


def test_minimal_document_takes_defaults():
    config = parse_config('{"command": "solve-reg", "metric": {"preset": "euclidean"}}')
    assert config.schedule() == [(1e-1, 12.0, 1024), (1e-2, 12.0, 2048), (1e-3, 12.0, 4096)]
    assert config.t_max == 12.0
    assert config.samples == 512
    assert config.format == "both"
    assert len(config.volume_grid()) == 32


def test_zero_epsilon_is_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config('{"command": "solve-reg", "metric": {"preset": "euclidean"}, "epsilon": [0]}')
    assert info.value.field == "epsilon"


def test_metric_needs_exactly_one_source():
    document = {
        "command": "flow",
        "metric": {"preset": "euclidean",
                   "tabulated": {"s": list(range(8)), "A": [1.0] * 8, "R": list(range(8))}},
    }
    with pytest.raises(ConfigError, match="exactly one of"):
        parse_config(json.dumps(document))


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config('{"command": "flow", "metric": {"preset": "euclidean"}, "bogus": 1}')
    assert info.value.field == "bogus"


def test_malformed_document():
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_flags_override_config_file(tmp_path, settings):
    document = tmp_path / "run.json"
    document.write_text(json.dumps({"command": "flow", "metric": {"preset": "euclidean"},
                                    "t_max": 3.0, "samples": 64}))
    config = parse_args(["flow", "--config", str(document), "--samples", "128",
                         "--out", str(tmp_path)], settings)
    assert config.t_max == 3.0
    assert config.samples == 128
    assert config.metric.preset == "euclidean"


def test_metric_flags(settings):
    config = parse_args(["bound", "--metric", "cored", "--m", "2", "--b", "0.5",
                         "--param", "s_max=1000"], settings)
    assert config.metric.params == {"m": 2.0, "b": 0.5, "s_max": 1000.0}


def test_sweep_grid_has_distinct_runs(settings):
    config = parse_args(["sweep", "--metric", "schwarzschild", "--m", "0.5,1,2",
                         "--eps", "1e-1,1e-2,1e-3"], settings)
    assert config.sweep == {"m": [0.5, 1.0, 2.0], "epsilon": [1e-1, 1e-2, 1e-3]}
    runs = expand_sweep(config)
    assert len(runs) == 9
    keys = {run_key(sub, settings.SWEEP_HASH_LENGTH) for _, sub in runs}
    assert len(keys) == 9
    for point, sub in runs:
        assert sub.command == "solve-reg"
        assert sub.epsilon == [point["epsilon"]]
        assert sub.metric.params["m"] == point["m"]


def test_lists_only_for_sweep(settings):
    with pytest.raises(ConfigError, match="only accepted by sweep"):
        parse_args(["flow", "--metric", "schwarzschild", "--m", "0.5,1"], settings)


def test_flow_command_end_to_end(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert run("flow", "--metric", "euclidean", "--s0", "0.01", "--t-max", "12",
                   "--samples", "512", "--out", str(out)) == 0
    lines = (first / "profile.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,s,B,m,v,H"
    assert len(lines) == 513
    assert json.loads((first / "jumps.json").read_text(encoding="utf-8")) == {"jumps": []}
    for name in ("profile.csv", "profile.json", "summary.json", "checks.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    summary = json.loads((first / "summary.json").read_text(encoding="utf-8"))
    assert summary["passed"] is True
    assert summary["states"] == {"geroch": "pass"}
    assert summary["metric"] == {"preset": "euclidean", "params": {"s_max": 100000.0}}
    assert "output" not in summary["config"]


def test_invalid_configuration_exits_with_usage_code(tmp_path):
    assert run("solve-reg", "--metric", "euclidean", "--eps", "0", "--out", str(tmp_path)) == 2
    assert not (tmp_path / "summary.json").exists()


def test_numerical_failure_writes_error(tmp_path):
    assert run("flow", "--metric", "neck", "--s0", "3", "--out", str(tmp_path)) == 1
    error = json.loads((tmp_path / "error.json").read_text(encoding="utf-8"))
    assert error["error"] == "FlowUndefinedError"


def test_report_aggregates_summaries(tmp_path):
    run_dir = tmp_path / "flat"
    assert run("flow", "--metric", "euclidean", "--s0", "0.01", "--samples", "512",
               "--out", str(run_dir)) == 0
    report_dir = tmp_path / "report"
    assert run("report", "--inputs", str(run_dir), "--out", str(report_dir)) == 0
    report = json.loads((report_dir / "report.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert [item["command"] for item in report["runs"]] == ["flow"]
    assert not (report_dir / "summary.json").exists()


def test_small_sweep_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        code = run("sweep", "--task", "flow", "--metric", "cored", "--m", "0.5,1", "--b", "1",
                   "--samples", "128", "--t-max", "8", "--out", str(out))
        assert code in (0, 1)
    manifest = json.loads((first / "sweep.json").read_text(encoding="utf-8"))
    assert manifest["task"] == "flow"
    assert len(manifest["runs"]) == 2
    assert sorted(item["params"]["m"] for item in manifest["runs"]) == [0.5, 1.0]
    assert (first / "sweep.json").read_bytes() == (second / "sweep.json").read_bytes()
    for item in manifest["runs"]:
        for name in ("summary.json", "profile.csv", "jumps.json"):
            assert (first / item["run"] / name).read_bytes() == \
                (second / item["run"] / name).read_bytes()


def test_bound_command_on_cored_metric(tmp_path):
    assert run("bound", "--metric", "cored-schwarzschild", "--m", "1", "--b", "1",
               "--v-count", "8", "--out", str(tmp_path)) == 0
    lines = (tmp_path / "bound.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "v,B,rhs,classical,slack,improvement,verdict"
    assert len(lines) == 9
    assert all(line.endswith(",pass") for line in lines[1:])


def test_summary_records_metric_and_unmet_hypothesis(tmp_path):
    assert run("flow", "--metric", "neck", "--samples", "256", "--out", str(tmp_path)) == 1
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["states"] == {"geroch": "hypothesis-not-met"}
    assert summary["verdicts"]["geroch"] is False
    assert summary["metric"]["preset"] == "neck"
    document = {"command": "flow", "metric": summary["metric"]}
    assert parse_config(json.dumps(document)).metric.params == summary["metric"]["params"]

    report_dir = tmp_path / "report"
    run("report", "--inputs", str(tmp_path), "--out", str(report_dir))
    report = json.loads((report_dir / "report.json").read_text(encoding="utf-8"))
    assert report["runs"][0]["states"] == {"geroch": "hypothesis-not-met"}
