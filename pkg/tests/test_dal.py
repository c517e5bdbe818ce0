import math

import numpy as np
import pytest

from imcflab.dal import run_dal
from imcflab.dal.artifact_dal import dumps, format_number, plain, read_csv, write_csv, write_json
from imcflab.models import JumpEvent


def test_format_number():
    assert format_number(0.1) == "0.10000000000000001"
    assert format_number(np.float64(2.5)) == "2.5"
    assert format_number(np.int64(7)) == "7"
    assert format_number(math.nan) == ""
    assert format_number(math.inf) == ""
    assert format_number(True) == "true"
    assert format_number("ball(s<=1)") == "ball(s<=1)"


def test_plain_unwraps_numpy_and_models():
    event = JumpEvent(t1=1.0, s_before=1.0, s_after=2.0, v_before=0.5, v_after=3.0,
                      area_before=4.0, area_after=4.0)
    document = plain({"a": np.arange(3), "b": np.float32(0.5), "c": math.nan, "d": (event,)})
    assert document["a"] == [0, 1, 2]
    assert document["b"] == 0.5
    assert document["c"] is None
    assert document["d"][0]["initial"] is False


def test_dumps_is_canonical():
    assert dumps({"b": 1, "a": [1.5, math.inf]}) == dumps({"a": [1.5, math.inf], "b": 1})
    assert dumps({"a": 1}).endswith("\n")


def test_csv_rows(tmp_path):
    path = write_csv(tmp_path / "t.csv", ("v", "label"), [(1.0, "x"), (math.nan, "y")])
    assert path.read_text(encoding="utf-8") == "v,label\n1,x\n,y\n"
    rows = read_csv(path, numeric=("v",))
    assert rows[0]["v"] == 1.0
    assert math.isnan(rows[1]["v"])
    assert rows[1]["label"] == "y"


def test_summary_lists_file_names(tmp_path):
    files = [write_json(tmp_path / "z.json", {}), write_json(tmp_path / "a.json", {})]
    path = run_dal.write_summary(tmp_path, "flow", {"command": "flow"},
                                 {"lipschitz": True, "geroch": False}, files)
    summary = run_dal.read_summary(path)
    assert summary["files"] == ["a.json", "z.json"]
    assert summary["passed"] is False
    assert summary["states"] == {}
    assert summary["metric"] is None
    assert run_dal.find_summaries([str(tmp_path)]) == [path]


def test_find_summaries_skips_missing_inputs(tmp_path):
    assert run_dal.find_summaries([str(tmp_path / "missing")]) == []


def test_profile_round_trip(tmp_path, flow_service, neck):
    profile = flow_service.exact_flow(neck, 1e-3, 20.0, 128)
    run_dal.write_profile(tmp_path, profile, "csv")
    assert not (tmp_path / "profile.json").exists()
    loaded = run_dal.read_profile(tmp_path)
    assert len(loaded["rows"]) == 128
    assert loaded["rows"][-1]["t"] == pytest.approx(20.0)
    assert loaded["jumps"] == profile.jumps
