import csv
import io
import json

from click.testing import CliRunner

from ctlab.cli import DIM_BUDGET, main


def _run(args, env=None):
    return CliRunner().invoke(main, args, env=env)


def test_version_flag():
    res = _run(["--version"])
    assert res.exit_code == 0
    assert "ctlab" in res.output
    assert "0.1.0" in res.output


def test_seed_is_required():
    res = _run(["verify"])
    assert res.exit_code == 2


def test_bad_format_choice():
    res = _run(["verify", "--seed", "0", "--format", "yaml"])
    assert res.exit_code == 2


def test_verify_report_shape():
    res = _run(["verify", "--seed", "0"])
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert report["command"] == "verify"
    assert report["version"] == "0.1.0"
    assert report["config"] == {"seed": 0}
    assert report["all_passed"] is True
    assert len(report["checks"]) == 9
    for check in report["checks"]:
        assert set(check) == {"name", "passed", "value", "detail"}
        assert check["passed"] is True


def test_verify_deterministic():
    first = _run(["verify", "--seed", "7"])
    second = _run(["verify", "--seed", "7"])
    assert first.output == second.output


def test_verify_csv_output():
    res = _run(["verify", "--seed", "0", "--format", "csv"])
    assert res.exit_code == 0
    rows = [row for row in csv.reader(io.StringIO(res.output)) if row]
    assert rows[0] == ["name", "passed", "value", "detail"]
    assert len(rows) == 10
    assert all(len(row) == 4 for row in rows)


def test_out_file(tmp_path):
    path = tmp_path / "report.json"
    res = _run(["verify", "--seed", "0", "--out", str(path)])
    assert res.exit_code == 0
    report = json.loads(path.read_text())
    assert report["all_passed"] is True


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def test_moments_small_run():
    res = _run(["moments", "--seed", "1", "--d", "2", "--samples", "4000"])
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert report["config"] == {"seed": 1, "d": 2, "samples": 4000}
    names = [c["name"] for c in report["checks"]]
    assert "identity quadruple equals d" in names


def test_moments_budget_refusal():
    res = _run(["moments", "--seed", "0", "--d", "99"])
    assert res.exit_code == 3
    assert "declined" in res.stderr
    assert str(DIM_BUDGET) in res.stderr


def test_moments_usage_errors():
    assert _run(["moments", "--seed", "0", "--d", "0"]).exit_code == 2
    assert _run(["moments", "--seed", "0", "--samples", "1"]).exit_code == 2


def test_moments_csv_quotes_details():
    # quadruple details contain commas, so the csv must quote them
    res = _run(["moments", "--seed", "1", "--d", "2", "--samples", "2000", "--format", "csv"])
    assert res.exit_code == 0
    rows = [row for row in csv.reader(io.StringIO(res.output)) if row]
    assert all(len(row) == 4 for row in rows)
    assert any("," in row[3] for row in rows[1:])


def test_moments_thread_pool_is_bit_identical():
    serial = _run(["moments", "--seed", "3", "--d", "2", "--samples", "2000"], env={"CTL_THREADS": "1"})
    threaded = _run(["moments", "--seed", "3", "--d", "2", "--samples", "2000"], env={"CTL_THREADS": "4"})
    assert serial.exit_code == 0
    assert serial.output == threaded.output


def test_bogus_thread_env_falls_back():
    res = _run(["verify", "--seed", "0"], env={"CTL_THREADS": "many"})
    assert res.exit_code == 0


# ---------------------------------------------------------------------------
# localtest
# ---------------------------------------------------------------------------


def test_localtest_single_query():
    args = [
        "localtest", "--seed", "2", "--n", "1", "--d1", "2", "--d2", "2", "--r", "2",
        "--samples", "1000", "--testers", "2", "--channels", "2",
    ]
    res = _run(args)
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert len(report["checks"]) == 4
    assert report["checks"][0]["name"] == "tester 0 channel 0"


def test_localtest_usage_errors():
    assert _run(["localtest", "--seed", "0", "--n", "3"]).exit_code == 2
    assert _run(["localtest", "--seed", "0", "--d1", "0"]).exit_code == 2
    # r * d2 < d1 leaves no dilation for any channel
    assert _run(["localtest", "--seed", "0", "--d1", "4", "--d2", "1", "--r", "2"]).exit_code == 2


def test_localtest_budget_refusal():
    res = _run(["localtest", "--seed", "0", "--n", "2", "--d1", "8", "--d2", "8", "--r", "8"])
    assert res.exit_code == 3


# ---------------------------------------------------------------------------
# packing-net
# ---------------------------------------------------------------------------


def test_packing_net_report():
    args = [
        "packing-net", "--seed", "4", "--regime", "type1", "--d1", "4", "--d2", "2",
        "--r", "2", "--eps", "0.05", "--count", "4",
    ]
    res = _run(args)
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert report["all_passed"] is True
    net = report["net"]
    assert net["regime"] == "type1"
    assert net["eps"] == 0.05
    assert len(net["channels"]) == 4
    assert net["min_pairwise"] > 0.0


def test_packing_net_rejects_invalid_dims():
    # type1 requires 3 r d2 <= 4 d1
    res = _run(["packing-net", "--seed", "0", "--regime", "type1", "--d1", "2", "--d2", "4", "--r", "2"])
    assert res.exit_code == 2


def test_packing_net_rejects_bad_count():
    res = _run(["packing-net", "--seed", "0", "--count", "1"])
    assert res.exit_code == 2


def test_packing_net_unknown_regime():
    res = _run(["packing-net", "--seed", "0", "--regime", "type9"])
    assert res.exit_code == 2


# ---------------------------------------------------------------------------
# tomography
# ---------------------------------------------------------------------------


def test_tomography_isometry_route():
    res = _run(["tomography", "--seed", "5", "--d1", "2", "--d2", "2", "--eps", "0.5", "--trials", "3"])
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    names = [c["name"] for c in report["checks"]]
    assert "query accounting matches the formula" in names
    assert report["all_passed"] is True


def test_tomography_channel_route():
    res = _run(
        ["tomography", "--seed", "6", "--d1", "2", "--d2", "2", "--eps", "0.6", "--trials", "2", "--r", "2"]
    )
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert report["config"]["r"] == 2
    assert report["all_passed"] is True


def test_tomography_usage_errors():
    assert _run(["tomography", "--seed", "0", "--eps", "0"]).exit_code == 2
    assert _run(["tomography", "--seed", "0", "--eps", "1.5"]).exit_code == 2
    assert _run(["tomography", "--seed", "0", "--trials", "0"]).exit_code == 2
    assert _run(["tomography", "--seed", "0", "--r", "-1"]).exit_code == 2
    assert _run(["tomography", "--seed", "0", "--d1", "3", "--d2", "2"]).exit_code == 2
    assert _run(["tomography", "--seed", "0", "--d1", "4", "--d2", "1", "--r", "2"]).exit_code == 2


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def test_distances_report():
    res = _run(["distances", "--seed", "8", "--d1", "2", "--d2", "2", "--pairs", "3"])
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    names = [c["name"] for c in report["checks"]]
    assert "choi below diamond sandwich" in names
    assert "see-saw matches analytic unitary distance" in names
    assert report["all_passed"] is True


def test_distances_usage_error():
    assert _run(["distances", "--seed", "0", "--pairs", "0"]).exit_code == 2


def test_failing_check_exits_one(monkeypatch):
    # force a wrong closed-form value so the identity check fails
    monkeypatch.setattr("ctlab.cli.fourth_moment_trace", lambda *ops: 999.0)
    res = _run(["moments", "--seed", "0", "--d", "2", "--samples", "2000"])
    assert res.exit_code == 1
    report = json.loads(res.output)
    assert report["all_passed"] is False
