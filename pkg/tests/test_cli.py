import csv
import io
import json
import subprocess
import sys
from decimal import Decimal

import pytest

from trustcal.cli import main


@pytest.fixture(scope="module")
def complementary(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    csv_path = d / "comp.csv"
    assert main(["synth", "--kind", "complementary", "--n", "600", "--seed", "3",
                 "--output", str(csv_path)]) == 0
    return csv_path, d / "comp.toml"


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def data_flags(paths):
    return ["--data", paths[0], "--manifest", paths[1]]


def test_synth_writes_csv_and_manifest(complementary):
    csv_path, manifest = complementary
    assert csv_path.read_text().count("\n") == 601
    assert 'kind = "unit"' in manifest.read_text()


def test_run_single_algorithm_table(capsys, complementary):
    code, out, _ = run_cli(capsys, "run", *data_flags(complementary), "--algo", "linucb", "--runs", "3")
    assert code == 0
    assert "CB LinUCB" in out and "CB ANN" not in out
    assert "runs=3" in out and "prng=splitmix64-v1" in out


def test_compare_has_one_row_per_algorithm(capsys, complementary):
    code, out, _ = run_cli(capsys, "compare", *data_flags(complementary), "--runs", "2", "--out", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["section"] for r in rows].count("baseline") == 3
    assert [r["label"] for r in rows if r["section"] == "indicator"] == ["CB LinUCB", "CB DT", "CB ANN"]
    for r in rows:
        assert Decimal(r["T"]) == abs(Decimal(r["G"]) - Decimal(r["g"]))


def test_json_lines_output_file(capsys, complementary, tmp_path):
    out_path = tmp_path / "report.jsonl"
    code, out, _ = run_cli(capsys, "run", *data_flags(complementary), "--algo", "tree", "--runs", "2",
                           "--out", "json-lines", "--output", out_path)
    assert code == 0 and out == ""
    lines = [json.loads(line) for line in out_path.read_text().splitlines()]
    assert lines[0]["header"]["retrain_period"] == 50
    assert all(Decimal(r["T"]) == abs(Decimal(r["G"]) - Decimal(r["g"])) for r in lines[1:])


def test_reports_are_byte_identical(capsys, complementary):
    args = ["run", *data_flags(complementary), "--algo", "ann", "--runs", "1", "--seed", "7"]
    _, first, _ = run_cli(capsys, *args)
    _, second, _ = run_cli(capsys, *args)
    assert first == second
    _, other, _ = run_cli(capsys, *args[:-1], "8")
    assert other != first


def test_seed_from_environment(capsys, complementary, monkeypatch):
    args = ["run", *data_flags(complementary), "--algo", "tree", "--runs", "2"]
    _, explicit, _ = run_cli(capsys, *args, "--seed", "41")
    monkeypatch.setenv("TRUSTCAL_SEED", "41")
    _, from_env, _ = run_cli(capsys, *args)
    assert from_env == explicit


def test_config_document(capsys, complementary, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("runs = 2\nseed = 5\n[hyper]\nalpha = 0.5\n")
    _, via_config, _ = run_cli(capsys, "run", *data_flags(complementary), "--algo", "linucb", "--config", cfg)
    _, via_flags, _ = run_cli(capsys, "run", *data_flags(complementary), "--algo", "linucb",
                              "--runs", "2", "--seed", "5", "--alpha", "0.5")
    assert "alpha=0.5" in via_config and via_config == via_flags


def test_unknown_config_key_is_flag_error(complementary, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("[hyper]\ngamma = 1\n")
    with pytest.raises(SystemExit) as exc:
        main(["run", *map(str, data_flags(complementary)), "--algo", "linucb", "--config", str(cfg)])
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [
    ["run", "--algo", "forest"],
    ["run", "--algo", "linucb", "--runs", "0"],
    ["run", "--algo", "linucb", "--alpha", "-1"],
    ["compare", "--runs", "two"],
    ["compare", "--out", "xml"],
])
def test_bad_flags_exit_2(complementary, argv):
    with pytest.raises(SystemExit) as exc:
        main([*argv, *map(str, data_flags(complementary))])
    assert exc.value.code == 2


def test_missing_data_file_exits_1(capsys, complementary, tmp_path):
    code, _, err = run_cli(capsys, "baselines", "--data", tmp_path / "nope.csv", "--manifest", complementary[1])
    assert code == 1 and "trustcal: error:" in err


def test_bad_row_exits_1_and_names_row(capsys, complementary, tmp_path):
    lines = complementary[0].read_text().splitlines()
    cells = lines[2].split(",")
    cells[-1] = "7"
    lines[2] = ",".join(cells)
    broken = tmp_path / "broken.csv"
    broken.write_text("\n".join(lines) + "\n")
    code, _, err = run_cli(capsys, "baselines", "--data", broken, "--manifest", complementary[1])
    assert code == 1 and "row 2" in err


def test_baselines_command(capsys, complementary):
    code, out, _ = run_cli(capsys, "baselines", *data_flags(complementary), "--out", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["label"] for r in rows] == ["agent A", "agent B", "o"]
    assert rows[0]["g"] == rows[2]["g"]


def test_figures_flag(capsys, complementary, tmp_path):
    figs = tmp_path / "figs"
    code, _, err = run_cli(capsys, "run", *data_flags(complementary), "--algo", "linucb", "--runs", "2",
                           "--figures", figs)
    assert code == 0
    pngs = sorted(figs.glob("*.png"))
    assert pngs and all(str(p) in err for p in pngs)


def test_ann_beats_team_on_complementary(capsys, tmp_path):
    data = tmp_path / "c.csv"
    main(["synth", "--kind", "complementary", "--n", "2000", "--seed", "11", "--output", str(data)])
    code, out, _ = run_cli(capsys, "run", "--data", data, "--manifest", tmp_path / "c.toml",
                           "--algo", "ann", "--hidden", "15", "--runs", "10", "--out", "csv")
    rows = {r["label"]: r for r in csv.DictReader(io.StringIO(out))}
    assert code == 0
    assert float(rows["CB ANN"]["g"]) > float(rows["o"]["g"])
    assert float(rows["CB ANN"]["p"]) < 0.01


def test_module_entry_point(complementary):
    proc = subprocess.run([sys.executable, "-m", "trustcal", "baselines", *map(str, data_flags(complementary))],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "Maximum [G]" in proc.stdout
