import json

import pytest

from cli import build_config, build_parser, main
from core.experiments import EXIT_ABORT, EXIT_OK, EXIT_USAGE


def test_run_writes_results(tmp_path, capsys):
    code = main(["run", "--n", "4096", "--ops", "200", "--seed", "3", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["mismatches"] == 0
    assert (tmp_path / "run-3" / "reads.csv").exists()


def test_run_abort_exit_code(tmp_path):
    assert main(["run", "--n", "4096", "--ops", "20", "--q-max", "1", "--output-dir", str(tmp_path)]) == EXIT_ABORT


def test_unknown_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["run", "--no-such-flag", "1"])
    assert info.value.code == EXIT_USAGE


def test_unknown_experiment_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["experiment", "no-such-kind"])
    assert info.value.code == EXIT_USAGE


def test_invalid_parameters_exit_with_usage(tmp_path):
    assert main(["run", "--n", "4096", "--ell", "7", "--ops", "5", "--output-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["experiment", "spectral", "--alpha", "0.7"]) == EXIT_USAGE


def test_config_file_supplies_defaults(tmp_path):
    config = tmp_path / "lab.env"
    config.write_text("n=4096\nops=20\nq-max=1\n")
    out = str(tmp_path / "out")
    assert main(["run", "--config", str(config), "--output-dir", out]) == EXIT_ABORT
    assert main(["run", "--config", str(config), "--q-max", "500", "--output-dir", out]) == EXIT_OK


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.env")]) == EXIT_USAGE


def test_range_and_list_flags():
    args = build_parser().parse_args(
        ["experiment", "bounds", "--n", "1024..16384", "--seeds", "4,5", "--both-rules", "--format", "jsonl"]
    )
    cfg = build_config(args)
    assert cfg.n == 1024
    assert cfg.n_values == [1024, 4096, 16384]
    assert cfg.seeds == [4, 5]
    assert cfg.both_rules
    assert cfg.output_format == "jsonl"


def test_experiment_writes_output(tmp_path, capsys):
    code = main(["experiment", "spectral", "--K", "10", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["passed"]
    assert (tmp_path / "spectral.csv").exists()
