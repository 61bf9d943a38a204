import pytest

import core.experiments as experiments
from core.errors import InvalidConfig
from core.experiments import (
    DETECTABLE_MUTATIONS,
    EXIT_ABORT,
    EXIT_OK,
    EXPERIMENT_KINDS,
    ExperimentConfig,
    majority,
    run_experiment,
    run_workload,
    sweep_sizes,
)
from core.records import read_records


def test_small_workload_run(tmp_path):
    cfg = ExperimentConfig(n=4096, ops=300, seed=1)
    outcome = run_workload(cfg, tmp_path)
    assert outcome.exit_code == EXIT_OK
    assert outcome.mismatches == 0
    assert outcome.completed_ops == 300
    assert outcome.abort is None
    reports = {report["name"]: report for report in outcome.reports}
    assert set(reports) == {"leaf-uniformity", "consecutive-leaves", "paths-per-op", "action-sequence"}
    # 300 ops give far fewer actions than the action test needs
    assert reports["action-sequence"]["skipped"]
    assert reports["action-sequence"]["passed"] is None
    assert not reports["leaf-uniformity"]["skipped"]
    assert set(outcome.outputs) == {"reads", "counters", "reports", "trace"}
    assert (tmp_path / "trace.txt").read_text().startswith("# depth=4")
    header, rows = read_records(tmp_path / "counters.csv")
    assert header["kind"] == "counters"
    assert rows[0]["ops"] == "300"


def test_scripted_run_reads_back_its_write(tmp_path):
    script = tmp_path / "ops.txt"
    script.write_text("write 5 9\nread 5\nread 6\n")
    cfg = ExperimentConfig(n=4096, workload="scripted-file", script=str(script), output_format="jsonl",
                           trace_format="binary")
    outcome = run_workload(cfg, tmp_path / "out")
    assert outcome.exit_code == EXIT_OK
    _, reads = read_records(tmp_path / "out" / "reads.jsonl")
    assert reads == [{"op_serial": 2, "address": 5, "value": 9}, {"op_serial": 3, "address": 6, "value": 0}]
    assert (tmp_path / "out" / "trace.bin").exists()


def test_run_with_tiny_queue_aborts():
    outcome = run_workload(ExperimentConfig(n=4096, ops=10, q_max=1))
    assert outcome.exit_code == EXIT_ABORT
    assert outcome.abort == {"kind": "AbortQueue", "op_serial": 1}
    assert outcome.completed_ops == 0
    assert outcome.reports == []


def test_stationary_experiment():
    result = run_experiment("stationary", ExperimentConfig(K=30, steps=2_000_000, phi=3))
    assert result.passed
    assert result.rows[0]["detailed_balance_residual"] < 1e-10


def test_spectral_experiment():
    result = run_experiment("spectral", ExperimentConfig(K=30))
    assert result.passed
    assert result.exit_code == EXIT_OK
    assert all(row["monotone_in_alpha"] for row in result.rows)


def test_supermarket_experiment():
    result = run_experiment("supermarket", ExperimentConfig(D=16, phi=3, horizon=10_000))
    assert result.passed
    row = result.rows[0]
    assert row["upsets_by_phi"] == sorted(row["upsets_by_phi"], reverse=True)
    assert not row["tv_checked"]


def test_result_files_are_byte_identical(tmp_path):
    cfg = ExperimentConfig(K=12, steps=20_000, output_format="jsonl")
    first = run_experiment("stationary", cfg, tmp_path / "a")
    second = run_experiment("stationary", cfg, tmp_path / "b")
    assert first.output.endswith("stationary.jsonl")
    with open(first.output, "rb") as a, open(second.output, "rb") as b:
        assert a.read() == b.read()


def test_unknown_kind():
    with pytest.raises(InvalidConfig):
        run_experiment("no-such-kind", ExperimentConfig())


def test_every_kind_is_listed():
    assert set(EXPERIMENT_KINDS) == {
        "uniformity", "actions", "compare", "mutants", "supermarket", "sm-tail", "coupling",
        "stationary", "spectral", "reset-tail", "overhead-sweep", "bounds",
    }


@pytest.mark.parametrize("flags, expected", [
    ([True, True, False], True),
    ([True, False, False], False),
    ([True], True),
    ([], False),
])
def test_majority(flags, expected):
    assert majority(flags) is expected


def test_sweep_sizes():
    assert sweep_sizes(4096, 65536) == [4096, 16384, 65536]
    assert sweep_sizes(4096, 4095) == []


@pytest.mark.slow
def test_mutants_are_detected():
    result = run_experiment("mutants", ExperimentConfig(n=4096, ops=3000))
    assert result.passed


@pytest.mark.slow
def test_coupling_acceptance():
    result = run_experiment("coupling", ExperimentConfig(n=4096, level=3, ops=20_000))
    assert result.passed
    greedy = result.rows[0]
    assert greedy["variant"] == "greedy-carry"
    assert greedy["violations"] == 0 and greedy["strong_violations"] == 0


@pytest.mark.slow
def test_reset_tail_acceptance():
    cfg = ExperimentConfig(K=30, phi=3, horizon=2000, resets=[0, 10, 100], deltas=[0.5, 1.0], trials=400)
    result = run_experiment("reset-tail", cfg)
    assert all(row["frequency"] <= 1.0 for row in result.rows)
    assert {row["resets"] for row in result.rows} == {0, 10, 100}


def _fake_mutant_seed(flagged):
    def fake(args):
        _, mutation, seed = args
        return {"mutation": mutation, "seed": seed, "detected": mutation in flagged, "failed_checks": []}
    return fake


def test_mutants_verdict_needs_a_clean_control(monkeypatch):
    cfg = ExperimentConfig(n=4096, ops=10)
    monkeypatch.setattr(experiments, "_mutant_seed", _fake_mutant_seed(set(DETECTABLE_MUTATIONS)))
    assert run_experiment("mutants", cfg).passed
    monkeypatch.setattr(experiments, "_mutant_seed", _fake_mutant_seed({"none", *DETECTABLE_MUTATIONS}))
    assert not run_experiment("mutants", cfg).passed
    monkeypatch.setattr(experiments, "_mutant_seed", _fake_mutant_seed({"reuse-position"}))
    assert not run_experiment("mutants", cfg).passed


def test_uniformity_experiment():
    result = run_experiment("uniformity", ExperimentConfig(n=4096, ops=2000))
    assert result.passed
    assert [row["seed"] for row in result.rows] == [0, 1, 2]
    assert all(row["aborted"] is None and "pairs_p_value" in row for row in result.rows)


def test_compare_experiment():
    result = run_experiment("compare", ExperimentConfig(n=4096, ops=2000, compare_trials=2, seed=3))
    assert result.passed
    row = result.rows[0]
    assert (row["workload_a"], row["workload_b"]) == ("sequential", "hot-spot")
    assert row["details"]["aborts_a"] == 0


def test_actions_experiment_at_full_sample_size():
    result = run_experiment("actions", ExperimentConfig(n=4096, ops=20_000))
    assert result.passed
    for row in result.rows:
        assert row["actions"] >= 100_000
        assert row["put_back_frequency"] == pytest.approx(1 / 3, abs=0.01)


def test_sm_tail_experiment():
    cfg = ExperimentConfig(D=16, phi=3, horizon=400, trials=200, deltas=[1.0, 1000.0], seed=2)
    result = run_experiment("sm-tail", cfg)
    assert result.passed
    tail = [row for row in result.rows if "frequency" in row]
    decay = [row for row in result.rows if "decays" in row]
    assert [row["delta"] for row in tail] == [1.0, 1000.0]
    assert tail[1]["frequency"] == 0.0
    assert [row["delta"] for row in decay] == [1.0, 1000.0]


@pytest.mark.slow
def test_bounds_acceptance():
    result = run_experiment("bounds", ExperimentConfig(n_values=[1024, 4096], ops=50_000, seeds=[0, 1]))
    assert result.passed
    assert len(result.rows) == 4
    assert all(row["queue_ratio"] < 1 and row["leaf_ratio"] < 1 for row in result.rows)


@pytest.mark.slow
def test_overhead_sweep_acceptance():
    result = run_experiment("overhead-sweep", ExperimentConfig(n=65536, ops=3000))
    assert result.passed
    assert [row["n"] for row in result.rows] == [4096, 16384, 65536]
    assert all(row["within_bound"] and row["monotone"] for row in result.rows[1:])
