import numpy as np
import pytest
from pydantic import ValidationError

from core.config import OramConfig
from core.errors import CouplingViolation, InvalidConfig
from core.oram_core import OramState
from core.supermarket_sim import (
    SupermarketCoupler,
    SupermarketConfig,
    SupermarketState,
    coupled_run,
    sm_run,
    sm_step,
    sm_tail_decay,
    sm_tail_experiment,
    stationary_occupancy_tv,
)
from core.tree_memory import Block, Bucket


def test_no_arrivals_no_upsets():
    result = sm_run(SupermarketConfig(D=8, arrival_prob=0.0, upset_threshold=1, horizon=5000))
    assert result.upset_count == 0
    assert result.max_length == 0


@pytest.mark.parametrize("rule, expected", [("at-least", 1), ("exceeds", 0)])
def test_single_cashier_always_arriving(rule, expected):
    config = SupermarketConfig(D=1, arrival_prob=1.0, upset_threshold=4, horizon=5, upset_rule=rule)
    result = sm_run(config)
    assert result.upset_count == expected
    assert result.final_histogram == [0, 0, 0, 0, 0, 1]

    state = SupermarketState.empty(config)
    rng = np.random.default_rng(0)
    for _ in range(5):
        sm_step(state, rng)
    assert state.upset_count == expected
    assert state.t == 5
    assert state.queue_lengths.tolist() == [5]


def test_zero_horizon():
    result = sm_run(SupermarketConfig(D=4, horizon=0))
    assert result.upset_count == 0
    assert result.upset_rate == 0.0
    assert result.occupancy == []
    assert result.final_histogram == [4]


def test_service_never_goes_negative():
    config = SupermarketConfig(D=2, arrival_prob=0.0, horizon=3)
    state = sm_step(SupermarketState.empty(config), np.random.default_rng(1))
    assert state.queue_lengths.tolist() == [0, 0]


def test_same_seed_same_result():
    config = SupermarketConfig(D=32, upset_threshold=2, horizon=20000, seed=5)
    assert sm_run(config) == sm_run(config)


def test_upsets_fall_with_threshold():
    config = SupermarketConfig(D=32, upset_threshold=2, horizon=50000)
    result = sm_run(config, thresholds=[1, 3, 4])
    counts = [result.upset_by_threshold[phi] for phi in (1, 2, 3, 4)]
    assert counts == sorted(counts, reverse=True)
    assert result.upset_count == result.upset_by_threshold[2]


def test_upset_rate_below_stationary_bound():
    config = SupermarketConfig(D=64, upset_threshold=3, horizon=200_000)
    result = sm_run(config)
    assert 0 < result.upset_rate <= config.expected_upset_rate()
    # a single arrival stream at rate alpha sees each length with the geometric law
    assert result.upset_rate == pytest.approx(config.arrival_prob * config.ratio ** 3, rel=0.15)


def test_occupancy_matches_geometric_law():
    config = SupermarketConfig(D=16, horizon=400_000)
    result = sm_run(config)
    assert sum(result.occupancy) == pytest.approx(1.0)
    assert stationary_occupancy_tv(result, config) < 0.05


def test_config_bounds():
    with pytest.raises(ValidationError):
        SupermarketConfig(arrival_prob=1.5)
    with pytest.raises(ValidationError):
        SupermarketConfig(upset_threshold=0)
    assert SupermarketConfig(arrival_prob=1.0).ratio == float("inf")
    assert SupermarketConfig(arrival_prob=1 / 3, upset_threshold=3).expected_upset_rate() == pytest.approx(0.125)


def _tail_config(**overrides):
    values = dict(D=16, upset_threshold=3, horizon=400, trials=200, seed=2)
    values.update(overrides)
    return SupermarketConfig(**values)


def test_tail_needs_enough_trials():
    with pytest.raises(InvalidConfig):
        sm_tail_experiment(_tail_config(trials=50), [1.0])


def test_tail_frequencies():
    rows = sm_tail_experiment(_tail_config(), [-1.0, 0.0, 1.0, 1000.0])
    frequencies = [row["frequency"] for row in rows]
    assert frequencies[0] == 1.0
    assert frequencies[-1] == 0.0
    assert frequencies == sorted(frequencies, reverse=True)
    for row in rows:
        assert row["ci_low"] <= row["frequency"] <= row["ci_high"]
        assert row["trials"] == 200


def test_tail_reports_both_rules():
    rows = sm_tail_experiment(_tail_config(), [0.0], both_rules=True)
    by_rule = {row["rule"]: row for row in rows}
    assert set(by_rule) == {"at-least", "exceeds"}
    assert by_rule["exceeds"]["mean_upsets"] <= by_rule["at-least"]["mean_upsets"]


def test_tail_decay_row():
    row = sm_tail_decay(_tail_config(horizon=200), 1000.0)
    assert row["frequency_T"] == row["frequency_2T"] == 0.0
    assert row["decays"]


def test_coupling_needs_a_deep_enough_tree():
    with pytest.raises(InvalidConfig):
        coupled_run(4096, 4, 10)


def test_coupling_with_no_ops():
    report = coupled_run(4096, 2, 0)
    assert report.steps == 0
    assert report.cashiers == 8


def test_greedy_carry_respects_dominance():
    report = coupled_run(4096, 2, 3000, seed=1)
    assert report.aborted is None
    assert report.steps > 0
    assert report.violations == 0
    assert report.strong_violations == 0
    assert report.max_bucket_load > 0


def test_strict_mode_passes_on_greedy_carry():
    report = coupled_run(4096, 3, 1000, seed=3, strict=True)
    assert report.violations == 0


def test_shallow_carry_breaks_dominance():
    config = OramConfig(n=4096, mutation="shallow-carry")
    report = coupled_run(4096, 2, 5000, config=config, seed=1)
    assert report.violations + report.strong_violations > 0


def test_strict_coupler_raises():
    state = OramState(OramConfig(n=4096))
    coupler = SupermarketCoupler(0, state.depth, 4, np.random.default_rng(0), strict=True)
    coupler.report = coupled_run(4096, 0, 0)
    state.tree._buckets[1] = Bucket(8, [Block(0, 0, [0] * 16)])
    with pytest.raises(CouplingViolation):
        coupler.on_flush(state, 0)
