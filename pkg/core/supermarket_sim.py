# core/supermarket_sim.py
"""
Discrete-time supermarket process with one choice per customer.

Each step is an arrival (probability alpha) at a uniformly random cashier or a
service at a uniformly random cashier. A customer is upset when the queue it
joins already holds at least phi customers ("at-least", the default) or more
than phi ("exceeds").
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from core.config import OramConfig
from core.errors import CouplingViolation, InvalidConfig, OramAbort
from core.oram_core import OramState
from core.seeding import derive_rng
from core.tree_memory import Block
from core.workloads import generate_workload

logger = logging.getLogger(__name__)

UpsetRule = Literal["at-least", "exceeds"]
CHUNK = 1 << 16


class SupermarketConfig(BaseModel):
    D: int = Field(1024, ge=1, description="Number of cashiers.")
    arrival_prob: float = Field(1.0 / 3.0, ge=0.0, le=1.0)
    upset_threshold: int = Field(10, ge=1)
    horizon: int = Field(10_000, ge=0)
    trials: int = Field(200, ge=1)
    seed: int = 0
    upset_rule: UpsetRule = "at-least"

    @property
    def ratio(self) -> float:
        if self.arrival_prob >= 1.0:
            return float("inf")
        return self.arrival_prob / (1.0 - self.arrival_prob)

    def expected_upset_rate(self) -> float:
        """Stationary upper bound (alpha / (1 - alpha))^phi on upset customers per step."""
        return self.ratio ** self.upset_threshold


@dataclass
class SupermarketState:
    config: SupermarketConfig
    queue_lengths: np.ndarray
    upset_count: int = 0
    t: int = 0

    @classmethod
    def empty(cls, config: SupermarketConfig) -> "SupermarketState":
        return cls(config, np.zeros(config.D, dtype=np.int64))


@dataclass
class SupermarketResult:
    upset_count: int
    horizon: int
    max_length: int
    final_histogram: List[int]
    occupancy: List[float]
    upset_by_threshold: Dict[int, int] = field(default_factory=dict)

    @property
    def upset_rate(self) -> float:
        return self.upset_count / self.horizon if self.horizon else 0.0


def _is_upset(length: int, phi: int, rule: UpsetRule) -> bool:
    return length >= phi if rule == "at-least" else length > phi


def sm_step(state: SupermarketState, rng: np.random.Generator) -> SupermarketState:
    config = state.config
    arrival = rng.random() < config.arrival_prob
    cashier = int(rng.integers(config.D))
    length = int(state.queue_lengths[cashier])
    if arrival:
        if _is_upset(length, config.upset_threshold, config.upset_rule):
            state.upset_count += 1
        state.queue_lengths[cashier] = length + 1
    elif length > 0:
        state.queue_lengths[cashier] = length - 1
    state.t += 1
    return state


def sm_run(
    config: SupermarketConfig,
    rng: Optional[np.random.Generator] = None,
    thresholds: Sequence[int] = (),
    snapshot_every: Optional[int] = None,
) -> SupermarketResult:
    """
    T steps from empty queues. `thresholds` adds upset counts for other phi values
    on the same randomness; occupancy is the time-averaged fraction of cashiers at
    each length, sampled every `snapshot_every` steps (default D) after T/10 steps.
    """
    rng = rng if rng is not None else derive_rng(config.seed, "supermarket")
    lengths = [0] * config.D
    phis = sorted(set(thresholds) | {config.upset_threshold})
    strict = config.upset_rule == "exceeds"
    upsets = {phi: 0 for phi in phis}
    max_length = 0
    snapshot_every = snapshot_every or config.D
    burn_in = config.horizon // 10
    occupancy = np.zeros(1)
    snapshots = 0
    done = 0
    while done < config.horizon:
        size = min(CHUNK, config.horizon - done)
        arrivals = (rng.random(size) < config.arrival_prob).tolist()
        cashiers = rng.integers(config.D, size=size).tolist()
        for step, (arrival, cashier) in enumerate(zip(arrivals, cashiers), start=done + 1):
            length = lengths[cashier]
            if arrival:
                for phi in phis:
                    if length > phi or (length == phi and not strict):
                        upsets[phi] += 1
                length += 1
                lengths[cashier] = length
                if length > max_length:
                    max_length = length
            elif length:
                lengths[cashier] = length - 1
            if step > burn_in and step % snapshot_every == 0:
                counts = np.bincount(lengths)
                if len(counts) > len(occupancy):
                    occupancy = np.pad(occupancy, (0, len(counts) - len(occupancy)))
                occupancy[:len(counts)] += counts
                snapshots += 1
        done += size
    if snapshots:
        occupancy = occupancy / (snapshots * config.D)
    return SupermarketResult(
        upset_count=upsets[config.upset_threshold],
        horizon=config.horizon,
        max_length=max_length,
        final_histogram=np.bincount(lengths).tolist(),
        occupancy=occupancy.tolist() if snapshots else [],
        upset_by_threshold=upsets,
    )


def stationary_occupancy_tv(result: SupermarketResult, config: SupermarketConfig) -> float:
    """Total variation between observed per-cashier occupancy and pi(i) proportional to (alpha/(1-alpha))^i."""
    if not result.occupancy:
        return float("nan")
    observed = np.asarray(result.occupancy)
    size = max(len(observed), 64)
    beta = config.ratio
    pi = (1 - beta) * beta ** np.arange(size)
    padded = np.zeros(size)
    padded[:len(observed)] = observed
    return 0.5 * float(np.abs(padded - pi).sum() + max(0.0, 1.0 - pi.sum()))


def _upsets_batch(config: SupermarketConfig, horizon: int, rng: np.random.Generator, rules: Sequence[UpsetRule]):
    """Vectorised over trials; returns {rule: F per trial}."""
    trials, D, phi = config.trials, config.D, config.upset_threshold
    lengths = np.zeros((trials, D), dtype=np.int64)
    rows = np.arange(trials)
    upsets = {rule: np.zeros(trials, dtype=np.int64) for rule in rules}
    done = 0
    while done < horizon:
        size = min(1024, horizon - done)
        arrivals = rng.random((size, trials)) < config.arrival_prob
        cashiers = rng.integers(D, size=(size, trials))
        for arrival, cashier in zip(arrivals, cashiers):
            current = lengths[rows, cashier]
            for rule in rules:
                hit = current >= phi if rule == "at-least" else current > phi
                upsets[rule] += arrival & hit
            lengths[rows, cashier] = np.where(arrival, current + 1, np.maximum(current - 1, 0))
        done += size
    return upsets


def _wilson(k: int, n: int) -> tuple:
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def sm_tail_experiment(
    config: SupermarketConfig,
    deltas: Sequence[float],
    both_rules: bool = False,
    horizon: Optional[int] = None,
) -> List[dict]:
    """Empirical Pr[F >= (1 + delta) (alpha/(1-alpha))^phi T] with Wilson intervals, shared randomness across deltas."""
    if config.trials < 200:
        raise InvalidConfig(f"tail experiment needs at least 200 trials, got {config.trials}")
    horizon = config.horizon if horizon is None else horizon
    rules: List[UpsetRule] = ["at-least", "exceeds"] if both_rules else [config.upset_rule]
    rng = derive_rng(config.seed, "supermarket", "tail", horizon)
    upsets = _upsets_batch(config, horizon, rng, rules)
    mean_bound = config.expected_upset_rate() * horizon
    rows = []
    for rule in rules:
        for delta in deltas:
            threshold = (1 + delta) * mean_bound
            exceed = int((upsets[rule] >= threshold).sum())
            low, high = _wilson(exceed, config.trials)
            rows.append({
                "rule": rule, "horizon": horizon, "delta": float(delta), "threshold": threshold,
                "exceed": exceed, "trials": config.trials, "frequency": exceed / config.trials,
                "ci_low": low, "ci_high": high, "mean_upsets": float(upsets[rule].mean()),
            })
    return rows


def sm_tail_decay(config: SupermarketConfig, delta: float) -> dict:
    """Exceedance at T and 2T; decay holds when the 2T frequency is below the T frequency (0/0 counts as decay)."""
    at_t = sm_tail_experiment(config, [delta])[0]
    at_2t = sm_tail_experiment(config, [delta], horizon=2 * config.horizon)[0]
    p1, p2 = at_t["frequency"], at_2t["frequency"]
    ratio = p2 / p1 if p1 > 0 else (0.0 if p2 == 0 else float("inf"))
    scale = config.expected_upset_rate() * config.horizon
    fitted_rate = None
    if 0 < p2 < p1:
        fitted_rate = float(np.log(p1 / p2) / scale)
    return {
        "delta": delta, "frequency_T": p1, "frequency_2T": p2, "ratio": ratio,
        "fitted_rate": fitted_rate, "decays": ratio < 1 or (p1 == 0 and p2 == 0),
    }


# --- coupling with an ORAM level ---

@dataclass
class CouplingReport:
    level: int
    cashiers: int
    ops: int
    steps: int = 0
    violations: int = 0
    strong_violations: int = 0
    max_bucket_load: int = 0
    max_customers: int = 0
    upsets: int = 0
    overflows_at_level: int = 0
    aborted: Optional[str] = None

    @property
    def upset_rate(self) -> float:
        return self.upsets / self.steps if self.steps else 0.0

    @property
    def overflow_rate(self) -> float:
        return self.overflows_at_level / self.steps if self.steps else 0.0

    def as_row(self) -> dict:
        return {
            "level": self.level, "cashiers": self.cashiers, "ops": self.ops, "steps": self.steps,
            "violations": self.violations, "strong_violations": self.strong_violations,
            "max_bucket_load": self.max_bucket_load, "max_customers": self.max_customers,
            "upset_rate": self.upset_rate, "overflow_rate": self.overflow_rate, "aborted": self.aborted,
        }


class SupermarketCoupler:
    """
    Drives a supermarket with D = 2^(k+1) cashiers from an ORAM's Put-Back/Flush
    stream and checks, after every action, that the blocks at or above level k
    destined under cashier g never outnumber its customers.
    """

    def __init__(self, level: int, depth: int, phi: int, rng: np.random.Generator, strict: bool = False):
        self.level = level
        self.depth = depth
        self.shift = depth - (level + 1)
        self.D = 1 << (level + 1)
        self.phi = phi
        self.rng = rng
        self.strict = strict
        self.customers = np.zeros(self.D, dtype=np.int64)
        self.report: Optional[CouplingReport] = None

    def on_put_back(self, state: OramState, block: Optional[Block]) -> None:
        cashier = block.position >> self.shift if block is not None else int(self.rng.integers(self.D))
        if self.customers[cashier] >= self.phi:
            self.report.upsets += 1
        self.customers[cashier] += 1
        self._check(state)

    def on_flush(self, state: OramState, leaf: int) -> None:
        cashier = leaf >> self.shift
        if self.customers[cashier] > 0:
            self.customers[cashier] -= 1
        self._check(state)

    def _check(self, state: OramState) -> None:
        report = self.report
        report.steps += 1
        loads = np.zeros(self.D, dtype=np.int64)
        for length in range(self.level + 1):
            for v in state.tree.level_nodes(length):
                for block in state.tree.peek(v).blocks:
                    loads[block.position >> self.shift] += 1
        if (loads > self.customers).any():
            report.strong_violations += 1
        paired = self.customers[0::2] + self.customers[1::2]
        for j, v in enumerate(state.tree.level_nodes(self.level)):
            load = len(state.tree.peek(v))
            report.max_bucket_load = max(report.max_bucket_load, load)
            if load > paired[j]:
                report.violations += 1
                if self.strict:
                    raise CouplingViolation(
                        f"bucket {v or 'root'} holds {load} blocks but its cashiers hold {int(paired[j])} customers"
                    )
        report.max_customers = max(report.max_customers, int(self.customers.max()))


def coupled_run(
    n: int,
    level: int,
    ops: int,
    config: Optional[OramConfig] = None,
    seed: int = 0,
    strict: bool = False,
) -> CouplingReport:
    config = (config or OramConfig(n=n)).for_memory(n).model_copy(update={"record_trace": False})
    state = OramState(config, rng=derive_rng(seed, "coupling", "oram"))
    if state.depth < level + 1:
        raise InvalidConfig(f"tree depth {state.depth} is below level + 1 = {level + 1}")
    coupler = SupermarketCoupler(level, state.depth, config.bucket_capacity // 2,
                                 derive_rng(seed, "coupling", "supermarket"), strict=strict)
    coupler.report = CouplingReport(level=level, cashiers=coupler.D, ops=ops)
    state.listener = coupler
    try:
        for op in generate_workload("uniform-random", n, ops, derive_rng(seed, "coupling", "ops")):
            state.access(op.kind, op.address, op.value)
    except OramAbort as e:
        coupler.report.aborted = e.event.kind.value
    coupler.report.overflows_at_level = state.counters.overflows_per_level[level]
    logger.info(
        f"Coupling at level {level}: {coupler.report.steps} steps, {coupler.report.violations} violations"
    )
    return coupler.report
