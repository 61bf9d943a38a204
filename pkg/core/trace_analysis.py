# core/trace_analysis.py
"""
Statistical checks on access traces.

A trace is split into root-to-leaf path scans (one per Fetch and per Flush);
the leaves reached and the number of scans per operation are what an observer
learns, and both must look the same whatever the workload.
"""
import logging
from collections import Counter
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from core.config import OramConfig
from core.errors import InsufficientSamples, MalformedTrace, OramAbort, UnequalLengths
from core.oram_core import PUT_BACK, OramState
from core.seeding import derive_rng
from core.tree_memory import MODES, AccessTrace, TraceEvent
from core.workloads import Op, generate_workload

logger = logging.getLogger(__name__)

SIGNIFICANCE = 0.01
MIN_ACTIONS = 100_000
MIN_PATHS_PER_LEAF = 50
MIN_OPS_FOR_PATH_COUNTS = 200


class PathRecord(NamedTuple):
    op_serial: int
    phase: str
    leaf: int


class TestReport(BaseModel):
    name: str
    statistic: float
    p_value: Optional[float] = None
    threshold: float = SIGNIFICANCE
    # None when the check could not run (too few samples); see `skipped`
    passed: Optional[bool]
    skipped: bool = False
    sample_size: int
    seed: Optional[int] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    def as_row(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def extract_op_paths(trace: Union[AccessTrace, Iterable[TraceEvent]], depth: Optional[int] = None) -> List[PathRecord]:
    if depth is None:
        depth = trace.depth
    events = list(trace)
    records: List[PathRecord] = []
    scan_length = 2 * (depth + 1)
    k = 0
    while k < len(events):
        head = events[k]
        if head.phase == "putback":
            pair = events[k:k + 2]
            if (
                len(pair) != 2 or pair[1].phase != "putback" or pair[1].op_serial != head.op_serial
                or head.node != "" or pair[1].node != "" or head.mode != "read" or pair[1].mode != "write"
            ):
                raise MalformedTrace(f"event {k}: put-back must be one root read followed by one root write")
            k += 2
            continue
        chunk = events[k:k + scan_length]
        if len(chunk) != scan_length:
            raise MalformedTrace(f"event {k}: trace ends inside a path scan")
        previous = None
        for level in range(depth + 1):
            read, write = chunk[2 * level], chunk[2 * level + 1]
            if (
                read.mode != "read" or write.mode != "write" or read.node != write.node
                or len(read.node) != level
                or (previous is not None and not read.node.startswith(previous))
            ):
                raise MalformedTrace(f"event {k + 2 * level}: broken path scan at level {level}")
            if any(e.op_serial != head.op_serial or e.phase != head.phase for e in (read, write)):
                raise MalformedTrace(f"event {k + 2 * level}: path scan spans several ops or phases")
            previous = read.node
        leaf = int(previous, 2) if depth else 0
        records.append(PathRecord(head.op_serial, head.phase, leaf))
        k += scan_length
    return records


def scan_leaves(trace: AccessTrace) -> tuple:
    """
    (op_serial, leaf) per path scan, read off the leaf-level reads without
    building event objects. Assumes a well-formed trace; use extract_op_paths
    to validate one.
    """
    if trace.depth == 0:
        paths = extract_op_paths(trace)
        return (np.array([p.op_serial for p in paths], dtype=np.int64),
                np.zeros(len(paths), dtype=np.int64))
    serials, _, slots, modes = trace.columns()
    first_leaf = 1 << trace.depth
    mask = (slots >= first_leaf) & (modes == MODES.index("read"))
    return serials[mask], slots[mask] - first_leaf


def paths_per_op(paths: Sequence[PathRecord]) -> List[int]:
    counts = Counter(p.op_serial for p in paths)
    return [counts[serial] for serial in sorted(counts)]


def uniformity_test(paths: Union[Sequence[PathRecord], np.ndarray], L: int, seed: Optional[int] = None) -> TestReport:
    """Chi-square goodness of fit of scanned leaves against uniform on L leaves; takes path records or a leaf array."""
    leaves = paths if isinstance(paths, np.ndarray) else np.array([p.leaf for p in paths], dtype=np.int64)
    if len(leaves) < MIN_PATHS_PER_LEAF * L:
        raise InsufficientSamples(f"{len(leaves)} paths for {L} leaves; need at least {MIN_PATHS_PER_LEAF * L}")
    counts = np.bincount(leaves, minlength=L)
    if L == 1:
        statistic, p_value = 0.0, 1.0
    else:
        statistic, p_value = stats.chisquare(counts)
        statistic, p_value = float(statistic), float(p_value)
    return TestReport(
        name="leaf-uniformity",
        statistic=statistic,
        p_value=p_value,
        passed=p_value > SIGNIFICANCE,
        sample_size=len(leaves),
        seed=seed,
        details={"leaves": L, "min_count": int(counts.min()), "max_count": int(counts.max())},
    )


def consecutive_leaf_test(
    paths: Union[Sequence[PathRecord], np.ndarray],
    L: int,
    seed: Optional[int] = None,
    min_expected: float = 5.0,
) -> TestReport:
    """
    Chi-square independence of each scanned leaf and the next one. Leaves are
    merged into contiguous groups, as many as keep every cell of the
    group x group table at min_expected or more under independence.
    """
    leaves = paths if isinstance(paths, np.ndarray) else np.array([p.leaf for p in paths], dtype=np.int64)
    if len(leaves) < MIN_PATHS_PER_LEAF * L:
        raise InsufficientSamples(f"{len(leaves)} paths for {L} leaves; need at least {MIN_PATHS_PER_LEAF * L}")
    pairs = len(leaves) - 1
    groups = min(L, int(np.sqrt(pairs / min_expected)))
    details: Dict[str, Any] = {"leaves": L, "groups": groups}
    if L == 1:
        return TestReport(name="consecutive-leaves", statistic=0.0, p_value=1.0, passed=True,
                          sample_size=pairs, seed=seed, details=details)
    if groups < 2:
        raise InsufficientSamples(f"{pairs} leaf pairs are too few for a 2x2 table")
    grouped = leaves * groups // L
    table = np.zeros((groups, groups))
    np.add.at(table, (grouped[:-1], grouped[1:]), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if min(table.shape) < 2:
        statistic, p_value = float("inf"), 0.0
    else:
        chi2, p_value, _, _ = stats.chi2_contingency(table, correction=False)
        statistic, p_value = float(chi2), float(p_value)
    return TestReport(
        name="consecutive-leaves",
        statistic=statistic,
        p_value=p_value,
        passed=p_value > SIGNIFICANCE,
        sample_size=pairs,
        seed=seed,
        details=details,
    )


def _tail_bins(expected_pmf: np.ndarray, total: int, min_expected: float = 5.0) -> int:
    """Number of leading bins kept separate so every bin (tail included) expects >= min_expected."""
    bins = 1
    while bins < len(expected_pmf) and expected_pmf[bins] * total >= min_expected \
            and (1.0 - expected_pmf[:bins + 1].sum()) * total >= min_expected:
        bins += 1
    return bins


def paths_per_op_test(counts: Sequence[int], continue_prob: float = 2.0 / 3.0, seed: Optional[int] = None) -> TestReport:
    """Per-op path scans must be 1 + X, X the sum of two independent geometric flush counts."""
    counts = np.asarray(counts, dtype=np.int64)
    if len(counts) < MIN_OPS_FOR_PATH_COUNTS:
        raise InsufficientSamples(f"{len(counts)} ops; need at least {MIN_OPS_FOR_PATH_COUNTS}")
    extra = counts - 1
    if extra.min() < 0:
        return TestReport(name="paths-per-op", statistic=float("inf"), p_value=0.0, passed=False,
                          sample_size=len(counts), seed=seed, details={"reason": "op without a fetch scan"})
    support = np.arange(max(int(extra.max()), 64) + 1)
    pmf = stats.nbinom.pmf(support, 2, 1.0 - continue_prob)
    bins = _tail_bins(pmf, len(counts))
    observed = np.bincount(np.minimum(extra, bins), minlength=bins + 1)[:bins + 1].astype(float)
    expected = np.append(pmf[:bins], 1.0 - pmf[:bins].sum()) * len(counts)
    statistic, p_value = stats.chisquare(observed, expected)
    return TestReport(
        name="paths-per-op",
        statistic=float(statistic),
        p_value=float(p_value),
        passed=float(p_value) > SIGNIFICANCE,
        sample_size=len(counts),
        seed=seed,
        details={"mean_paths": float(counts.mean()), "bins": bins + 1},
    )


def action_sequence_test(
    actions: Sequence[int],
    put_back_prob: float = 1.0 / 3.0,
    seed: Optional[int] = None,
    min_samples: int = MIN_ACTIONS,
) -> TestReport:
    """Put-Back frequency within 3 sigma of 1/3 and lag-1 independence of the merged action stream."""
    a = np.frombuffer(bytes(actions), dtype=np.uint8) if isinstance(actions, (bytes, bytearray)) \
        else np.asarray(actions, dtype=np.uint8)
    if len(a) < min_samples:
        raise InsufficientSamples(f"{len(a)} actions; need at least {min_samples}")
    n = len(a)
    frequency = float((a == PUT_BACK).mean())
    sigma = float(np.sqrt(put_back_prob * (1 - put_back_prob) / n))
    frequency_ok = abs(frequency - put_back_prob) <= 3 * sigma
    table = np.zeros((2, 2))
    np.add.at(table, (a[:-1], a[1:]), 1)
    if (table.sum(axis=0) == 0).any() or (table.sum(axis=1) == 0).any():
        chi2, p_value = float("inf"), 0.0
    else:
        chi2, p_value, _, _ = stats.chi2_contingency(table, correction=False)
        chi2, p_value = float(chi2), float(p_value)
    return TestReport(
        name="action-sequence",
        statistic=chi2,
        p_value=p_value,
        passed=frequency_ok and p_value > SIGNIFICANCE,
        sample_size=n,
        seed=seed,
        details={"put_back_frequency": frequency, "sigma": sigma, "frequency_ok": frequency_ok,
                 "lag1_p_value": p_value},
    )


def _two_sample(hist_a: np.ndarray, hist_b: np.ndarray, min_column: int = 10) -> tuple:
    """Chi-square homogeneity test on two histograms; sparse trailing bins are merged."""
    size = max(len(hist_a), len(hist_b))
    a = np.zeros(size)
    b = np.zeros(size)
    a[:len(hist_a)] = hist_a
    b[:len(hist_b)] = hist_b
    columns = []
    acc_a = acc_b = 0.0
    for x, y in zip(a, b):
        acc_a += x
        acc_b += y
        if acc_a + acc_b >= min_column:
            columns.append((acc_a, acc_b))
            acc_a = acc_b = 0.0
    if acc_a + acc_b > 0:
        if columns:
            last = columns.pop()
            columns.append((last[0] + acc_a, last[1] + acc_b))
        else:
            columns.append((acc_a, acc_b))
    table = np.array(columns).T
    if table.shape[1] < 2:
        return 0.0, 1.0
    if (table.sum(axis=1) == 0).any():
        return float("inf"), 0.0
    chi2, p_value, _, _ = stats.chi2_contingency(table, correction=False)
    return float(chi2), float(p_value)


def _observe(ops: Sequence[Op], config: OramConfig, rng) -> tuple:
    state = OramState(config.model_copy(update={"record_trace": True}), rng=rng)
    try:
        for op in ops:
            state.access(op.kind, op.address, op.value)
    except OramAbort as e:
        return None, None, e.event
    serials, leaves = scan_leaves(state.trace)
    leaves = np.bincount(leaves, minlength=state.leaf_count)
    per_op = np.bincount(np.unique(serials, return_counts=True)[1])
    return leaves, per_op, None


def trace_compare(
    workload_a: Union[str, Sequence[Op]],
    workload_b: Union[str, Sequence[Op]],
    n: int,
    ops: int,
    trials: int,
    config: Optional[OramConfig] = None,
    seed: int = 0,
) -> TestReport:
    """Run both workloads through fresh ORAMs and test whether their observable summaries differ."""
    config = (config or OramConfig(n=n)).for_memory(n)
    leaves_a = leaves_b = per_op_a = per_op_b = None
    aborts = {"a": 0, "b": 0}
    for trial in range(trials):
        runs = {}
        for label, workload in (("a", workload_a), ("b", workload_b)):
            if isinstance(workload, str):
                ops_list = generate_workload(workload, n, ops, derive_rng(seed, "compare", label, "ops", trial))
            else:
                ops_list = list(workload)
            runs[label] = ops_list
        if len(runs["a"]) != len(runs["b"]):
            raise UnequalLengths(f"workloads have {len(runs['a'])} and {len(runs['b'])} ops")
        for label in ("a", "b"):
            leaves, per_op, abort = _observe(runs[label], config, derive_rng(seed, "compare", label, "oram", trial))
            if abort is not None:
                aborts[label] += 1
                continue
            if label == "a":
                leaves_a = leaves if leaves_a is None else leaves_a + leaves
                per_op_a = per_op if per_op_a is None else _add_ragged(per_op_a, per_op)
            else:
                leaves_b = leaves if leaves_b is None else leaves_b + leaves
                per_op_b = per_op if per_op_b is None else _add_ragged(per_op_b, per_op)
    details: Dict[str, Any] = {"trials": trials, "aborts_a": aborts["a"], "aborts_b": aborts["b"]}
    if aborts["a"] != aborts["b"]:
        details["reason"] = "abort pattern differs between workloads"
    elif leaves_a is None:
        details["reason"] = "no completed trials"
    if "reason" in details:
        return TestReport(name="trace-compare", statistic=float("inf"), p_value=0.0, passed=False,
                          sample_size=0, seed=seed, details=details)
    leaf_chi2, leaf_p = _two_sample(leaves_a, leaves_b)
    count_chi2, count_p = _two_sample(per_op_a, per_op_b)
    details.update({"leaf_p_value": leaf_p, "paths_per_op_p_value": count_p})
    worst = min((leaf_p, leaf_chi2), (count_p, count_chi2))
    return TestReport(
        name="trace-compare",
        statistic=worst[1],
        p_value=worst[0],
        passed=leaf_p > SIGNIFICANCE and count_p > SIGNIFICANCE,
        sample_size=int(leaves_a.sum() + leaves_b.sum()),
        seed=seed,
        details=details,
    )


def _add_ragged(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros(max(len(x), len(y)), dtype=np.int64)
    out[:len(x)] += x
    out[:len(y)] += y
    return out
