import numpy as np
import pytest

from core.config import OramConfig
from core.errors import AbortKind, OramAbort
from core.oram_core import check_block_path_invariance
from core.recursive_oram import build_recursive, level_sizes, pos_read_update
from core.tree_memory import Block
from core.workloads import ReferenceRam, generate_workload


@pytest.mark.parametrize("n, alpha, cutoff, expected", [
    (4096, 16, 4, [4096, 256, 16]),
    (2 ** 20, 16, 4096, [2 ** 20, 2 ** 16]),
    (4096, 16, 4096, [4096]),
    (100, 16, 4, [100]),
])
def test_level_sizes(n, alpha, cutoff, expected):
    assert level_sizes(n, alpha, cutoff) == expected


@pytest.fixture
def stack():
    return build_recursive(4096, OramConfig(n=4096, recursion_cutoff=4, rng_seed=4))


def test_three_level_stack_matches_reference(stack):
    assert [level.config.n for level in stack.levels] == [4096, 256, 16]
    assert len(stack.base_map) == 1
    ram = ReferenceRam(4096)
    for op in generate_workload("uniform-random", 4096, 1500, np.random.default_rng(4)):
        assert stack.access(op.kind, op.address, op.value) == ram.access(op.kind, op.address, op.value)
    for level in stack.levels:
        check_block_path_invariance(level)
    assert stack.abort is None


def test_inner_level_stores_position_plus_one(stack):
    for r in range(0, 4096, 64):
        stack.write(r, r)
    outer, inner = stack.levels[0], stack.levels[1]
    blocks = [b for _, bucket in outer.tree.occupied() for b in bucket.blocks] + outer.queue.blocks()
    assert blocks
    for block in blocks:
        assert outer.stored_position(block.index) == block.position
        if block.index not in outer.pending_remaps:
            assert inner.peek_word(block.index) == block.position + 1
    untouched = 1
    assert inner.peek_word(untouched) == 0


def test_pos_read_update(stack):
    stack.write(0, 5)
    current = stack.levels[0].posmap.peek(0)
    assert pos_read_update(stack, 0, 0, 3) == current
    assert stack.levels[0].posmap.peek(0) == 3
    assert pos_read_update(stack, 0, 2, 1) is None
    # the last level's map lives in the cache
    assert pos_read_update(stack, 2, 0, 0) is not None


def test_every_level_is_touched_per_op(stack):
    stack.read(0)
    assert [level.counters.ops for level in stack.levels] == [1, 2, 4]
    assert stack.physical_accesses() == sum(len(level.trace) for level in stack.levels)
    assert stack.path_scans() >= 3
    assert stack.external_words() > stack.cache_words() > 0


def test_abort_reports_outer_op_serial():
    stack = build_recursive(4096, OramConfig(n=4096, recursion_cutoff=4, q_max=1))
    with pytest.raises(OramAbort) as info:
        stack.write(0, 1)
    assert info.value.event == stack.abort
    assert info.value.event.kind == AbortKind.QUEUE
    assert info.value.event.op_serial == 1


def test_summary_rows(stack):
    stack.read(1)
    rows = stack.summary()
    assert [row["level"] for row in rows] == [0, 1, 2]
    assert rows[0]["leaves"] == 16 and rows[0]["ell_leaf"] == 259
    assert rows[1]["q_max"] == 98


def _overflowing_stack(seed):
    return build_recursive(4096, OramConfig(n=4096, ell=4, q_max=500, recursion_cutoff=4, rng_seed=seed))


@pytest.mark.parametrize("workload", ["sequential", "hot-spot", "uniform-random"])
def test_inner_op_counts_ignore_overflows(workload):
    stack = _overflowing_stack(6)
    ram = ReferenceRam(4096)
    for op in generate_workload(workload, 4096, 2000, np.random.default_rng(6)):
        assert stack.access(op.kind, op.address, op.value) == ram.access(op.kind, op.address, op.value)
    assert stack.levels[0].counters.overflows > 0
    assert [level.counters.ops for level in stack.levels] == [2000, 4000, 8000]
    for level in stack.levels:
        check_block_path_invariance(level)


def test_overflow_parks_remap_until_settled():
    stack = _overflowing_stack(8)
    outer, inner = stack.levels[0], stack.levels[1]
    stack.write(0, 1)
    before = inner.counters.ops
    parked = Block(5, 3, [0] * 16)
    outer.overflow(parked)
    assert inner.counters.ops == before
    assert outer.pending_remaps[5] == parked.position
    assert outer.stored_position(5) == parked.position
    check_block_path_invariance(outer)
    stack.read(17)
    assert 5 not in outer.pending_remaps
    assert inner.peek_word(5) == parked.position + 1
    assert stack.read(5 * 16) == 0


def test_fetch_prefers_parked_remap():
    stack = _overflowing_stack(9)
    outer = stack.levels[0]
    stack.write(0, 1)
    outer.overflow(Block(6, 2, [7] + [0] * 15))
    # the inner map has never seen block 6; only the parked remap knows where it is
    assert stack.read(6 * 16) == 7
    assert 6 not in outer.pending_remaps
    check_block_path_invariance(outer)
