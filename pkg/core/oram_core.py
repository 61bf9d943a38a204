# core/oram_core.py
"""
Base (non-recursive) tree ORAM.

Each Read/Write runs one Fetch and two Dequeues. A Dequeue is one Put-Back
followed by a geometric number of Flushes along uniformly random paths;
Flush carries the furthest-travelling block one level down at every node of
its path and hands over-threshold blocks to Overflow, which re-positions them
and sends them back to the queue.

When the position map lives in another ORAM, Overflow does not touch it:
the new position is parked in `pending_remaps` and every operation ends
with exactly one settling access on the map, writing the oldest parked
remap or, when none is parked, a lookup whose result is dropped. The
number of position-map accesses per operation is therefore two,
whatever the workload or the overflow count.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Protocol

import numpy as np

from core.config import OramConfig
from core.errors import (
    AbortEvent,
    AbortKind,
    InstanceHalted,
    InvariantViolation,
    OramAbort,
)
from core.seeding import derive_rng
from core.stash_queue import StashQueue
from core.tree_memory import (
    AccessTrace,
    Block,
    Bucket,
    build_tree,
    leaf_node,
    path_to_leaf,
    read_node,
    write_node,
)

logger = logging.getLogger(__name__)

AccessKind = Literal["read", "write"]

PUT_BACK = 1
FLUSH = 0


class PositionMapIface(Protocol):
    in_cache: bool

    def read_and_update(self, i: int, new_pos: int) -> Optional[int]:
        """Return the stored position of block i (None if unset) and replace it with new_pos."""

    def peek(self, i: int) -> Optional[int]:
        """Stored position without side effects (inspection only)."""

    def touch(self) -> None:
        """One lookup whose result is dropped."""


class ArrayPositionMap:
    """Position map held directly in the cache."""

    in_cache = True

    def __init__(self, size: int):
        self.positions = np.full(size, -1, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.positions)

    def read_and_update(self, i: int, new_pos: int) -> Optional[int]:
        old = int(self.positions[i])
        self.positions[i] = new_pos
        return None if old < 0 else old

    def peek(self, i: int) -> Optional[int]:
        value = int(self.positions[i])
        return None if value < 0 else value

    def touch(self) -> None:
        pass


class OramListener(Protocol):
    def on_put_back(self, state: "OramState", block: Optional[Block]) -> None: ...

    def on_flush(self, state: "OramState", leaf: int) -> None: ...


@dataclass
class OramCounters:
    depth: int
    ops: int = 0
    path_scans: int = 0
    fresh_fetches: int = 0
    flushes: int = 0
    put_backs: int = 0
    empty_put_backs: int = 0
    root_bounces: int = 0
    max_queue_live: int = 0
    max_leaf_occupancy: int = 0
    max_internal_occupancy: int = 0
    overflows_per_level: List[int] = field(default_factory=list)
    paths_per_op: List[int] = field(default_factory=list)
    actions: bytearray = field(default_factory=bytearray)

    def __post_init__(self):
        if not self.overflows_per_level:
            self.overflows_per_level = [0] * self.depth

    @property
    def overflows(self) -> int:
        return sum(self.overflows_per_level)

    def summary(self) -> dict:
        return {
            "ops": self.ops,
            "path_scans": self.path_scans,
            "fresh_fetches": self.fresh_fetches,
            "flushes": self.flushes,
            "put_backs": self.put_backs,
            "empty_put_backs": self.empty_put_backs,
            "root_bounces": self.root_bounces,
            "overflows": self.overflows,
            "overflows_per_level": list(self.overflows_per_level),
            "max_queue_live": self.max_queue_live,
            "max_leaf_occupancy": self.max_leaf_occupancy,
            "max_internal_occupancy": self.max_internal_occupancy,
        }


def sample_flush_count(rng: np.random.Generator, continue_prob: float = 2.0 / 3.0) -> int:
    """Flip the coin C until it shows 0; Pr[N = k] = p^k (1 - p)."""
    count = 0
    while rng.random() < continue_prob:
        count += 1
    return count


def common_prefix_length(a: int, b: int, depth: int) -> int:
    return depth - (a ^ b).bit_length()


class OramState:
    def __init__(
        self,
        config: OramConfig,
        posmap: Optional[PositionMapIface] = None,
        rng: Optional[np.random.Generator] = None,
        listener: Optional[OramListener] = None,
    ):
        config.check()
        self.config = config
        self.tree = build_tree(config.n, config)
        self.depth = self.tree.depth
        self.leaf_count = self.tree.leaf_count
        self.queue = StashQueue(config.queue_limit)
        self.posmap = posmap if posmap is not None else ArrayPositionMap(config.block_count)
        self.trace = AccessTrace(self.depth, record=config.record_trace)
        self.rng = rng if rng is not None else derive_rng(config.rng_seed, "oram")
        self.listener = listener
        self.op_serial = 0
        self.counters = OramCounters(self.depth)
        self.abort: Optional[AbortEvent] = None
        # block index -> position not yet written to an external position map
        self.pending_remaps: Dict[int, int] = {}
        self._op_paths = 0
        self._last_index = 0
        self._half = config.bucket_capacity // 2

    # --- public operation ---

    def access(self, kind: AccessKind, r: int, v: Optional[int] = None) -> int:
        """Read or write word r; returns the word's value before this operation."""
        if self.abort is not None:
            raise InstanceHalted(self.abort)
        if not 0 <= r < self.config.n:
            raise IndexError(f"address {r} outside [0, {self.config.n})")
        if kind == "write" and v is None:
            raise ValueError("write needs a value")
        self.op_serial += 1
        self._op_paths = 0
        try:
            old = self.fetch(kind, r, v)
            self.dequeue()
            self.dequeue()
            self._settle_remap()
        except OramAbort as e:
            self.abort = AbortEvent(e.event.kind, self.op_serial)
            logger.warning(f"ORAM (n={self.config.n}) aborted: {self.abort.kind.value} at op {self.op_serial}")
            if e.event == self.abort:
                raise
            raise OramAbort(self.abort) from e
        self.counters.ops += 1
        self.counters.paths_per_op.append(self._op_paths)
        return old

    def read(self, r: int) -> int:
        return self.access("read", r)

    def write(self, r: int, v: int) -> int:
        return self.access("write", r, v)

    # --- sub-routines ---

    def fetch(self, kind: AccessKind, r: int, v: Optional[int] = None) -> int:
        i, offset = divmod(r, self.config.alpha)
        self.trace.begin(self.op_serial, "fetch")
        new_pos = self._random_leaf()
        if self.config.mutation == "reuse-position":
            kept = self.stored_position(i)
            if kept is not None:
                new_pos = kept
        # a parked remap is newer than what the map returns
        old_pos = self.pending_remaps.pop(i, self.posmap.read_and_update(i, new_pos))
        if old_pos is None:
            block = Block(i, new_pos, [0] * self.config.alpha)
            self._scan_path(self._random_leaf(), None)
            self.counters.fresh_fetches += 1
        else:
            block = self._scan_path(old_pos, i)
            if block is None:
                block = self.queue.find(i, old_pos)
            if block is None:
                raise InvariantViolation(f"block {i} is neither on path to leaf {old_pos} nor in the queue")
            block.position = new_pos
        old_word = block.payload[offset]
        if kind == "write":
            block.payload[offset] = v
        self._last_index = i
        self._enqueue(block)
        return old_word

    def dequeue(self) -> None:
        self.put_back()
        if self.config.mutation == "fixed-flush-count":
            flushes = 2
        else:
            flushes = sample_flush_count(self.rng, self.config.flush_continue_prob)
        for _ in range(flushes):
            self.flush()

    def put_back(self) -> None:
        """Move the queue head to the root; the root is read and rewritten even when nothing moves."""
        self.trace.begin(self.op_serial, "putback")
        bucket = read_node(self.tree, "", self.trace)
        block = self.queue.pop_front()
        placed = None
        if block is None:
            self.counters.empty_put_backs += 1
        elif bucket.is_full:
            self.queue.push_front(block)
            self.counters.root_bounces += 1
        else:
            bucket.blocks.append(block)
            placed = block
        self._note_occupancy("", bucket)
        if self.depth == 0 and len(bucket) >= self.tree.leaf_capacity:
            self._abort(AbortKind.LEAF)
        write_node(self.tree, "", bucket, self.trace)
        self.counters.put_backs += 1
        self.counters.actions.append(PUT_BACK)
        if self.listener is not None:
            self.listener.on_put_back(self, placed)

    def flush(self) -> None:
        self.trace.begin(self.op_serial, "flush")
        target = self._flush_leaf()
        path = path_to_leaf(self.tree, target)
        carried: Optional[Block] = None
        for level in range(self.depth):
            v = path[level]
            bucket = read_node(self.tree, v, self.trace)
            # may transiently exceed capacity client-side; write_node enforces it
            if carried is not None:
                bucket.blocks.append(carried)
            self._note_occupancy(v, bucket)
            carried = self._take_carry(bucket, target, level)
            for side in (0, 1):
                victim = self._overflow_victim(bucket, level, side)
                if victim is not None:
                    self.overflow(bucket.blocks.pop(victim), level)
            write_node(self.tree, v, bucket, self.trace)
        leaf = path[self.depth]
        bucket = read_node(self.tree, leaf, self.trace)
        if carried is not None:
            bucket.blocks.append(carried)
        self._note_occupancy(leaf, bucket)
        if len(bucket) >= self.tree.leaf_capacity:
            self._abort(AbortKind.LEAF)
        write_node(self.tree, leaf, bucket, self.trace)
        self._op_paths += 1
        self.counters.path_scans += 1
        self.counters.flushes += 1
        self.counters.actions.append(FLUSH)
        if self.listener is not None:
            self.listener.on_flush(self, target)

    def overflow(self, b: Block, level: Optional[int] = None) -> None:
        new_pos = self._random_leaf()
        b.position = new_pos
        if level is not None:
            self.counters.overflows_per_level[level] += 1
        if self.posmap.in_cache:
            self.posmap.read_and_update(b.index, new_pos)
        else:
            self.pending_remaps[b.index] = new_pos
            if len(self.pending_remaps) >= self.queue.q_max:
                self._abort(AbortKind.QUEUE)
        self._enqueue(b)

    # --- inspection ---

    def stored_position(self, i: int) -> Optional[int]:
        """Position of block i as the cache sees it: a parked remap, else the map's entry."""
        if i in self.pending_remaps:
            return self.pending_remaps[i]
        return self.posmap.peek(i)

    def peek_word(self, r: int) -> int:
        """Current value of word r without physical accesses (inspection only)."""
        i, offset = divmod(r, self.config.alpha)
        pos = self.stored_position(i)
        if pos is None:
            return 0
        bits = leaf_node(pos, self.depth)
        for length in range(self.depth + 1):
            for block in self.tree.peek(bits[:length]).blocks:
                if block.index == i:
                    return block.payload[offset]
        for block in self.queue.blocks():
            if block.index == i:
                return block.payload[offset]
        raise InvariantViolation(f"block {i} not found while peeking word {r}")

    # --- helpers ---

    def _settle_remap(self) -> None:
        if self.posmap.in_cache:
            return
        if self.pending_remaps:
            i = next(iter(self.pending_remaps))
            self.posmap.read_and_update(i, self.pending_remaps.pop(i))
        else:
            self.posmap.touch()

    def _random_leaf(self) -> int:
        return int(self.rng.integers(self.leaf_count))

    def _flush_leaf(self) -> int:
        if self.config.mutation == "data-dependent-flush":
            return self._last_index % self.leaf_count
        return self._random_leaf()

    def _scan_path(self, leaf: int, wanted: Optional[int]) -> Optional[Block]:
        found = None
        for v in path_to_leaf(self.tree, leaf):
            bucket = read_node(self.tree, v, self.trace)
            if wanted is not None and found is None:
                for j, block in enumerate(bucket.blocks):
                    if block.index == wanted:
                        found = bucket.blocks.pop(j)
                        break
            write_node(self.tree, v, bucket, self.trace)
        self._op_paths += 1
        self.counters.path_scans += 1
        return found

    def _take_carry(self, bucket: Bucket, target: int, level: int) -> Optional[Block]:
        """Remove the block that can travel furthest along the path to `target` (ties: lowest slot)."""
        shallow = self.config.mutation == "shallow-carry"
        best, best_reach = None, None
        for j, block in enumerate(bucket.blocks):
            reach = common_prefix_length(block.position, target, self.depth)
            if reach <= level:
                continue
            if best is None or (reach < best_reach if shallow else reach > best_reach):
                best, best_reach = j, reach
        return bucket.blocks.pop(best) if best is not None else None

    def _overflow_victim(self, bucket: Bucket, level: int, side: int) -> Optional[int]:
        shift = self.depth - 1 - level
        members = [j for j, block in enumerate(bucket.blocks) if (block.position >> shift) & 1 == side]
        over = len(members) >= self._half if self.config.overflow_rule == "figure" else len(members) > self._half
        return members[0] if over else None

    def _enqueue(self, block: Block) -> None:
        self.queue.insert(block)
        live = self.queue.live_size()
        if live > self.counters.max_queue_live:
            self.counters.max_queue_live = live
        if live >= self.queue.q_max:
            self._abort(AbortKind.QUEUE)

    def _note_occupancy(self, v: str, bucket: Bucket) -> None:
        size = len(bucket)
        if len(v) == self.depth:
            if size > self.counters.max_leaf_occupancy:
                self.counters.max_leaf_occupancy = size
        elif size > self.counters.max_internal_occupancy:
            self.counters.max_internal_occupancy = size

    def _abort(self, kind: AbortKind) -> None:
        raise OramAbort(AbortEvent(kind, self.op_serial))


def check_block_path_invariance(state: OramState) -> None:
    """Full scan: every index lives once, on its assigned path or in the queue, with position = P[i]."""
    seen = set()

    def _check(block: Block, where: str) -> None:
        if block.index in seen:
            raise InvariantViolation(f"block {block.index} appears twice (again at {where})")
        seen.add(block.index)
        stored = state.stored_position(block.index)
        if stored != block.position:
            raise InvariantViolation(
                f"block {block.index} at {where} carries position {block.position}, position map says {stored}"
            )

    for v, bucket in state.tree.occupied():
        if len(bucket) > state.tree.capacity_of(v):
            raise InvariantViolation(f"bucket {v or 'root'} over capacity")
        for block in bucket.blocks:
            if not leaf_node(block.position, state.depth).startswith(v):
                raise InvariantViolation(f"block {block.index} at {v or 'root'} is off its path to {block.position}")
            _check(block, v or "root")
    for block in state.queue.blocks():
        _check(block, "queue")
