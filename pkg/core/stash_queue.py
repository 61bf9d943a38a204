# core/stash_queue.py
"""
Cache-side queue of blocks: a FIFO of block records plus a hash index keyed on
(index, position).

`find` deletes from the index only; its FIFO record goes stale and is dropped
when it reaches the head. `pop_front` pops exactly one FIFO record per call and
returns None on a stale head, so every operation does bounded work.
"""
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Tuple

from core.errors import DuplicateIndex
from core.tree_memory import Block

Key = Tuple[int, int]


@dataclass(slots=True)
class BlockRecord:
    block: Block
    live: bool = True


class StashQueue:
    def __init__(self, q_max: int):
        self.q_max = q_max
        self.fifo: Deque[BlockRecord] = deque()
        self.index: Dict[Key, BlockRecord] = {}
        self._live_indices: Dict[int, Key] = {}
        self.stale_pops = 0

    @property
    def live_count(self) -> int:
        return len(self.index)

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, block_index: int) -> bool:
        return block_index in self._live_indices

    def _register(self, b: Block) -> BlockRecord:
        if b.index in self._live_indices:
            raise DuplicateIndex(f"block {b.index} is already live in the queue")
        key = (b.index, b.position)
        record = BlockRecord(b)
        self.index[key] = record
        self._live_indices[b.index] = key
        return record

    def insert(self, b: Block) -> None:
        self.fifo.append(self._register(b))

    def push_front(self, b: Block) -> None:
        """Re-queue a block at the head (used when the root has no room for it)."""
        self.fifo.appendleft(self._register(b))

    def pop_front(self) -> Optional[Block]:
        if not self.fifo:
            return None
        record = self.fifo.popleft()
        if not record.live:
            self.stale_pops += 1
            return None
        block = record.block
        del self.index[(block.index, block.position)]
        del self._live_indices[block.index]
        return block

    def find(self, i: int, p: int) -> Optional[Block]:
        record = self.index.pop((i, p), None)
        if record is None:
            return None
        record.live = False
        del self._live_indices[i]
        return record.block

    def live_size(self) -> int:
        return len(self.index)

    def blocks(self) -> List[Block]:
        """Live blocks in FIFO order (inspection only)."""
        return [record.block for record in self.fifo if record.live]
