# core/recursive_oram.py
"""
Recursive position map: the position map of each ORAM level is itself stored
in a smaller ORAM holding one position word per block, until the block count
falls below the cutoff and the map is kept directly in the cache.

Positions are stored as `position + 1` so that a fresh (zero) word reads as
"unset".
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

from core.config import OramConfig
from core.oram_core import AccessKind, ArrayPositionMap, OramState
from core.seeding import derive_rng

logger = logging.getLogger(__name__)

WORD_BYTES = 8


def level_sizes(n: int, alpha: int, cutoff: int) -> List[int]:
    """Memory sizes (words) of the ORAM levels, data level first."""
    sizes = [n]
    while True:
        blocks = -(-sizes[-1] // alpha)
        if blocks <= cutoff or blocks < alpha:
            return sizes
        sizes.append(blocks)


class OramPositionMap:
    """Position map backed by the next ORAM level; one access per lookup."""

    in_cache = False

    def __init__(self, inner: OramState):
        self.inner = inner

    def read_and_update(self, i: int, new_pos: int) -> Optional[int]:
        word = self.inner.access("write", i, new_pos + 1)
        return word - 1 if word else None

    def peek(self, i: int) -> Optional[int]:
        word = self.inner.peek_word(i)
        return word - 1 if word else None

    def touch(self) -> None:
        self.inner.access("read", 0)


@dataclass
class OramStack:
    levels: List[OramState]
    base_map: ArrayPositionMap
    cutoff: int

    @property
    def n(self) -> int:
        return self.levels[0].config.n

    def access(self, kind: AccessKind, r: int, v: Optional[int] = None) -> int:
        return self.levels[0].access(kind, r, v)

    def read(self, r: int) -> int:
        return self.access("read", r)

    def write(self, r: int, v: int) -> int:
        return self.access("write", r, v)

    @property
    def abort(self):
        return self.levels[0].abort

    def physical_accesses(self) -> int:
        return sum(len(level.trace) for level in self.levels)

    def path_scans(self) -> int:
        return sum(level.counters.path_scans for level in self.levels)

    def cache_words(self) -> int:
        """Base map entries, the queue bound of every level and the parked-remap bound of the upper levels."""
        queue_words = sum(level.queue.q_max * (level.config.alpha + 2) for level in self.levels)
        remap_words = sum(2 * level.queue.q_max for level in self.levels if not level.posmap.in_cache)
        return len(self.base_map) + queue_words + remap_words

    def external_words(self) -> int:
        """Words of external memory across all levels (every slot holds index, position and payload)."""
        total = 0
        for level in self.levels:
            tree = level.tree
            internal = (tree.leaf_count - 1) * tree.bucket_capacity
            leaves = tree.leaf_count * tree.leaf_capacity
            total += (internal + leaves) * (level.config.alpha + 2)
        return total

    def summary(self) -> List[dict]:
        rows = []
        for j, level in enumerate(self.levels):
            rows.append({
                "level": j,
                "n": level.config.n,
                "leaves": level.leaf_count,
                "depth": level.depth,
                "ell": level.config.bucket_capacity,
                "ell_leaf": level.config.leaf_capacity,
                "q_max": level.config.queue_limit,
                "trace_events": len(level.trace),
                "pending_remaps": len(level.pending_remaps),
                **level.counters.summary(),
            })
        return rows


def build_recursive(n: int, config: OramConfig) -> OramStack:
    config = config.for_memory(n) if config.n != n else config
    config.check()
    sizes = level_sizes(n, config.alpha, config.recursion_cutoff)
    base_map = ArrayPositionMap(-(-sizes[-1] // config.alpha))
    posmap = base_map
    levels: List[OramState] = []
    for j in reversed(range(len(sizes))):
        level_config = config.for_memory(sizes[j])
        state = OramState(level_config, posmap=posmap, rng=derive_rng(config.rng_seed, "oram", "level", j))
        levels.append(state)
        posmap = OramPositionMap(state)
    levels.reverse()
    logger.info(
        f"Built recursive ORAM for n={n}: {len(levels)} level(s) sized {sizes}, "
        f"base map of {len(base_map)} entries"
    )
    return OramStack(levels=levels, base_map=base_map, cutoff=config.recursion_cutoff)


def pos_read_update(stack: OramStack, j: int, i: int, new_pos: int) -> Optional[int]:
    """Read-and-replace the position of block i of level j, from level j+1 or the base map."""
    if j + 1 < len(stack.levels):
        return OramPositionMap(stack.levels[j + 1]).read_and_update(i, new_pos)
    return stack.base_map.read_and_update(i, new_pos)
