# core/config.py
import math
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from core.errors import InvalidConfig

OverflowRule = Literal["figure", "prose"]
Mutation = Literal["none", "reuse-position", "fixed-flush-count", "data-dependent-flush", "shallow-carry"]

MIN_DEFAULT_QUEUE_LIMIT = 8


def log2_clamped(n: int) -> float:
    return max(1.0, math.log2(n)) if n > 0 else 1.0


def loglog2_clamped(n: int) -> float:
    return max(1.0, math.log2(log2_clamped(n)))


def leaf_count_for(n: int, alpha: int) -> int:
    """Smallest power of two L with L >= 2(n/alpha) / (log2 n * log2 log2 n)."""
    target = 2.0 * (n / alpha) / (log2_clamped(n) * loglog2_clamped(n))
    leaves = 1
    while leaves < target:
        leaves *= 2
    return leaves


class OramConfig(BaseModel):
    """
    Parameters of one ORAM level. Bucket capacities and the queue limit are
    derived from `n` unless given explicitly; explicit values are carried
    unchanged into the inner levels of a recursive stack.
    """
    n: int = Field(..., ge=1, description="Memory size in words.")
    alpha: int = Field(16, ge=1, description="Block size in words.")
    ell: Optional[int] = Field(None, ge=4, description="Internal bucket capacity (even).")
    ell_leaf: Optional[int] = Field(None, ge=1, description="Leaf bucket capacity.")
    q_max: Optional[int] = Field(None, ge=1, description="Queue abort threshold.")
    flush_continue_prob: float = Field(2.0 / 3.0, gt=0.0, lt=1.0)
    rng_seed: int = 0
    overflow_rule: OverflowRule = "figure"
    mutation: Mutation = "none"
    record_trace: bool = True
    recursion_cutoff: int = Field(4096, ge=1)

    @model_validator(mode="after")
    def _check_capacities(self) -> "OramConfig":
        if self.ell is not None and self.ell % 2:
            raise ValueError(f"ell must be even, got {self.ell}")
        if self.ell_leaf is not None and self.ell_leaf < self.bucket_capacity:
            raise ValueError(f"ell_leaf ({self.ell_leaf}) must be >= ell ({self.bucket_capacity})")
        return self

    @property
    def block_count(self) -> int:
        return -(-self.n // self.alpha)

    @property
    def bucket_capacity(self) -> int:
        if self.ell is not None:
            return self.ell
        return 2 * max(2, math.ceil(loglog2_clamped(self.n)))

    @property
    def leaf_capacity(self) -> int:
        if self.ell_leaf is not None:
            return self.ell_leaf
        return max(self.bucket_capacity, math.ceil(6 * log2_clamped(self.n) * loglog2_clamped(self.n)))

    @property
    def queue_limit(self) -> int:
        if self.q_max is not None:
            return self.q_max
        return max(MIN_DEFAULT_QUEUE_LIMIT, math.ceil(log2_clamped(self.n) ** 2.2))

    @property
    def leaf_count(self) -> int:
        return leaf_count_for(self.n, self.alpha)

    @property
    def depth(self) -> int:
        return self.leaf_count.bit_length() - 1

    def check(self) -> None:
        if self.n < self.alpha:
            raise InvalidConfig(f"memory size n={self.n} is smaller than one block (alpha={self.alpha})")
        if self.leaf_count < 1:
            raise InvalidConfig(f"derived leaf count is zero for n={self.n}, alpha={self.alpha}")

    def for_memory(self, n: int, rng_seed: Optional[int] = None) -> "OramConfig":
        """Same parameters for a level of a different memory size."""
        update = {"n": n}
        if rng_seed is not None:
            update["rng_seed"] = rng_seed
        return self.model_copy(update=update)
