# core/workloads.py
from pathlib import Path
from typing import List, Literal, NamedTuple, Optional, Union

import numpy as np

from core.errors import InvalidConfig

WorkloadName = Literal["uniform-random", "sequential", "hot-spot", "scripted-file"]
MAX_VALUE = 2 ** 31


class Op(NamedTuple):
    kind: str
    address: int
    value: Optional[int] = None


class ReferenceRam:
    """Plain array RAM with the ORAM's access contract (fresh words read as 0)."""

    def __init__(self, n: int):
        self.words = np.zeros(n, dtype=np.int64)

    def access(self, kind: str, r: int, v: Optional[int] = None) -> int:
        old = int(self.words[r])
        if kind == "write":
            self.words[r] = v
        return old


def _kinds(rng: np.random.Generator, ops: int) -> np.ndarray:
    return rng.random(ops) < 0.5


def generate_workload(
    name: WorkloadName,
    n: int,
    ops: int,
    rng: np.random.Generator,
    hot_address: int = 0,
    script: Optional[Union[str, Path]] = None,
) -> List[Op]:
    """Read/write mix is an independent fair coin per op; workloads differ only in addresses."""
    if name == "scripted-file":
        if script is None:
            raise InvalidConfig("scripted-file workload needs a script path")
        return load_script(script, n)
    if name == "uniform-random":
        addresses = rng.integers(n, size=ops)
    elif name == "sequential":
        addresses = np.arange(ops) % n
    elif name == "hot-spot":
        if not 0 <= hot_address < n:
            raise InvalidConfig(f"hot address {hot_address} outside [0, {n})")
        addresses = np.full(ops, hot_address)
    else:
        raise InvalidConfig(f"unknown workload {name!r}")
    writes = _kinds(rng, ops)
    values = rng.integers(1, MAX_VALUE, size=ops)
    return [
        Op("write", int(a), int(v)) if w else Op("read", int(a))
        for a, w, v in zip(addresses, writes, values)
    ]


def load_script(path: Union[str, Path], n: int) -> List[Op]:
    """One op per line: `read <addr>` or `write <addr> <value>`; `#` starts a comment."""
    ops = []
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "read" and len(parts) == 2:
                op = Op("read", int(parts[1]))
            elif parts[0] == "write" and len(parts) == 3:
                op = Op("write", int(parts[1]), int(parts[2]))
            else:
                raise ValueError("expected `read ADDR` or `write ADDR VALUE`")
        except ValueError as e:
            raise InvalidConfig(f"{path}:{line_no}: {raw!r}: {e}") from e
        if not 0 <= op.address < n:
            raise InvalidConfig(f"{path}:{line_no}: address {op.address} outside [0, {n})")
        ops.append(op)
    return ops
