# core/tree_memory.py
"""
The untrusted external memory: a full binary tree of fixed-capacity buckets.

Nodes are addressed by binary strings (`""` is the root, `v + "0"` and
`v + "1"` are the children of `v`). Every physical read or write of a node is
appended to an AccessTrace; the trace is what an observer of the memory sees.
"""
import io
import logging
from array import array
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, List, NamedTuple, Optional, Union

import numpy as np

from core.config import OramConfig
from core.errors import CapacityExceeded, InvalidNode, MalformedTrace

logger = logging.getLogger(__name__)

NodeId = str

PHASES = ("fetch", "putback", "flush")
MODES = ("read", "write")
_PHASE_CODE = {name: code for code, name in enumerate(PHASES)}
_MODE_CODE = {name: code for code, name in enumerate(MODES)}

TRACE_MAGIC = b"ORAMTRC1"
SNAPSHOT_MAGIC = b"ORAMSNAP"
SNAPSHOT_VERSION = 1

_TRACE_HEADER = np.dtype([("magic", "S8"), ("version", "<u2"), ("depth", "u1"), ("pad", "u1")])
_TRACE_RECORD = np.dtype([
    ("op_serial", "<u4"), ("phase", "u1"), ("mode", "u1"), ("length", "u1"), ("pad", "u1"), ("bits", "<u8"),
])
_SNAPSHOT_HEADER = np.dtype([
    ("magic", "S8"), ("version", "<u2"), ("depth", "u1"), ("pad", "u1"),
    ("alpha", "<u4"), ("ell", "<u4"), ("ell_leaf", "<u4"),
])


def node_slot(v: NodeId) -> int:
    """Heap index of a node: root is 1, children of s are 2s and 2s+1."""
    return (1 << len(v)) | (int(v, 2) if v else 0)


def node_from_slot(slot: int) -> NodeId:
    length = slot.bit_length() - 1
    return format(slot ^ (1 << length), f"0{length}b") if length else ""


def leaf_node(leaf: int, depth: int) -> NodeId:
    return format(leaf, f"0{depth}b") if depth else ""


@dataclass(slots=True)
class Block:
    index: int
    position: int
    payload: List[int]


@dataclass
class Bucket:
    capacity: int
    blocks: List[Block] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def is_full(self) -> bool:
        return len(self.blocks) >= self.capacity

    def copy(self) -> "Bucket":
        return Bucket(self.capacity, list(self.blocks))


class TraceEvent(NamedTuple):
    op_serial: int
    phase: str
    node: NodeId
    mode: str


class AccessTrace:
    """
    Append-only log of physical node accesses. Events are stored column-wise;
    with `record=False` only the event count is kept.
    """

    def __init__(self, depth: int, record: bool = True):
        self.depth = depth
        self.record = record
        self.event_count = 0
        self.op_serial = 0
        self.phase = "fetch"
        self._phase_code = 0
        self._serials = array("q")
        self._phases = array("b")
        self._slots = array("q")
        self._modes = array("b")

    def begin(self, op_serial: int, phase: str) -> None:
        self.op_serial = op_serial
        self.phase = phase
        self._phase_code = _PHASE_CODE[phase]

    def append(self, v: NodeId, mode: str) -> None:
        self.event_count += 1
        if not self.record:
            return
        self._serials.append(self.op_serial)
        self._phases.append(self._phase_code)
        self._slots.append(node_slot(v))
        self._modes.append(_MODE_CODE[mode])

    def __len__(self) -> int:
        return self.event_count

    def __iter__(self) -> Iterator[TraceEvent]:
        for serial, phase, slot, mode in zip(self._serials, self._phases, self._slots, self._modes):
            yield TraceEvent(serial, PHASES[phase], node_from_slot(slot), MODES[mode])

    def events(self) -> List[TraceEvent]:
        return list(self)

    def columns(self) -> tuple:
        """(op_serial, phase code, heap slot, mode code) as numpy arrays."""
        return (
            np.array(self._serials, dtype=np.int64),
            np.array(self._phases, dtype=np.int8),
            np.array(self._slots, dtype=np.int64),
            np.array(self._modes, dtype=np.int8),
        )

    # --- export / import ---

    def write_text(self, out: IO[str]) -> None:
        out.write(f"# depth={self.depth}\n")
        for event in self:
            out.write(f"{event.op_serial},{event.phase},{event.node or '-'},{event.mode}\n")

    def to_binary(self) -> bytes:
        header = np.zeros(1, dtype=_TRACE_HEADER)
        header["magic"], header["version"], header["depth"] = TRACE_MAGIC, 1, self.depth
        records = np.zeros(len(self._slots), dtype=_TRACE_RECORD)
        slots = np.frombuffer(self._slots, dtype=np.int64) if len(self._slots) else np.zeros(0, dtype=np.int64)
        lengths = np.zeros(len(slots), dtype=np.int64)
        if len(slots):
            lengths = np.floor(np.log2(slots)).astype(np.int64)
        records["op_serial"] = np.frombuffer(self._serials, dtype=np.int64) if len(self._serials) else 0
        records["phase"] = np.frombuffer(self._phases, dtype=np.int8) if len(self._phases) else 0
        records["mode"] = np.frombuffer(self._modes, dtype=np.int8) if len(self._modes) else 0
        records["length"] = lengths
        records["bits"] = slots ^ (np.int64(1) << lengths)
        return header.tobytes() + records.tobytes()

    def save(self, path: Union[str, Path], binary: bool = False) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if binary:
            path.write_bytes(self.to_binary())
        else:
            with path.open("w", encoding="utf-8", newline="\n") as out:
                self.write_text(out)
        logger.info(f"Trace with {len(self)} events written to {path}")
        return path

    @classmethod
    def _from_columns(cls, depth: int, serials, phases, slots, modes) -> "AccessTrace":
        trace = cls(depth)
        trace._serials.extend(int(x) for x in serials)
        trace._phases.extend(int(x) for x in phases)
        trace._slots.extend(int(x) for x in slots)
        trace._modes.extend(int(x) for x in modes)
        trace.event_count = len(trace._slots)
        return trace

    @classmethod
    def read_text(cls, source: IO[str]) -> "AccessTrace":
        header = source.readline().strip()
        if not header.startswith("# depth="):
            raise MalformedTrace(f"missing depth header, got {header!r}")
        depth = int(header.split("=", 1)[1])
        serials, phases, slots, modes = [], [], [], []
        for line_no, line in enumerate(source, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                serial, phase, bits, mode = line.split(",")
                node = "" if bits == "-" else bits
                if len(node) > depth or node.strip("01"):
                    raise ValueError(f"bad node {bits!r}")
                serials.append(int(serial))
                phases.append(_PHASE_CODE[phase])
                slots.append(node_slot(node))
                modes.append(_MODE_CODE[mode])
            except (ValueError, KeyError) as e:
                raise MalformedTrace(f"line {line_no}: {line!r} ({e})") from e
        return cls._from_columns(depth, serials, phases, slots, modes)

    @classmethod
    def from_binary(cls, data: bytes) -> "AccessTrace":
        if len(data) < _TRACE_HEADER.itemsize:
            raise MalformedTrace("binary trace shorter than its header")
        header = np.frombuffer(data[:_TRACE_HEADER.itemsize], dtype=_TRACE_HEADER)[0]
        if bytes(header["magic"]) != TRACE_MAGIC:
            raise MalformedTrace("bad binary trace magic")
        body = data[_TRACE_HEADER.itemsize:]
        if len(body) % _TRACE_RECORD.itemsize:
            raise MalformedTrace("truncated binary trace record")
        records = np.frombuffer(body, dtype=_TRACE_RECORD)
        slots = (np.int64(1) << records["length"].astype(np.int64)) | records["bits"].astype(np.int64)
        return cls._from_columns(int(header["depth"]), records["op_serial"], records["phase"], slots, records["mode"])

    @classmethod
    def load(cls, path: Union[str, Path]) -> "AccessTrace":
        path = Path(path)
        data = path.read_bytes()
        if data.startswith(TRACE_MAGIC):
            return cls.from_binary(data)
        return cls.read_text(io.StringIO(data.decode("utf-8")))


class Tree:
    """Full binary tree of depth `depth`; buckets stored by heap index."""

    def __init__(self, depth: int, bucket_capacity: int, leaf_capacity: int, alpha: int):
        self.depth = depth
        self.leaf_count = 1 << depth
        self.bucket_capacity = bucket_capacity
        self.leaf_capacity = leaf_capacity
        self.alpha = alpha
        self._buckets: List[Optional[Bucket]] = [None] * (2 << depth)

    def capacity_of(self, v: NodeId) -> int:
        return self.leaf_capacity if len(v) == self.depth else self.bucket_capacity

    def _slot(self, v: NodeId) -> int:
        if len(v) > self.depth or (v and v.strip("01")):
            raise InvalidNode(f"node {v!r} is not in a tree of depth {self.depth}")
        return node_slot(v)

    def peek(self, v: NodeId) -> Bucket:
        """Bucket at `v` without a physical access (cache-side instrumentation only)."""
        bucket = self._buckets[self._slot(v)]
        return bucket if bucket is not None else Bucket(self.capacity_of(v))

    def nodes(self) -> Iterator[NodeId]:
        for slot in range(1, len(self._buckets)):
            yield node_from_slot(slot)

    def level_nodes(self, level: int) -> Iterator[NodeId]:
        for bits in range(1 << level):
            yield format(bits, f"0{level}b") if level else ""

    def occupied(self) -> Iterator[tuple]:
        for slot, bucket in enumerate(self._buckets):
            if bucket is not None and bucket.blocks:
                yield node_from_slot(slot), bucket


def build_tree(n: int, config: OramConfig) -> Tree:
    level_config = config.for_memory(n) if config.n != n else config
    level_config.check()
    depth = level_config.depth
    logger.debug(
        f"Building tree for n={n}: L={level_config.leaf_count}, d={depth}, "
        f"ell={level_config.bucket_capacity}, ell'={level_config.leaf_capacity}"
    )
    return Tree(depth, level_config.bucket_capacity, level_config.leaf_capacity, level_config.alpha)


def read_node(t: Tree, v: NodeId, trace: AccessTrace) -> Bucket:
    slot = t._slot(v)
    trace.append(v, "read")
    bucket = t._buckets[slot]
    return bucket.copy() if bucket is not None else Bucket(t.capacity_of(v))


def write_node(t: Tree, v: NodeId, b: Bucket, trace: AccessTrace) -> None:
    slot = t._slot(v)
    capacity = t.capacity_of(v)
    if len(b.blocks) > capacity:
        raise CapacityExceeded(f"bucket at {v or 'root'} holds {len(b.blocks)} blocks, capacity {capacity}")
    indices = {block.index for block in b.blocks}
    if len(indices) != len(b.blocks):
        raise CapacityExceeded(f"bucket at {v or 'root'} holds two blocks with the same index")
    trace.append(v, "write")
    t._buckets[slot] = Bucket(capacity, list(b.blocks))


def path_to_leaf(t: Tree, leaf: int) -> List[NodeId]:
    if not 0 <= leaf < t.leaf_count:
        raise InvalidNode(f"leaf {leaf} out of range [0, {t.leaf_count})")
    bits = leaf_node(leaf, t.depth)
    return [bits[:i] for i in range(t.depth + 1)]


# --- state snapshots ---

def _slot_dtype(alpha: int) -> np.dtype:
    return np.dtype([("index", "<i8"), ("position", "<i8"), ("payload", "<i8", (alpha,))])


def save_snapshot(t: Tree, path: Union[str, Path]) -> Path:
    """Every node is written with all its slots, so record sizes depend only on the level."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.zeros(1, dtype=_SNAPSHOT_HEADER)
    header["magic"], header["version"], header["depth"] = SNAPSHOT_MAGIC, SNAPSHOT_VERSION, t.depth
    header["alpha"], header["ell"], header["ell_leaf"] = t.alpha, t.bucket_capacity, t.leaf_capacity
    slot_type = _slot_dtype(t.alpha)
    chunks = [header.tobytes()]
    for v in t.nodes():
        records = np.zeros(t.capacity_of(v), dtype=slot_type)
        records["index"] = -1
        for j, block in enumerate(t.peek(v).blocks):
            records[j] = (block.index, block.position, block.payload)
        chunks.append(records.tobytes())
    path.write_bytes(b"".join(chunks))
    return path


def load_snapshot(path: Union[str, Path]) -> Tree:
    data = Path(path).read_bytes()
    header = np.frombuffer(data[:_SNAPSHOT_HEADER.itemsize], dtype=_SNAPSHOT_HEADER)[0]
    if bytes(header["magic"]) != SNAPSHOT_MAGIC or int(header["version"]) != SNAPSHOT_VERSION:
        raise MalformedTrace(f"{path} is not a version {SNAPSHOT_VERSION} tree snapshot")
    t = Tree(int(header["depth"]), int(header["ell"]), int(header["ell_leaf"]), int(header["alpha"]))
    slot_type = _slot_dtype(t.alpha)
    offset = _SNAPSHOT_HEADER.itemsize
    for v in t.nodes():
        capacity = t.capacity_of(v)
        size = capacity * slot_type.itemsize
        records = np.frombuffer(data[offset:offset + size], dtype=slot_type)
        if len(records) != capacity:
            raise MalformedTrace(f"{path} is truncated at node {v or 'root'}")
        offset += size
        blocks = [
            Block(int(r["index"]), int(r["position"]), [int(w) for w in r["payload"]])
            for r in records if r["index"] >= 0
        ]
        if blocks:
            t._buckets[node_slot(v)] = Bucket(capacity, blocks)
    return t
