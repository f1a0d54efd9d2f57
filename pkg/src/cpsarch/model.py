"""In-memory representation of hierarchical block-diagram models.

A model is a flat list of blocks, each naming its containing subsystem via
``parent``, plus a list of port-to-port connections. The top level is a
virtual subsystem identified by :data:`ROOT`; it is not itself a block.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterator

from .errors import InvalidModel, UnknownSubsystem

ROOT = "__root__"
SUBSYSTEM = "SubSystem"


@dataclass(frozen=True)
class Block:
    id: str
    name: str
    block_type: str
    parent: str = ROOT
    params: dict[str, str] = field(default_factory=dict, compare=True)

    @property
    def is_subsystem(self) -> bool:
        return self.block_type == SUBSYSTEM


@dataclass(frozen=True, order=True)
class Connection:
    src_block: str
    src_port: int
    dst_block: str
    dst_port: int


@dataclass(frozen=True)
class Model:
    """Block-diagram model.

    Blocks and connections are stored in canonical order (blocks by id,
    connections lexicographically) so that equality is order-insensitive.
    """

    name: str
    blocks: tuple[Block, ...] = ()
    connections: tuple[Connection, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(sorted(self.blocks, key=lambda b: b.id)))
        object.__setattr__(self, "connections", tuple(sorted(self.connections)))

    def block_map(self) -> dict[str, Block]:
        return {b.id: b for b in self.blocks}


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class SubsystemNode:
    block: str
    depth: int
    children: tuple["SubsystemNode", ...] = ()

    def walk(self) -> Iterator["SubsystemNode"]:
        yield self
        for child in self.children:
            yield from child.walk()


def validate(model: Model) -> list[Violation]:
    """Return every invariant violation found in ``model`` (empty if well-formed)."""
    out: list[Violation] = []
    counts = Counter(b.id for b in model.blocks)
    for bid, n in sorted(counts.items()):
        if bid == ROOT:
            out.append(Violation("reserved id", f"block id {ROOT!r} is reserved for the root"))
        if n > 1:
            out.append(Violation("duplicate id", f"block id {bid!r} used {n} times"))

    blocks = model.block_map()
    for b in model.blocks:
        if b.parent == ROOT:
            continue
        parent = blocks.get(b.parent)
        if parent is None:
            out.append(Violation("unknown parent", f"block {b.id!r} has missing parent {b.parent!r}"))
        elif not parent.is_subsystem:
            out.append(
                Violation(
                    "parent not subsystem",
                    f"block {b.id!r} is contained in {b.parent!r} of type {parent.block_type!r}",
                )
            )

    out.extend(_containment_cycles(blocks))

    seen: set[Connection] = set()
    for c in model.connections:
        for end in (c.src_block, c.dst_block):
            if end not in blocks:
                out.append(Violation("dangling endpoint", f"connection {_fmt(c)} references missing block {end!r}"))
        if c.src_port < 0 or c.dst_port < 0:
            out.append(Violation("negative port", f"connection {_fmt(c)} has a negative port index"))
        if c in seen:
            out.append(Violation("duplicate connection", f"connection {_fmt(c)} appears more than once"))
        seen.add(c)
    return out


def _fmt(c: Connection) -> str:
    return f"{c.src_block}:{c.src_port}->{c.dst_block}:{c.dst_port}"


def _containment_cycles(blocks: dict[str, Block]) -> list[Violation]:
    # 0 = unvisited, 1 = on current path, 2 = resolved
    state: dict[str, int] = {}
    out = []
    for start in sorted(blocks):
        path = []
        cur = start
        while cur in blocks and state.get(cur, 0) == 0:
            state[cur] = 1
            path.append(cur)
            cur = blocks[cur].parent
        if cur in blocks and state.get(cur) == 1:
            cycle = path[path.index(cur):]
            out.append(
                Violation("containment not a tree", "subsystem containment cycle: " + " -> ".join(cycle + [cur]))
            )
        for p in path:
            state[p] = 2
    return out


def _children_index(model: Model) -> dict[str, list[Block]]:
    index: dict[str, list[Block]] = defaultdict(list)
    for b in model.blocks:
        index[b.parent].append(b)
    return index


def subsystem_tree(model: Model) -> SubsystemNode:
    """Build the subsystem nesting tree; the virtual root has depth 1."""
    problems = validate(model)
    if problems:
        raise InvalidModel(problems)
    index = _children_index(model)

    def build(bid: str, depth: int) -> SubsystemNode:
        subs = sorted((b for b in index.get(bid, ()) if b.is_subsystem), key=lambda b: b.id)
        return SubsystemNode(bid, depth, tuple(build(s.id, depth + 1) for s in subs))

    return build(ROOT, 1)


def find_node(tree: SubsystemNode, block_id: str) -> SubsystemNode:
    for node in tree.walk():
        if node.block == block_id:
            return node
    raise UnknownSubsystem(block_id)


def blocks_in(model: Model, subtree: SubsystemNode | str) -> list[Block]:
    """Blocks whose containment chain passes through ``subtree``.

    The subsystem block itself is not included; passing the root returns
    every block.
    """
    target = subtree if isinstance(subtree, str) else subtree.block
    blocks = model.block_map()
    if target != ROOT and (target not in blocks or not blocks[target].is_subsystem):
        raise UnknownSubsystem(target)
    if target == ROOT:
        return list(model.blocks)
    out = []
    for b in model.blocks:
        cur = b.parent
        hops = 0
        while cur != ROOT and cur in blocks and hops <= len(blocks):
            if cur == target:
                out.append(b)
                break
            cur = blocks[cur].parent
            hops += 1
    return out


def direct_children(model: Model, subsystem: str = ROOT) -> list[Block]:
    return [b for b in model.blocks if b.parent == subsystem]
