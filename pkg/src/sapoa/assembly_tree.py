"""Binary assembly tree built by recursive balanced bisection of the targets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .world import Cell, sorted_cells


@dataclass(eq=False)
class AssemblyNode:
    targets: frozenset
    level: int = 0
    id: int = 0
    axis: Optional[str] = None  # axis of the cut that splits this node
    l_child: Optional["AssemblyNode"] = None
    r_child: Optional["AssemblyNode"] = None
    parent: Optional["AssemblyNode"] = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return self.l_child is None

    @property
    def children(self) -> tuple:
        return () if self.is_leaf else (self.l_child, self.r_child)

    def walk(self) -> Iterator["AssemblyNode"]:
        """Preorder traversal."""
        yield self
        for c in self.children:
            yield from c.walk()

    def nodes_at(self, level: int) -> list["AssemblyNode"]:
        return [n for n in self.walk() if n.level == level]

    @property
    def depth(self) -> int:
        """Number of levels that contain internal nodes."""
        return max((n.level + 1 for n in self.walk() if not n.is_leaf), default=0)

    def leaves(self) -> list["AssemblyNode"]:
        return [n for n in self.walk() if n.is_leaf]

    def find(self, node_id: int) -> "AssemblyNode":
        for n in self.walk():
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def partner(self) -> Optional["AssemblyNode"]:
        if self.parent is None:
            return None
        p = self.parent
        return p.r_child if p.l_child is self else p.l_child


def _cuts(S: Iterable[Cell]) -> Iterator[tuple[str, int, frozenset, frozenset]]:
    """Threshold cuts in tie-break order: x before y, ascending threshold."""
    S = frozenset(S)
    for axis, k in (("x", 0), ("y", 1)):
        values = sorted({c[k] for c in S})
        for thr in values[1:]:
            low = frozenset(c for c in S if c[k] < thr)
            yield axis, thr, low, S - low


def all_divisions(S: Iterable[Cell]) -> list[tuple[frozenset, frozenset]]:
    """Every axis-aligned threshold partition of ``S`` with both sides nonempty."""
    S = frozenset(S)
    if len(S) < 2:
        raise ValueError("need at least two targets to divide")
    out, seen = [], set()
    for _axis, _thr, low, high in _cuts(S):
        if (low, high) not in seen:
            seen.add((low, high))
            out.append((low, high))
    return out


def division_score(s1, s2) -> int:
    return len(s1) * len(s2)


def _best_cut(S: frozenset) -> tuple[str, int, frozenset, frozenset]:
    if len(S) < 2:
        raise ValueError("need at least two targets to divide")
    best = None
    for cut in _cuts(S):
        if best is None or division_score(cut[2], cut[3]) > division_score(best[2], best[3]):
            best = cut
    return best


def best_division(S: Iterable[Cell]) -> tuple[frozenset, frozenset]:
    """Most balanced division: maximises ``|S1| * |S2|``."""
    _axis, _thr, low, high = _best_cut(frozenset(S))
    return low, high


def build_tree(S: Iterable[Cell]) -> AssemblyNode:
    S = frozenset(S)
    if not S:
        raise ValueError("cannot build a tree over an empty target set")
    root = AssemblyNode(S)
    stack = [root]
    while stack:
        node = stack.pop()
        if len(node.targets) == 1:
            continue
        axis, _thr, low, high = _best_cut(node.targets)
        node.axis = axis
        node.l_child = AssemblyNode(low, node.level + 1, parent=node)
        node.r_child = AssemblyNode(high, node.level + 1, parent=node)
        stack.extend((node.r_child, node.l_child))
    for i, n in enumerate(root.walk()):
        n.id = i
    return root


def tree_to_json(node: AssemblyNode) -> dict:
    out = {"id": node.id, "level": node.level,
           "targets": [list(c) for c in sorted_cells(node.targets)]}
    if not node.is_leaf:
        out["axis"] = node.axis
        out["children"] = [tree_to_json(c) for c in node.children]
    return out


def tree_from_json(data: dict, parent: Optional[AssemblyNode] = None) -> AssemblyNode:
    node = AssemblyNode(frozenset(tuple(c) for c in data["targets"]), data["level"],
                        data["id"], data.get("axis"), parent=parent)
    kids = data.get("children") or []
    if kids:
        node.l_child = tree_from_json(kids[0], node)
        node.r_child = tree_from_json(kids[1], node)
    return node
