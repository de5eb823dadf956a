"""Rooted tree structures on a finite leaf set.

A structure is a laminar family of leaf subsets containing the root (all
leaves) and every singleton. Nodes are identified by their leaf sets, so two
structures are equal exactly when they have the same leaves and the same
node sets, whatever order the leaves were listed in.
"""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

Node = frozenset
TripleKey = tuple


class TreeError(ValueError):
    """Invalid tree structure or tree operation argument."""


class TreeParseError(TreeError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos


@dataclass(frozen=True)
class Violation:
    """First violated clause of the tree definition."""

    clause: str  # "i" (root), "ii" (singleton), "iii" (laminarity), or "leaves"
    message: str
    nodes: tuple = ()

    def __str__(self):
        return f"clause ({self.clause}): {self.message}"


def validate(nodes: Iterable[Iterable], leaves: Sequence) -> Violation | None:
    """Return ``None`` if ``nodes`` is a rooted tree structure on ``leaves``.

    Otherwise the first violated clause is reported: (i) the root is missing,
    (ii) a singleton is missing, (iii) two nodes overlap without nesting.
    """
    root = frozenset(leaves)
    fam = {frozenset(n) for n in nodes}
    for n in fam:
        if not n:
            return Violation("leaves", "empty node", (n,))
        if not n <= root:
            return Violation("leaves", f"node {sorted(n)} has labels outside the leaf set", (n,))
    if root not in fam:
        return Violation("i", "root node missing", (root,))
    for leaf in leaves:
        if frozenset([leaf]) not in fam:
            return Violation("ii", f"singleton {{{leaf}}} missing", (frozenset([leaf]),))
    ordered = sorted(fam, key=lambda s: (len(s), _order_key(s, leaves)))
    for a, b in itertools.combinations(ordered, 2):
        if a & b and not (a <= b or b <= a):
            return Violation(
                "iii",
                f"nodes {_fmt_set(a, leaves)} and {_fmt_set(b, leaves)} overlap without nesting",
                (a, b),
            )
    return None


def _order_key(s, leaves):
    pos = {l: i for i, l in enumerate(leaves)}
    return sorted(pos[x] for x in s)


def _fmt_set(s, leaves):
    pos = {l: i for i, l in enumerate(leaves)}
    return "{" + ",".join(sorted(s, key=pos.__getitem__)) + "}"


class TreeStructure:
    """Immutable rooted tree structure; see the module docstring."""

    __slots__ = ("leaves", "nodes", "_pos")

    def __init__(self, leaves: Iterable, nodes: Iterable[Iterable], check: bool = True):
        leaves = tuple(leaves)
        if len(set(leaves)) != len(leaves):
            raise TreeError(f"duplicate leaf labels in {leaves!r}")
        fam = frozenset(frozenset(n) for n in nodes)
        if check:
            bad = validate(fam, leaves)
            if bad is not None:
                raise TreeError(str(bad))
        object.__setattr__(self, "leaves", leaves)
        object.__setattr__(self, "nodes", fam)
        object.__setattr__(self, "_pos", {l: i for i, l in enumerate(leaves)})

    def __setattr__(self, name, value):
        raise AttributeError("TreeStructure is immutable")

    def __eq__(self, other):
        if not isinstance(other, TreeStructure):
            return NotImplemented
        return set(self.leaves) == set(other.leaves) and self.nodes == other.nodes

    def __hash__(self):
        return hash((frozenset(self.leaves), self.nodes))

    def __repr__(self):
        return f"TreeStructure({format_tree(self)})"

    @property
    def d(self) -> int:
        return len(self.leaves)

    @property
    def root(self) -> frozenset:
        return frozenset(self.leaves)

    def branching_nodes(self) -> list:
        """Nodes with at least two leaves, root first, then by size and leaf order."""
        nodes = [n for n in self.nodes if len(n) >= 2]
        return sorted(nodes, key=lambda n: (-len(n), self.sort_key(n)))

    def sort_key(self, node) -> tuple:
        return tuple(sorted(self._pos[x] for x in node))

    def children(self, node) -> list:
        node = frozenset(node)
        if node not in self.nodes:
            raise TreeError(f"{sorted(node)} is not a node")
        below = [n for n in self.nodes if n < node]
        kids = [n for n in below if not any(n < m for m in below)]
        return sorted(kids, key=self.sort_key)

    def parent(self, node):
        node = frozenset(node)
        above = [n for n in self.nodes if node < n]
        return min(above, key=len) if above else None

    def is_fan(self) -> bool:
        return all(len(n) == 1 or len(n) == self.d for n in self.nodes)


def fan(leaves: Sequence) -> TreeStructure:
    leaves = tuple(leaves)
    return TreeStructure(leaves, [leaves] + [[l] for l in leaves])


def from_branching(leaves: Sequence, branching: Iterable[Iterable]) -> TreeStructure:
    """Tree from its leaves and branching nodes; root and singletons are added."""
    leaves = tuple(leaves)
    return TreeStructure(leaves, [leaves, *branching, *([l] for l in leaves)])


def lca(tree: TreeStructure, subset: Iterable) -> frozenset:
    """Lowest common ancestor: the intersection of all nodes containing ``subset``."""
    t = frozenset(subset)
    if len(t) < 2:
        raise TreeError("lca needs at least two leaves")
    if not t <= tree.root:
        raise TreeError(f"{sorted(t, key=str)} is not a subset of the leaves")
    # containing nodes form a chain, so their intersection is the smallest one
    return min((n for n in tree.nodes if t <= n), key=len)


def induce(tree: TreeStructure, subset: Iterable) -> TreeStructure:
    """Structure induced on ``subset`` by intersecting every node with it."""
    a = frozenset(subset)
    if not a:
        raise TreeError("cannot induce a tree on an empty set")
    if not a <= tree.root:
        raise TreeError("induced leaf set must be a subset of the leaves")
    leaves = tuple(l for l in tree.leaves if l in a)
    nodes = {n & a for n in tree.nodes} - {frozenset()}
    return TreeStructure(leaves, nodes, check=False)


def triple_key(tree_or_leaves, labels: Iterable) -> TripleKey:
    leaves = tree_or_leaves.leaves if isinstance(tree_or_leaves, TreeStructure) else tuple(tree_or_leaves)
    labels = tuple(labels)
    if len(set(labels)) != 3:
        raise TreeError(f"a triple needs three distinct labels, got {labels!r}")
    pos = {l: i for i, l in enumerate(leaves)}
    return tuple(sorted(labels, key=pos.__getitem__))


def triples(tree: TreeStructure) -> dict:
    """All induced trivariate structures, keyed by leaf-ordered label triples."""
    if tree.d < 3:
        raise TreeError("triples need at least three leaves")
    return {k: induce(tree, k) for k in itertools.combinations(tree.leaves, 3)}


# --- text and JSON formats ---------------------------------------------------


def format_tree(tree: TreeStructure) -> str:
    """Nested-parenthesis form, children ordered by their first leaf."""

    def render(node):
        if len(node) == 1:
            return str(next(iter(node)))
        return "(" + ",".join(render(c) for c in tree.children(node)) + ")"

    if tree.d == 1:
        return str(tree.leaves[0])
    return render(tree.root)


_DELIMS = set("(),")


def parse_tree(text: str) -> TreeStructure:
    """Inverse of :func:`format_tree`; leaves are ordered by first appearance."""
    pos = 0
    n = len(text)
    leaves: list = []
    nodes: list = []

    def skip():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def label():
        nonlocal pos
        start = pos
        while pos < n and text[pos] not in _DELIMS and not text[pos].isspace():
            pos += 1
        if pos == start:
            raise TreeParseError("expected a leaf label or '('", text, pos)
        lab = text[start:pos]
        if lab in leaves:
            raise TreeParseError(f"duplicate leaf {lab!r}", text, start)
        leaves.append(lab)
        nodes.append(frozenset([lab]))
        return frozenset([lab])

    def node():
        nonlocal pos
        skip()
        if pos < n and text[pos] == "(":
            open_at = pos
            pos += 1
            kids = [node()]
            skip()
            while pos < n and text[pos] == ",":
                pos += 1
                kids.append(node())
                skip()
            if pos >= n or text[pos] != ")":
                raise TreeParseError("expected ',' or ')'", text, pos)
            pos += 1
            if len(kids) < 2:
                raise TreeParseError("a branching node needs at least two children", text, open_at)
            s = frozenset().union(*kids)
            nodes.append(s)
            return s
        return label()

    root = node()
    skip()
    if pos != n:
        raise TreeParseError("trailing characters", text, pos)
    if len(root) != len(leaves):
        raise TreeParseError("malformed tree", text, 0)
    return TreeStructure(leaves, nodes)


def tree_to_dict(tree: TreeStructure) -> dict:
    nodes = sorted(tree.nodes, key=lambda s: (-len(s), tree.sort_key(s)))
    return {
        "leaves": list(tree.leaves),
        "nodes": [sorted(s, key=tree._pos.__getitem__) for s in nodes],
        "text": format_tree(tree),
    }


def tree_from_dict(d) -> TreeStructure:
    """Accepts ``{"leaves": [...], "nodes": [[...], ...]}`` or a text-format string."""
    if isinstance(d, str):
        return parse_tree(d)
    if "nodes" in d:
        return TreeStructure(d["leaves"], d["nodes"])
    if "text" in d:
        return parse_tree(d["text"])
    raise TreeError("tree JSON needs 'leaves' and 'nodes'")


def dumps(tree: TreeStructure) -> str:
    return json.dumps(tree_to_dict(tree))


# --- random trees --------------------------------------------------------------


def random_tree(leaves: Sequence, rng: random.Random) -> TreeStructure:
    """Random structure by recursive random partition.

    Each set of two or more leaves becomes a branching node whose number of
    children is uniform on ``2..size``; members are shuffled, one is assigned to
    each block and the rest land in uniformly chosen blocks.
    """
    leaves = tuple(leaves)
    nodes = [frozenset([l]) for l in leaves]

    def split(block):
        nodes.append(frozenset(block))
        if len(block) == 2:
            return
        k = rng.randint(2, len(block))
        items = list(block)
        rng.shuffle(items)
        parts = [[x] for x in items[:k]]
        for x in items[k:]:
            parts[rng.randrange(k)].append(x)
        for p in parts:
            if len(p) >= 2:
                split(p)

    if len(leaves) >= 2:
        split(leaves)
    return TreeStructure(leaves, nodes)
