"""Assemble a d-variate structure from its trivariate structures.

Every branching node is the union of the leaf pairs whose lowest common
ancestor it is. The lca of a pair can be read off each trivariate structure
containing the pair, and pairs with a common lca are linked through a chain
of pairs sharing a leaf, so a union-find over pairs recovers the nodes.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kendall
from .sampler import seed_sequence, make_rng
from .tree import TreeStructure, Violation, fan, lca, validate
from .triad import DEFAULT_BOOTSTRAP, RadialFitError, TripleDecision, triple_test

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.10


class FaultySetError(ValueError):
    def __init__(self, violation: Violation):
        super().__init__(f"trivariate structures do not assemble into a tree: {violation}")
        self.violation = violation


class UnionFind:
    def __init__(self, items=()):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def groups(self) -> list:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


def _leaves_of(ts: dict) -> tuple:
    seen: dict = {}
    for key in ts:
        for lab in key:
            seen.setdefault(lab, None)
    return tuple(seen)


def _check_complete(ts: dict, leaves: tuple) -> dict:
    pos = {l: i for i, l in enumerate(leaves)}
    norm = {tuple(sorted(k, key=pos.__getitem__)): v for k, v in ts.items()}
    missing = [k for k in itertools.combinations(leaves, 3) if k not in norm]
    if missing or len(norm) != len(ts):
        raise ValueError(f"incomplete triple set: {len(missing)} of the triples missing, e.g. {missing[:3]}")
    return norm


def pair_lca_table(ts: dict, leaves=None) -> dict:
    """For each pair, the lca leaf-set in every trivariate tree containing it.

    ``ts`` maps label triples to trivariate :class:`TreeStructure` objects.
    """
    leaves = tuple(leaves) if leaves is not None else _leaves_of(ts)
    ts = _check_complete(ts, leaves)
    pos = {l: i for i, l in enumerate(leaves)}
    table = {}
    for i, j in itertools.combinations(leaves, 2):
        entries = []
        for k in leaves:
            if k in (i, j):
                continue
            key = tuple(sorted((i, j, k), key=pos.__getitem__))
            entries.append(lca(ts[key], (i, j)))
        table[(i, j)] = entries
    return table


def pair_classes(table: dict) -> list:
    """Equivalence classes of pairs whose lca collections share a leaf set."""
    uf = UnionFind(table)
    owner: dict = {}
    for pair, entries in table.items():
        for s in entries:
            if s in owner:
                uf.union(owner[s], pair)
            else:
                owner[s] = pair
    return uf.groups()


def assemble(classes, leaves) -> set:
    """Union of each class, plus root and singletons."""
    nodes = {frozenset(leaves)} | {frozenset([l]) for l in leaves}
    for cls in classes:
        nodes.add(frozenset().union(*(frozenset(p) for p in cls)))
    return nodes


def _assemble_from_triples(ts: dict, leaves):
    leaves = tuple(leaves)
    return assemble(pair_classes(pair_lca_table(ts, leaves)), leaves)


def detect_faulty(ts: dict, leaves=None) -> Violation | None:
    """``None`` if the assembled node family is a valid tree, else the violation."""
    leaves = tuple(leaves) if leaves is not None else _leaves_of(ts)
    return validate(_assemble_from_triples(ts, leaves), leaves)


def recover(ts: dict, leaves=None) -> TreeStructure:
    """The tree whose trivariate structures are ``ts``."""
    leaves = tuple(leaves) if leaves is not None else _leaves_of(ts)
    nodes = _assemble_from_triples(ts, leaves)
    bad = validate(nodes, leaves)
    if bad is not None:
        raise FaultySetError(bad)
    return TreeStructure(leaves, nodes, check=False)


# --- estimation ----------------------------------------------------------------------


@dataclass
class Estimate:
    tree: TreeStructure
    alpha: float  # threshold at which the triple set stopped being faulty
    alpha0: float
    decisions: dict  # triple -> TripleDecision
    faulty_thresholds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        from .tree import tree_to_dict

        return {
            "schema": 1,
            "tree": tree_to_dict(self.tree),
            "alpha0": self.alpha0,
            "chosen_alpha": self.alpha,
            "faulty_thresholds": self.faulty_thresholds,
            "decisions": [d.to_dict() for d in self.decisions.values()],
        }


def decisions_at(decisions: dict, alpha: float) -> dict:
    return {k: d.structure(alpha) for k, d in decisions.items()}


def sweep(decisions: dict, leaves, alpha0: float) -> tuple:
    """Lower the threshold through the observed p-values until the set is not faulty.

    Between consecutive observed p-values the triple set does not change, so
    trying ``alpha0``, each p-value below it (descending), and finally 0 is
    exhaustive. Returns ``(tree, alpha, faulty_thresholds)``.
    """
    leaves = tuple(leaves)
    ps = sorted({d.p_value for d in decisions.values() if d.p_value < alpha0}, reverse=True)
    thresholds = [alpha0] + [p for p in ps if p != alpha0]
    if thresholds[-1] != 0.0:
        thresholds.append(0.0)
    faulty = []
    for a in thresholds:
        ts = decisions_at(decisions, a)
        nodes = _assemble_from_triples(ts, leaves)
        if validate(nodes, leaves) is None:
            return TreeStructure(leaves, nodes, check=False), a, faulty
        faulty.append(a)
    raise AssertionError("a set of fans always assembles")  # pragma: no cover


def _run_triple(args):
    data3, labels, B, ss = args
    rng = make_rng(ss)
    try:
        return triple_test(data3, B, rng, labels=labels)
    except RadialFitError as exc:
        log.warning("triple %s: %s; treated as not rejected", labels, exc)
        from .triad import candidate_structure, test_statistic, triple_distances

        deltas = triple_distances(data3)
        cand, tied = candidate_structure(deltas, labels)
        return TripleDecision(
            triple=tuple(labels),
            distances=tuple(float(d) for d in deltas),
            statistic=test_statistic(deltas),
            p_value=1.0,
            candidate=cand,
            tie_flag=tied,
            bootstrap=B,
            fit_residual=exc.residual,
            error=str(exc),
        )


def test_all_triples(data, labels, B: int, seed, workers: int = 1) -> dict:
    """Run the bootstrap test on every triple of columns.

    Triple number ``t`` (lexicographic order) uses the stream ``(seed, t)``,
    so results do not depend on ``workers``.
    """
    data = np.asarray(data, dtype=float)
    labels = tuple(labels)
    jobs = []
    for t, idx in enumerate(itertools.combinations(range(data.shape[1]), 3)):
        key = tuple(labels[i] for i in idx)
        jobs.append((np.ascontiguousarray(data[:, idx]), key, B, seed_sequence(seed, t)))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_triple, jobs))
    else:
        results = [_run_triple(j) for j in jobs]
    return {r.triple: r for r in results}


test_all_triples.__test__ = False


def estimate_structure(
    data,
    alpha0: float = DEFAULT_ALPHA,
    B: int = DEFAULT_BOOTSTRAP,
    seed=0,
    labels=None,
    workers: int = 1,
) -> Estimate:
    """Estimate the tree of an ``n x d`` data matrix (``d >= 3``, ``n >= 10``)."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be an n x d matrix")
    n, d = data.shape
    if d < 3:
        raise ValueError("need at least three columns")
    if n < 10:
        raise ValueError("need at least ten observations")
    if not 0.0 <= alpha0 <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    labels = tuple(labels) if labels is not None else tuple(f"U{j + 1}" for j in range(d))
    decisions = test_all_triples(data, labels, B, seed, workers)
    tree, alpha, faulty = sweep(decisions, labels, alpha0)
    return Estimate(tree=tree, alpha=alpha, alpha0=alpha0, decisions=decisions, faulty_thresholds=faulty)
