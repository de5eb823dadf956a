"""Frailty sampling of Archimedean and nested Archimedean copulas.

A generator is the Laplace transform of a positive frailty ``V``; given ``V``
the coordinates ``psi(E_i / V)`` with iid unit exponentials ``E_i`` follow the
copula. Nested copulas are sampled top-down: each child branching node draws
its own frailty conditionally on its parent's.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .generator import Generator, check_nesting, psi
from .tree import TreeStructure, TreeError

MAX_REJECTION_ROUNDS = 10**6
# above this many summands a Joe inner frailty uses its stable limit
_JOE_EXACT_SUM_CAP = 10**4

_TINY = np.finfo(float).tiny
_ONE_MINUS = np.nextafter(1.0, 0.0)


class NestingError(ValueError):
    """Parent and child generators cannot be nested."""


class SamplingError(RuntimeError):
    pass


def make_rng(seed, *key) -> np.random.Generator:
    """Independent, reproducible stream for ``(seed, *key)``.

    ``seed`` may be an int or a ``SeedSequence``; ``key`` extends its spawn key,
    so distinct keys never collide the way ``seed ^ index`` can.
    """
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def seed_sequence(seed, *key) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


# --- primitive laws ------------------------------------------------------------


def positive_stable(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """One-sided stable law with Laplace transform ``exp(-s**alpha)``, ``0 < alpha <= 1``.

    Chambers-Mallows-Stuck in Kanter's form: with ``U ~ U(0, pi)`` and
    ``E ~ Exp(1)``, ``S = (A(U) / E) ** ((1 - alpha) / alpha)`` where
    ``A(u) = (sin(alpha u)**alpha sin((1-alpha) u)**(1-alpha) / sin u) ** (1/(1-alpha))``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"stable index must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return np.ones(size)
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        log_a = (
            alpha * np.log(np.sin(alpha * u))
            + (1.0 - alpha) * np.log(np.sin((1.0 - alpha) * u))
            - np.log(np.sin(u))
        ) / (1.0 - alpha)
        return np.exp((log_a - np.log(e)) * (1.0 - alpha) / alpha)


def sibuya(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Sibuya law with Laplace transform ``1 - (1 - exp(-x))**alpha``.

    Exact inversion of ``P(V > k) = Gamma(k+1-alpha) / (Gamma(1-alpha) Gamma(k+1))``.
    Gautschi's inequality puts ``P(V > k) * Gamma(1-alpha)`` between
    ``(k+1)**-alpha`` and ``k**-alpha``, so the quantile is ``floor(g)`` or
    ``ceil(g)`` with ``g = (u Gamma(1-alpha))**(-1/alpha)``. Values are floats
    because the tail is too heavy for fixed-width integers.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"Sibuya index must lie in (0, 1], got {alpha}")
    shape = (size,) if np.isscalar(size) else tuple(size)
    if alpha == 1.0:
        return np.ones(shape)
    u = 1.0 - rng.uniform(size=shape)  # (0, 1]
    c = gammaln(1.0 - alpha)
    with np.errstate(over="ignore"):
        g = np.exp(-(np.log(u) + c) / alpha)
    k = np.floor(g)
    small = k < 2.0**53
    ks = k[small]
    log_surv = gammaln(ks + 1.0 - alpha) - c - gammaln(ks + 1.0)
    k[small] = np.where(log_surv < np.log(u[small]), ks, ks + 1.0)
    return np.maximum(k, 1.0)


# --- frailties ---------------------------------------------------------------


def sample_frailty(gen: Generator, size, rng: np.random.Generator) -> np.ndarray:
    """Draws of ``V`` whose Laplace transform is the generator."""
    th = gen.theta
    if gen.family == "clayton":
        return rng.gamma(1.0 / th, 1.0, size)
    if gen.family == "gumbel":
        return positive_stable(1.0 / th, size, rng)
    if gen.family == "frank":
        p = -math.expm1(-th)
        if p >= 1.0:
            raise SamplingError(f"Frank theta={th} too large for logarithmic frailty")
        return rng.logseries(p, size).astype(float)
    if gen.family == "joe":
        return sibuya(1.0 / th, size, rng)
    # amh
    return rng.geometric(1.0 - th, size).astype(float)


def _sum_by_count(counts: np.ndarray, draw) -> np.ndarray:
    """Per-row sums of ``counts[i]`` iid draws from ``draw(total)``."""
    counts = counts.astype(np.int64)
    out = np.zeros(counts.shape[0])
    pos = counts > 0
    if not pos.any():
        return out
    vals = draw(int(counts[pos].sum()))
    starts = np.concatenate([[0], np.cumsum(counts[pos])[:-1]])
    out[pos] = np.add.reduceat(vals, starts)
    return out


def _rejection(propose, accept_prob, total: int, rng) -> np.ndarray:
    out = np.empty(total)
    todo = np.arange(total)
    for _ in range(MAX_REJECTION_ROUNDS):
        if todo.size == 0:
            return out
        x = propose(todo.size)
        ok = rng.uniform(size=todo.size) <= accept_prob(x, todo)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    raise SamplingError(f"rejection sampler exceeded {MAX_REJECTION_ROUNDS} rounds")


def _tilted_stable_sum(v0: np.ndarray, alpha: float, rng) -> np.ndarray:
    # Laplace transform exp(-v0 ((1 + x)**alpha - 1)): split v0 into m = ceil(v0)
    # equal shares, each an exponentially tilted stable accepted with prob >= 1/e
    m = np.maximum(np.ceil(v0), 1.0).astype(np.int64)
    share = np.repeat(v0 / m, m)
    scale = share ** (1.0 / alpha)
    out = np.empty(share.size)
    todo = np.arange(share.size)
    for _ in range(MAX_REJECTION_ROUNDS):
        if todo.size == 0:
            break
        y = scale[todo] * positive_stable(alpha, todo.size, rng)
        ok = rng.uniform(size=todo.size) <= np.exp(-y)
        out[todo[ok]] = y[ok]
        todo = todo[~ok]
    else:
        raise SamplingError(f"tilted stable rejection exceeded {MAX_REJECTION_ROUNDS} rounds")
    starts = np.concatenate([[0], np.cumsum(m)[:-1]])
    return np.add.reduceat(out, starts)


def sample_inner_frailty(outer: Generator, inner: Generator, v0, rng: np.random.Generator) -> np.ndarray:
    """Child frailty given parent frailties ``v0``.

    The draw has Laplace transform ``exp(-v0 * psi_outer^{-1}(psi_inner(x)))``.
    """
    if not check_nesting(outer, inner):
        raise NestingError(
            f"cannot nest {inner.family}({inner.theta}) below {outer.family}({outer.theta})"
        )
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    alpha = outer.theta / inner.theta
    fam = outer.family
    if fam == "gumbel":
        return v0 ** (1.0 / alpha) * positive_stable(alpha, v0.shape, rng)
    if fam == "clayton":
        return _tilted_stable_sum(v0, alpha, rng)
    if fam == "amh":
        # sum of v0 geometric(p) variables on {1, 2, ...}
        p = (1.0 - inner.theta) / (1.0 - outer.theta)
        k = v0.astype(np.int64)
        return k + rng.negative_binomial(k, p).astype(float)
    if fam == "frank":
        c1 = -math.expm1(-inner.theta)
        c0 = -math.expm1(-outer.theta)

        def draw(total):
            # Sibuya(alpha) thinned by c1**k; acceptance rate is c0
            return _rejection(
                lambda k: sibuya(alpha, k, rng),
                lambda x, idx: np.exp(x * math.log(c1)),
                total,
                rng,
            )

        if c0 <= 0:
            raise SamplingError("degenerate Frank parameter")
        return _sum_by_count(v0, draw)
    # joe: sum of v0 Sibuya(alpha) variables
    out = np.empty(v0.shape)
    big = v0 > _JOE_EXACT_SUM_CAP
    out[~big] = _sum_by_count(v0[~big], lambda total: sibuya(alpha, total, rng))
    if big.any():
        out[big] = v0[big] ** (1.0 / alpha) * positive_stable(alpha, int(big.sum()), rng)
    return out


def _to_unit(u: np.ndarray) -> np.ndarray:
    return np.clip(u, _TINY, _ONE_MINUS)


def sample_archimedean(gen: Generator, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Marshall-Olkin sampling of the exchangeable copula, ``n x d``."""
    if d < 2 or n < 1:
        raise ValueError("need d >= 2 and n >= 1")
    v = sample_frailty(gen, n, rng)
    e = rng.standard_exponential((n, d))
    return _to_unit(psi(gen, e / v[:, None]))


# --- nested copulas -------------------------------------------------------------


@dataclass(frozen=True)
class NacModel:
    """A tree with one generator per branching node."""

    tree: TreeStructure
    generators: dict  # frozenset node -> Generator

    def __post_init__(self):
        gens = {frozenset(k): v for k, v in self.generators.items()}
        object.__setattr__(self, "generators", gens)
        for node in self.tree.branching_nodes():
            if node not in gens:
                raise TreeError(f"no generator for branching node {sorted(node, key=self.tree.leaves.index)}")
        extra = set(gens) - set(self.tree.branching_nodes())
        if extra:
            raise TreeError(f"generators given for non-branching sets {[sorted(e) for e in extra]}")
        for node in self.tree.branching_nodes():
            parent = self.tree.parent(node)
            if parent is not None and not check_nesting(gens[parent], gens[node]):
                raise NestingError(
                    f"nesting condition fails between {sorted(parent)} "
                    f"({gens[parent].family}, {gens[parent].theta}) and {sorted(node)} "
                    f"({gens[node].family}, {gens[node].theta})"
                )

    @property
    def d(self) -> int:
        return self.tree.d

    @classmethod
    def from_taus(cls, tree: TreeStructure, family: str, taus: dict) -> "NacModel":
        return cls(tree, {frozenset(k): Generator.from_tau(family, t) for k, t in taus.items()})

    def to_dict(self) -> dict:
        from .tree import tree_to_dict

        pos = {l: i for i, l in enumerate(self.tree.leaves)}
        return {
            "tree": tree_to_dict(self.tree),
            "generators": [
                {"node": sorted(node, key=pos.__getitem__), **self.generators[node].to_dict()}
                for node in self.tree.branching_nodes()
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, default_family: str | None = None) -> "NacModel":
        from .tree import tree_from_dict

        tree = tree_from_dict(d["tree"])
        gens = {}
        entries = d["generators"]
        if isinstance(entries, dict):
            # {"<text subtree>": {...}} form
            from .tree import parse_tree

            entries = [{"node": list(parse_tree(k).leaves), **v} for k, v in entries.items()]
        for g in entries:
            spec = dict(g)
            spec.setdefault("family", d.get("family", default_family))
            if spec["family"] is None:
                raise ValueError(f"generator entry without family: {g!r}")
            gens[frozenset(spec["node"])] = Generator.from_dict(spec)
        return cls(tree, gens)


def sample_nac(model: NacModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n x d`` sample, columns in ``model.tree.leaves`` order."""
    if n < 1:
        raise ValueError("n must be positive")
    tree = model.tree
    col = {l: j for j, l in enumerate(tree.leaves)}
    out = np.empty((n, tree.d))
    root = tree.root
    frailty = {root: sample_frailty(model.generators[root], n, rng)}
    for node in tree.branching_nodes():  # parents come before children
        gen = model.generators[node]
        v = frailty[node]
        kids = tree.children(node)
        leaf_cols = [col[next(iter(c))] for c in kids if len(c) == 1]
        if leaf_cols:
            e = rng.standard_exponential((n, len(leaf_cols)))
            out[:, leaf_cols] = psi(gen, e / v[:, None])
        for child in kids:
            if len(child) > 1:
                frailty[child] = sample_inner_frailty(gen, model.generators[child], v, rng)
    return _to_unit(out)
