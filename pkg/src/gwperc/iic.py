"""The quenched incipient infinite cluster.

Two halves: exact finite-level evaluation on small weighted trees, and a
spine sampler on a :class:`TreeStore`.  Under the height-n measure the
cluster is drawn by first picking a spine vertex ``v`` at level n with
probability ``p**n w(v) / w(root)``, opening the spine, and then letting
every other edge be open independently with probability ``p``.
Harmonicity ``w(v) = p * sum(w(children))`` makes that a sequential
choice: from spine vertex ``v`` step to child ``c`` with probability
``p w(c) / w(v)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Mapping

import numpy as np

from . import kernels, rng
from .errors import (BudgetExceeded, EnumerationBudget, HeightMismatch, NotSubtree,
                     UnreachableNode)
from .offspring import sampler_table
from .tree_store import NodeRef, TreeStore

ENUMERATION_BUDGET = 10**6
NODE_CAP = 10**7

Path = tuple[int, ...]


# ---- exact measure on finite trees -------------------------------------------

@dataclass(frozen=True)
class WeightedFiniteTree:
    """A finite tree without leaves above its last level, weighted harmonically.

    ``offspring[path]`` is the number of children of every vertex at depth
    below ``height``; vertices at depth ``height`` are the leaves.
    """

    offspring: Mapping[Path, int]
    weights: Mapping[Path, float]
    p: float
    height: int

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        for v in self.vertices():
            if self.weights.get(v, 0.0) <= 0.0:
                raise ValueError(f"weight of {v} must be positive")

    # construction

    @classmethod
    def harmonic(cls, offspring_of: Callable[[Path], int], height: int, p: float,
                 leaf_weight: Callable[[Path], float] | None = None) -> "WeightedFiniteTree":
        """Build the tree from an offspring function and complete weights upward."""
        offspring: dict[Path, int] = {}
        level = [()]
        for _ in range(height):
            nxt = []
            for v in level:
                k = int(offspring_of(v))
                if k < 1:
                    raise ValueError("vertices below the last level need children")
                offspring[v] = k
                nxt.extend(v + (i,) for i in range(k))
            level = nxt
        weights: dict[Path, float] = {v: 1.0 if leaf_weight is None else float(leaf_weight(v))
                                      for v in level}
        for d in range(height - 1, -1, -1):
            for v in [u for u in offspring if len(u) == d]:
                weights[v] = p * math.fsum(weights[v + (i,)] for i in range(offspring[v]))
        return cls(offspring, weights, p, height)

    @classmethod
    def regular(cls, branching: int, height: int, p: float, leaf_weight=None):
        return cls.harmonic(lambda v: branching, height, p, leaf_weight)

    @classmethod
    def random(cls, gen: np.random.Generator, height: int, max_branching: int, p: float):
        """Random shape with branching in 1..max_branching and random leaf weights."""
        return cls.harmonic(lambda v: int(gen.integers(1, max_branching + 1)), height, p,
                            lambda v: float(gen.uniform(0.1, 2.0)))

    @classmethod
    def from_store(cls, store: TreeStore, height: int, horizon: int) -> "WeightedFiniteTree":
        """The top ``height`` levels of ``store`` weighted by W_{horizon - |v|}(v).

        Integer subtree counts at a common depth are exactly harmonic with
        ``p = p_c`` after division by powers of mu.
        """
        if horizon < height:
            raise ValueError("horizon must be >= height")
        mu = store.constants.mu
        leaf = lambda v: store.generation_size(horizon - height, NodeRef(v)) / mu ** (horizon - height)
        return cls.harmonic(lambda v: store.offspring_count(NodeRef(v)), height,
                            store.constants.p_c, leaf)

    # structure

    def vertices(self) -> list[Path]:
        out = [()]
        level = [()]
        for _ in range(self.height):
            level = [v + (i,) for v in level for i in range(self.offspring[v])]
            out.extend(level)
        return out

    def children(self, v: Path) -> list[Path]:
        return [v + (i,) for i in range(self.offspring.get(v, 0))]

    def contains(self, v: Path) -> bool:
        if len(v) > self.height:
            return False
        for d, i in enumerate(v):
            if not 0 <= i < self.offspring[v[:d]]:
                return False
        return True

    def harmonic_defect(self) -> float:
        return max((abs(self.weights[v] - self.p * math.fsum(self.weights[c] for c in self.children(v)))
                    for v in self.offspring), default=0.0)


def _validate(wt: WeightedFiniteTree, t: frozenset, n: int) -> None:
    if () not in t:
        raise NotSubtree("subtree must contain the root")
    for v in t:
        if not wt.contains(v):
            raise NotSubtree(f"vertex {v} is not in the tree")
        if v and v[:-1] not in t:
            raise NotSubtree(f"parent of {v} missing")
    height = max(len(v) for v in t)
    if height != n:
        raise HeightMismatch(f"subtree has height {height}, expected {n}")


def iic_measure_exact(wt: WeightedFiniteTree, t: Iterable[Path], n: int) -> float:
    """mu|_n[t] = sum_{v in t_n} w(v)/w(root) * P(cluster up to level n equals t)."""
    t = frozenset(tuple(v) for v in t)
    if n > wt.height:
        raise HeightMismatch(f"level {n} exceeds tree height {wt.height}")
    _validate(wt, t, n)
    p = wt.p
    closed = 0
    for v in t:
        if len(v) < n:
            closed += sum(1 for c in wt.children(v) if c not in t)
    top = math.fsum(wt.weights[v] for v in t if len(v) == n)
    return top / wt.weights[()] * p ** (len(t) - 1) * (1.0 - p) ** closed


def count_subtrees(wt: WeightedFiniteTree, n: int) -> int:
    """Number of root-containing, parent-closed subsets within levels 0..n."""
    def f(v):
        if len(v) == n:
            return 1
        out = 1
        for c in wt.children(v):
            out *= 1 + f(c)
        return out
    return f(())


def enumerate_subtrees(wt: WeightedFiniteTree, n: int,
                       budget: int = ENUMERATION_BUDGET) -> list[frozenset]:
    """All height-n subtrees containing the root, in a deterministic order."""
    if n > wt.height:
        raise HeightMismatch(f"level {n} exceeds tree height {wt.height}")
    total = count_subtrees(wt, n)
    if total > budget:
        raise EnumerationBudget(f"{total} subtrees exceed budget {budget}")

    def rec(v) -> list[tuple]:
        if len(v) == n:
            return [(v,)]
        options = []
        for c in wt.children(v):
            options.append([()] + rec(c))
        return [(v,) + tuple(x for part in combo for x in part) for combo in product(*options)]

    return [frozenset(s) for s in rec(()) if max(len(v) for v in s) == n]


def restrict(t: Iterable[Path], n: int) -> frozenset:
    return frozenset(v for v in t if len(v) <= n)


def iic_measure_table(wt: WeightedFiniteTree, n: int,
                      budget: int = ENUMERATION_BUDGET) -> dict[frozenset, float]:
    return {t: iic_measure_exact(wt, t, n) for t in enumerate_subtrees(wt, n, budget)}


def normalization_defect(wt: WeightedFiniteTree, n: int,
                         budget: int = ENUMERATION_BUDGET) -> float:
    return abs(math.fsum(iic_measure_table(wt, n, budget).values()) - 1.0)


def iic_consistency_check(wt: WeightedFiniteTree, n: int,
                          budget: int = ENUMERATION_BUDGET) -> float:
    """max_t |sum_{t' : t'|n = t} mu|_{n+1}[t'] - mu|_n[t]| by exhaustive enumeration."""
    if wt.height < n + 1:
        raise HeightMismatch(f"need tree height >= {n + 1}, have {wt.height}")
    lower = iic_measure_table(wt, n, budget)
    sums: dict[frozenset, list[float]] = {}
    for t, val in iic_measure_table(wt, n + 1, budget).items():
        sums.setdefault(restrict(t, n), []).append(val)
    keys = set(lower) | set(sums)
    return max(abs(math.fsum(sums.get(t, [])) - lower.get(t, 0.0)) for t in keys)


def sample_finite(wt: WeightedFiniteTree, n: int, size: int,
                  gen: np.random.Generator) -> list[frozenset]:
    """Spine sampler on a weighted finite tree, vectorised over samples."""
    if n > wt.height:
        raise HeightMismatch(f"level {n} exceeds tree height {wt.height}")
    verts = [v for v in wt.vertices() if len(v) <= n]
    index = {v: j for j, v in enumerate(verts)}
    inside = np.zeros((size, len(verts)), dtype=bool)
    inside[:, 0] = True
    spine = np.zeros(size, dtype=np.int64)  # vertex index of the current spine vertex
    by_level = [[v for v in verts if len(v) == d] for d in range(n + 1)]
    for d in range(n):
        # spine step
        nxt = np.empty(size, dtype=np.int64)
        for v in by_level[d]:
            sel = spine == index[v]
            if not sel.any():
                continue
            kids = wt.children(v)
            w = np.array([wt.weights[c] for c in kids])
            cum = np.cumsum(w / w.sum())
            pick = np.searchsorted(cum, gen.random(int(sel.sum())), side="right")
            nxt[sel] = np.array([index[c] for c in kids])[np.minimum(pick, len(kids) - 1)]
        # open edges below level d
        for v in by_level[d]:
            for c in wt.children(v):
                j = index[c]
                inside[:, j] = inside[:, index[v]] & ((nxt == j) | (gen.random(size) < wt.p))
        spine = nxt
    keys = np.packbits(inside, axis=1, bitorder="little")
    cache: dict[bytes, frozenset] = {}
    out = []
    for row, key in zip(inside, keys):
        kb = key.tobytes()
        if kb not in cache:
            cache[kb] = frozenset(verts[j] for j in np.flatnonzero(row))
        out.append(cache[kb])
    return out


# ---- spine sampler on the quenched tree --------------------------------------

@dataclass(frozen=True)
class IICSample:
    n: int
    spine: tuple[NodeRef, ...]
    cluster_level_count: int
    beta: float

    @property
    def z(self) -> float:
        return self.cluster_level_count / self.n ** self.beta


def spine_kernel(store: TreeStore, v: NodeRef, m_w: int) -> np.ndarray:
    """Probabilities p_c W_m(w) / W_{m+1}(v) over the children of v (renormalised)."""
    counts = np.array([store.generation_size(m_w, c) for c in store.children(v)], dtype=float)
    return counts / counts.sum()


def _check_budget(store: TreeStore, n: int, m_w: int) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if m_w < 0:
        raise ValueError("m_W must be >= 0")
    if (m_w + 1) * math.log(store.constants.mu) > math.log(store.budget):
        raise BudgetExceeded(f"W window of depth {m_w + 1} exceeds budget {store.budget}")


def sample_iic(store: TreeStore, n: int, m_w: int, sample_index: int,
               master_seed: int) -> IICSample:
    """One IIC sample keyed by ``(master_seed, sample_index)``."""
    _check_budget(store, n, m_w)
    kind, table, alpha = sampler_table(store.spec)
    h1, h2 = store.root_key
    counts, aborted, spines = kernels.iic_batch(
        kind, table, alpha, store.constants.p_c, h1, h2, master_seed & rng.MASK64,
        sample_index, 1, n, m_w, NODE_CAP, True)
    if aborted[0]:
        raise BudgetExceeded(f"IIC sample {sample_index} exceeded {NODE_CAP} nodes")
    path = tuple(int(i) for i in spines[0, :n])
    spine = tuple(NodeRef(path[:k]) for k in range(n + 1))
    return IICSample(n, spine, int(counts[0]), store.constants.beta)


@dataclass
class IICBatch:
    n: int
    sample_start: int
    counts: np.ndarray
    aborted: np.ndarray
    beta: float

    @property
    def z(self) -> np.ndarray:
        """Rescaled level counts n^-beta * count over non-aborted samples."""
        return self.counts[~self.aborted] / self.n ** self.beta


def sample_iic_batch(store: TreeStore, n: int, m_w: int, samples: int, master_seed: int,
                     *, sample_start: int = 0, chunk: int = 4096, threads: int = 1) -> IICBatch:
    _check_budget(store, n, m_w)
    kind, table, alpha = sampler_table(store.spec)
    h1, h2 = store.root_key
    p = store.constants.p_c
    starts = list(range(sample_start, sample_start + samples, chunk))

    def job(s):
        k = min(chunk, sample_start + samples - s)
        c, a, _ = kernels.iic_batch(kind, table, alpha, p, h1, h2, master_seed & rng.MASK64,
                                    s, k, n, m_w, NODE_CAP, False)
        return c, a

    if threads <= 1:
        parts = [job(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, starts))
    counts = np.concatenate([c for c, _ in parts]) if parts else np.zeros(0, dtype=np.int64)
    aborted = np.concatenate([a for _, a in parts]) if parts else np.zeros(0, dtype=bool)
    return IICBatch(n, sample_start, counts, aborted, store.constants.beta)


def spine_is_valid(store: TreeStore, sample: IICSample) -> bool:
    try:
        for a, b in zip(sample.spine, sample.spine[1:]):
            if b.parent() != a or b.path[-1] >= store.offspring_count(a):
                return False
    except UnreachableNode:
        return False
    return True
