"""The quenched environment: a lazily evaluated supercritical GW tree.

A node is named by its child-index path from the root.  Its offspring count
is a pure function of ``(tree_seed, path)`` obtained by hashing, so the
tree never has to be stored; the memo below is only a cache.  Distinct
paths collide with probability about 2**-64 per pair of compared lanes,
which is accepted.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import kernels, rng
from .errors import BudgetExceeded, UnreachableNode
from .offspring import OffspringSpec, constants, offspring_scalar, sampler_table

DEFAULT_BUDGET = 10**8
_ENTRY_BYTES = 256


@dataclass(frozen=True, order=True)
class NodeRef:
    path: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.path)

    def child(self, i: int) -> "NodeRef":
        return NodeRef(self.path + (i,))

    def parent(self) -> "NodeRef":
        if not self.path:
            raise ValueError("root has no parent")
        return NodeRef(self.path[:-1])

    def is_ancestor_of(self, other: "NodeRef") -> bool:
        return other.path[: len(self.path)] == self.path


ROOT = NodeRef()


@dataclass(frozen=True)
class WEstimate:
    node: NodeRef
    m: int
    count: int   # |T_m(v)|
    value: float  # count / mu**m


class TreeStore:
    """Seed-deterministic GW tree with an LRU memo of offspring counts."""

    def __init__(self, spec: OffspringSpec, tree_seed: int, *,
                 budget: int = DEFAULT_BUDGET, cache_bytes: int = 64 << 20):
        self.spec = spec
        self.constants = constants(spec)
        self.tree_seed = int(tree_seed) & rng.MASK64
        self.budget = int(budget)
        self.root_key = rng.root_key(self.tree_seed)
        self._memo: OrderedDict[tuple[int, ...], int] = OrderedDict()
        self._memo_max = max(16, cache_bytes // _ENTRY_BYTES)

    def __repr__(self) -> str:
        return f"TreeStore({self.spec.describe()}, tree_seed={self.tree_seed})"

    # -- offspring ---------------------------------------------------------

    def count_from_key(self, h1: int, h2: int) -> int:
        return offspring_scalar(self.spec, rng.unit_open_right(rng.offspring_bits(h1, h2)))

    def _cached(self, path, h1, h2) -> int:
        memo = self._memo
        if path in memo:
            memo.move_to_end(path)
            return memo[path]
        x = self.count_from_key(h1, h2)
        memo[path] = x
        if len(memo) > self._memo_max:
            memo.popitem(last=False)
        return x

    def node_key(self, node: NodeRef) -> tuple[int, int]:
        """Hash key of a reachable node (validates every prefix index)."""
        h1, h2 = self.root_key
        for d, i in enumerate(node.path):
            x = self._cached(node.path[:d], h1, h2)
            if not 0 <= i < x:
                raise UnreachableNode(f"index {i} at depth {d} but only {x} children")
            h1, h2 = rng.child_key(h1, h2, i)
        return h1, h2

    def offspring_count(self, node: NodeRef = ROOT) -> int:
        h1, h2 = self.node_key(node)
        return self._cached(node.path, h1, h2)

    def children(self, node: NodeRef = ROOT) -> list[NodeRef]:
        return [node.child(i) for i in range(self.offspring_count(node))]

    def clear_cache(self) -> None:
        self._memo.clear()

    # -- generation sizes --------------------------------------------------

    def level_counts(self, node: NodeRef, m: int) -> np.ndarray:
        """|T_j(v)| for j = 0..m by breadth-first expansion below ``node``."""
        if m < 0:
            raise ValueError("m must be >= 0")
        mu = self.constants.mu
        if m * math.log(mu) > math.log(self.budget):
            raise BudgetExceeded(f"expected {mu:.3g}**{m} nodes exceeds budget {self.budget}")
        h1, h2 = self.node_key(node)
        kind, table, alpha = sampler_table(self.spec)
        out = kernels.subtree_counts(kind, table, alpha, h1, h2, m, self.budget)
        if out is None:
            raise BudgetExceeded(f"expansion to depth {m} visited more than {self.budget} nodes")
        return out

    def generation_size(self, m: int, node: NodeRef = ROOT) -> int:
        return int(self.level_counts(node, m)[-1])

    def w_estimate(self, node: NodeRef, m: int) -> WEstimate:
        count = self.generation_size(m, node)
        return WEstimate(node, m, count, count / self.constants.mu ** m)
