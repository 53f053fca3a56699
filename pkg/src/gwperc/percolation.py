"""Critical Bernoulli edge percolation on the tree, one run or whole batches.

Edge ``(v -> w)`` is open in run ``r`` iff a hash of
``(run_key(master_seed, r), key(w))`` falls below ``p_c``.  A run is
therefore reproducible in isolation, and the batch kernels, the
single-run path below and the numpy fallback all agree exactly.

Annealed runs use a fresh tree per run, seeded from ``(master_seed, r)``,
which is the same thing as percolating an independent GW tree each time.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels, rng
from .errors import InvalidLevels, RunAborted
from .offspring import OffspringSpec, constants, sampler_table
from .tree_store import NodeRef, TreeStore

NODE_CAP = 10**7
CHUNK = 1 << 16


@dataclass
class ClusterTrace:
    """Per-level root-cluster sizes Y_0..Y_{n_max} of a single run."""

    n_max: int
    counts: np.ndarray
    level_sets: dict[int, list[NodeRef]] = field(default_factory=dict)

    @property
    def survival(self) -> bool:
        return bool(self.counts[self.n_max] > 0)


def run_cluster(store: TreeStore, n_max: int, run_index: int, master_seed: int,
                level_sets: Iterable[int] = (), node_cap: int = NODE_CAP) -> ClusterTrace:
    """One quenched percolation run, exploring only the cluster and its boundary."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    wanted = set(level_sets)
    rkey = rng.run_key(master_seed, run_index)
    p = store.constants.p_c
    counts = np.zeros(n_max + 1, dtype=np.int64)
    counts[0] = 1
    h1, h2 = store.root_key
    frontier = [((), h1, h2)]
    sets: dict[int, list[NodeRef]] = {}
    if 0 in wanted:
        sets[0] = [NodeRef()]
    visited = 1
    for lev in range(n_max):
        nxt = []
        for path, a, b in frontier:
            x = store._cached(path, a, b)
            visited += x
            for i in range(x):
                c1, c2 = rng.child_key(a, b, i)
                if rng.edge_open(rkey, c1, c2, p):
                    nxt.append((path + (i,), c1, c2))
        if visited > node_cap:
            raise RunAborted(f"run {run_index} visited more than {node_cap} nodes")
        frontier = nxt
        counts[lev + 1] = len(frontier)
        if lev + 1 in wanted:
            sets[lev + 1] = [NodeRef(f[0]) for f in frontier]
        if not frontier:
            break
    return ClusterTrace(n_max, counts, sets)


def run_annealed(spec: OffspringSpec, n_max: int, run_index: int, master_seed: int,
                 level_sets: Iterable[int] = (), node_cap: int = NODE_CAP) -> ClusterTrace:
    """One run on a tree drawn afresh for this run index."""
    store = TreeStore(spec, rng.annealed_tree_seed(master_seed, run_index))
    return run_cluster(store, n_max, run_index, master_seed, level_sets, node_cap)


@dataclass
class BatchResult:
    """Results of runs ``run_start .. run_start + n - 1``.

    ``depth[r]`` is the deepest level with a nonzero cluster (``-1`` for an
    aborted run), so survival to any level ``k <= n_max`` is ``depth >= k``.
    ``counts[:, j]`` is Y at ``levels[j]``.
    """

    mode: str
    n_max: int
    levels: tuple[int, ...]
    run_start: int
    counts: np.ndarray
    depth: np.ndarray
    connectors: np.ndarray | None = None
    connector_level: int | None = None

    @property
    def n_runs(self) -> int:
        return len(self.depth)

    @property
    def aborted(self) -> np.ndarray:
        return self.depth < 0

    @property
    def run_indices(self) -> np.ndarray:
        return np.arange(self.run_start, self.run_start + self.n_runs, dtype=np.int64)

    def column(self, level: int) -> np.ndarray:
        try:
            return self.counts[:, self.levels.index(level)]
        except ValueError:
            raise InvalidLevels(f"level {level} was not recorded") from None

    def survived(self, level: int) -> np.ndarray:
        if level > self.n_max:
            raise InvalidLevels(f"level {level} beyond n_max={self.n_max}")
        return self.depth >= level

    @classmethod
    def concat(cls, parts: Sequence["BatchResult"]) -> "BatchResult":
        parts = sorted(parts, key=lambda b: b.run_start)
        first = parts[0]
        for a, b in zip(parts, parts[1:]):
            if a.run_start + a.n_runs != b.run_start:
                raise ValueError("batches are not contiguous")
        conn = None
        if first.connectors is not None:
            conn = np.concatenate([b.connectors for b in parts])
        return cls(first.mode, first.n_max, first.levels, first.run_start,
                   np.concatenate([b.counts for b in parts]),
                   np.concatenate([b.depth for b in parts]), conn, first.connector_level)


def _source(source):
    if isinstance(source, TreeStore):
        return "quenched", source.spec, source.root_key
    if isinstance(source, OffspringSpec):
        return "annealed", source, (0, 0)
    raise TypeError("source must be a TreeStore (quenched) or OffspringSpec (annealed)")


def _one_chunk(source, n_max, levels, master_seed, start, count, connector_level, node_cap):
    mode, spec, (h1, h2) = _source(source)
    kind, table, alpha = sampler_table(spec)
    col = np.full(n_max + 1, -1, dtype=np.int64)
    for j, lev in enumerate(levels):
        col[lev] = j
    counts, depth, conn = kernels.cluster_batch(
        kind, table, alpha, constants(spec).p_c, mode == "annealed", h1, h2,
        master_seed & rng.MASK64, start, count, n_max, col, len(levels),
        -1 if connector_level is None else connector_level, node_cap)
    return BatchResult(mode, n_max, tuple(levels), start, counts, depth,
                       conn if connector_level is not None else None, connector_level)


def iter_batches(source, n_max: int, runs: int, master_seed: int, *,
                 levels: Sequence[int] = (), run_start: int = 0, chunk: int = CHUNK,
                 connector_level: int | None = None, node_cap: int = NODE_CAP,
                 threads: int = 1) -> Iterator[BatchResult]:
    """Yield consecutive chunks in run-index order.

    ``source`` is a :class:`TreeStore` for quenched runs or an
    :class:`OffspringSpec` for annealed runs.  ``threads`` only changes
    throughput; the chunks are identical for any value.
    """
    levels = sorted(set(int(x) for x in levels))
    if n_max < 0 or any(not 0 <= lev <= n_max for lev in levels):
        raise InvalidLevels("levels must lie in [0, n_max]")
    if connector_level is not None and not 0 <= connector_level <= n_max:
        raise InvalidLevels("connector level must lie in [0, n_max]")
    starts = list(range(run_start, run_start + runs, chunk))
    args = [(s, min(chunk, run_start + runs - s)) for s in starts]

    def job(a):
        return _one_chunk(source, n_max, levels, master_seed, a[0], a[1],
                          connector_level, node_cap)

    if threads <= 1:
        for a in args:
            yield job(a)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(job, args)


def run_batch(source, n_max: int, runs: int, master_seed: int, **kw) -> BatchResult:
    parts = list(iter_batches(source, n_max, runs, master_seed, **kw))
    if not parts:
        return _one_chunk(source, n_max, sorted(set(kw.get("levels", ()))), master_seed,
                          kw.get("run_start", 0), 0, kw.get("connector_level"),
                          kw.get("node_cap", NODE_CAP))
    return BatchResult.concat(parts)


# ---- single-connector diagnostic ---------------------------------------------

def connector_level_for(n: int, alpha: float, mu: float) -> int:
    """m = floor((1 + eps) log n / ((alpha - 1) log mu)) with eps = (alpha - 1) / 2."""
    eps = (alpha - 1.0) / 2.0
    return int(math.floor((1.0 + eps) / ((alpha - 1.0) * math.log(mu)) * math.log(n)))


def subsequence_scales(alpha: float, mu: float, ks: Iterable[int]) -> list[tuple[int, int, int]]:
    """(k, n_k, m_k) with n_k = ceil(k**A), A = (sqrt(alpha) + 1) / (sqrt(alpha) - 1)."""
    a = (math.sqrt(alpha) + 1.0) / (math.sqrt(alpha) - 1.0)
    out = []
    for k in ks:
        n_k = max(1, math.ceil(k ** a))
        out.append((k, n_k, connector_level_for(n_k, alpha, mu) if n_k > 1 else 0))
    return out


@dataclass
class ConnectorStats:
    n: int
    m: int
    n_runs: int
    n_survived: int
    histogram: dict[int, int]   # connectors -> number of surviving runs

    @property
    def prob_zero(self) -> float:
        """Unconditional fraction of runs with no connector (Y_n = 0)."""
        return 1.0 - self.n_survived / self.n_runs if self.n_runs else float("nan")

    @property
    def prob_one(self) -> float:
        return self.histogram.get(1, 0) / self.n_survived if self.n_survived else float("nan")

    @property
    def prob_two_plus(self) -> float:
        if not self.n_survived:
            return float("nan")
        return sum(v for k, v in self.histogram.items() if k >= 2) / self.n_survived

    def as_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "n_runs": self.n_runs, "n_survived": self.n_survived,
                "prob_zero": self.prob_zero, "prob_one": self.prob_one,
                "prob_two_plus": self.prob_two_plus,
                "histogram": {str(k): v for k, v in sorted(self.histogram.items())}}


def connector_diagnostic(source, n: int, m: int, runs: int, master_seed: int, *,
                         min_survivors: int | None = None, chunk: int = CHUNK,
                         threads: int = 1, max_runs: int = 10**9) -> ConnectorStats:
    """Count level-m cluster vertices with an open path down to level n.

    Runs ``runs`` percolation runs, or keeps going in chunks until
    ``min_survivors`` runs reach level ``n`` when that is given.
    """
    if not 0 <= m <= n:
        raise InvalidLevels(f"need 0 <= m <= n, got m={m}, n={n}")
    hist: dict[int, int] = {}
    done = survived = 0
    start = 0
    while True:
        todo = runs - done if min_survivors is None else chunk * max(1, threads)
        if todo <= 0:
            break
        for b in iter_batches(source, n, todo, master_seed, run_start=start, chunk=chunk,
                              connector_level=m, threads=threads):
            ok = b.depth >= n
            if np.any(b.aborted):
                raise RunAborted(f"{int(b.aborted.sum())} runs aborted")
            vals, cnt = np.unique(b.connectors[ok], return_counts=True)
            for v, c in zip(vals.tolist(), cnt.tolist()):
                hist[v] = hist.get(v, 0) + c
            survived += int(ok.sum())
            done += b.n_runs
        start += todo
        if min_survivors is None or survived >= min_survivors or done >= max_runs:
            break
    return ConnectorStats(n, m, done, survived, hist)


def connector_oracle_annealed(spec: OffspringSpec, n: int, m: int) -> dict:
    """Exact annealed connector law from the thinned offspring generating function.

    With f(s) = sum_k p_k (1 - p + p s)**k, q_j = 1 - f_j(0) and K the number
    of level-m connectors, E[s**K] = f_m(1 - q + q s) for q = q_{n-m}.  So
    P(K >= 1) = q_n and P(K = 1) = f_m'(1 - q) q.
    """
    if spec.kind != "explicit":
        raise NotImplementedError("oracle needs a finite offspring table")
    if not 0 <= m <= n:
        raise InvalidLevels(f"need 0 <= m <= n, got m={m}, n={n}")
    p = constants(spec).p_c
    ks = np.arange(1, len(spec.pmf) + 1, dtype=np.float64)
    pk = np.asarray(spec.pmf)

    def f(s):
        return float(np.sum(pk * (1 - p + p * s) ** ks))

    def fprime(s):
        return float(np.sum(pk * ks * p * (1 - p + p * s) ** (ks - 1)))

    def iterate(s, j):
        for _ in range(j):
            s = f(s)
        return s

    q_nm = 1.0 - iterate(0.0, n - m)
    q_n = 1.0 - iterate(0.0, n)
    s, d = 1.0 - q_nm, 1.0
    for _ in range(m):
        d *= fprime(s)
        s = f(s)
    one = d * q_nm / q_n
    return {"n": n, "m": m, "prob_survive": q_n, "prob_one": one, "prob_two_plus": 1.0 - one}
