"""Pure numpy implementations of the compiled kernels.

Same signatures and bit-identical results as ``gwperc._kernels``.  Cluster
runs are vectorised across the whole batch one level at a time; the IIC
sampler processes samples one by one.
"""

from __future__ import annotations

import numpy as np

from . import rng
from .offspring import inverse_from_table

IMPLEMENTATION = "numpy"

_U = np.uint64


def _draw(kind, table, alpha, h1, h2):
    u = rng.unit_open_right_np(rng.offspring_bits_np(h1, h2))
    return inverse_from_table(kind, table, alpha, u)


def _children(h1, h2, x):
    """Child keys for parents with x children each, in parent order."""
    parent = np.repeat(np.arange(len(x)), x)
    starts = np.cumsum(x) - x
    idx = np.arange(parent.size, dtype=np.int64) - np.repeat(starts, x)
    a, b = rng.child_key_np(h1[parent], h2[parent], idx)
    return parent, a, b


def cluster_batch(kind, table, alpha, p, annealed, root_h1, root_h2, master_seed,
                  run_start, n_runs, n_max, level_col, n_levels, connector_level,
                  node_cap):
    level_col = np.asarray(level_col)
    counts = np.zeros((n_runs, n_levels), dtype=np.int64)
    depth = np.full(n_runs, n_max, dtype=np.int64)
    conn = np.zeros(n_runs, dtype=np.int64)
    idx = np.arange(run_start, run_start + n_runs, dtype=np.int64)
    rkeys = rng.run_keys_np(master_seed, idx, rng.TAG_PERC)
    if annealed:
        ts = rng.run_keys_np(master_seed, idx, rng.TAG_ANNEAL)
        with np.errstate(over="ignore"):
            h1 = rng.mix64_np(ts ^ _U(rng.TAG_TREE1))
            h2 = rng.mix64_np(ts + _U(rng.TAG_TREE2))
    else:
        h1 = np.full(n_runs, root_h1, dtype=np.uint64)
        h2 = np.full(n_runs, root_h2, dtype=np.uint64)
    run = np.arange(n_runs, dtype=np.int64)
    aux = np.zeros(n_runs, dtype=np.int64)
    visited = np.ones(n_runs, dtype=np.int64)
    if level_col[0] >= 0:
        counts[:, level_col[0]] = 1
    for lev in range(n_max):
        if run.size == 0:
            break
        x = _draw(kind, table, alpha, h1, h2)
        visited += np.bincount(run, weights=x, minlength=n_runs).astype(np.int64)
        parent, a, b = _children(h1, h2, x)
        keep = rng.edge_open_np(rkeys[run[parent]], a, b, p)
        parent = parent[keep]
        alive_before = np.unique(run)
        run, h1, h2, aux = run[parent], a[keep], b[keep], aux[parent]
        aborted = alive_before[visited[alive_before] > node_cap]
        if aborted.size:
            depth[aborted] = -1
            ok = ~np.isin(run, aborted)
            run, h1, h2, aux = run[ok], h1[ok], h2[ok], aux[ok]
        died = np.setdiff1d(alive_before, np.union1d(np.unique(run), aborted))
        depth[died] = lev
        if lev + 1 == connector_level and run.size:
            first = np.searchsorted(run, run)
            aux = np.arange(run.size, dtype=np.int64) - first
        if level_col[lev + 1] >= 0 and run.size:
            counts[:, level_col[lev + 1]] = np.bincount(run, minlength=n_runs)
    if connector_level >= 0 and run.size:
        new_group = np.ones(run.size, dtype=bool)
        new_group[1:] = (run[1:] != run[:-1]) | (aux[1:] != aux[:-1])
        conn[:] = np.bincount(run, weights=new_group, minlength=n_runs).astype(np.int64)
    return counts, depth, conn


def subtree_counts(kind, table, alpha, h1, h2, depth, budget):
    out = np.zeros(depth + 1, dtype=np.int64)
    out[0] = 1
    a = np.array([h1], dtype=np.uint64)
    b = np.array([h2], dtype=np.uint64)
    visited = 1
    for lev in range(depth):
        x = _draw(kind, table, alpha, a, b)
        total = int(x.sum())
        visited += total
        out[lev + 1] = total
        if visited > budget:
            return None
        if lev + 1 < depth:
            _, a, b = _children(a, b, x)
    return out


# ---- IIC ---------------------------------------------------------------------

def _expand(kind, table, alpha, level):
    h1, h2, _ = level
    x = _draw(kind, table, alpha, h1, h2)
    parent, a, b = _children(h1, h2, x)
    return a, b, parent


def _root_window(kind, table, alpha, h1, h2, m_w):
    levels = [(np.array([h1], dtype=np.uint64), np.array([h2], dtype=np.uint64),
               np.array([-1], dtype=np.int64))]
    for _ in range(m_w + 1):
        levels.append(_expand(kind, table, alpha, levels[-1]))
    return levels


def _descend(kind, table, alpha, levels, child):
    l1 = levels[1]
    new = [(l1[0][child:child + 1], l1[1][child:child + 1], np.array([-1], dtype=np.int64))]
    keep_prev = np.zeros(len(l1[0]), dtype=bool)
    keep_prev[child] = True
    for j in range(2, len(levels)):
        h1, h2, par = levels[j]
        keep = keep_prev[par]
        rank = np.cumsum(keep_prev) - 1
        new.append((h1[keep], h2[keep], rank[par[keep]]))
        keep_prev = keep
    new.append(_expand(kind, table, alpha, new[-1]))
    return new


def _cluster_count(kind, table, alpha, p, skey, h1, h2, depth, node_cap):
    a = np.array([h1], dtype=np.uint64)
    b = np.array([h2], dtype=np.uint64)
    visited = 1
    for _ in range(depth):
        x = _draw(kind, table, alpha, a, b)
        visited += int(x.sum())
        _, a, b = _children(a, b, x)
        keep = rng.edge_open_np(np.full(a.size, skey, dtype=np.uint64), a, b, p)
        a, b = a[keep], b[keep]
        if visited > node_cap:
            return -1
        if a.size == 0:
            return 0
    return int(a.size)


def iic_batch(kind, table, alpha, p, root_h1, root_h2, master_seed, sample_start,
              n_samples, n, m_w, node_cap, record_spines):
    counts = np.zeros(n_samples, dtype=np.int64)
    aborted = np.zeros(n_samples, dtype=bool)
    spines = np.zeros((n_samples, max(n, 1)), dtype=np.intc) if record_spines else None
    if n_samples == 0:
        return counts, aborted, spines
    root = _root_window(kind, table, alpha, root_h1, root_h2, m_w)
    for s in range(n_samples):
        skey = rng.run_key(master_seed, sample_start + s, rng.TAG_IIC)
        levels = root
        total_count = 0
        for k in range(n):
            l1h1, l1h2, _ = levels[1]
            anc = np.arange(len(l1h1))
            for j in range(2, len(levels)):
                anc = anc[levels[j][2]]
            cum = np.cumsum(np.bincount(anc, minlength=len(l1h1)))
            target = int(rng.unit_closed_left(rng.spine_bits(skey, k)) * float(cum[-1]))
            i = int(np.searchsorted(cum, target, side="right"))
            if record_spines:
                spines[s, k] = i
            for j in range(len(l1h1)):
                if j == i:
                    continue
                c1, c2 = int(l1h1[j]), int(l1h2[j])
                if rng.edge_open(skey, c1, c2, p):
                    got = _cluster_count(kind, table, alpha, p, skey, c1, c2,
                                         n - k - 1, node_cap)
                    if got < 0:
                        aborted[s] = True
                    else:
                        total_count += got
            levels = _descend(kind, table, alpha, levels, i)
        counts[s] = total_count + 1
    return counts, aborted, spines
