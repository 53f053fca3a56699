import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gwperc import BudgetExceeded, TreeStore, UnreachableNode, make_spec
from gwperc.tree_store import ROOT, NodeRef

_U3 = make_spec({"kind": "explicit", "pmf": {"1": 0.25, "2": 0.5, "3": 0.25}})


def _walk(store, node, depth, order):
    """Offspring counts of every node to ``depth`` in the given child order."""
    out = {node.path: store.offspring_count(node)}
    if depth:
        kids = store.children(node)
        for k in (reversed(kids) if order else kids):
            out |= _walk(store, k, depth - 1, order)
    return out


def test_pure_under_eviction(uniform3):
    big = TreeStore(uniform3, 11)
    tiny = TreeStore(uniform3, 11, cache_bytes=1)
    assert _walk(big, ROOT, 6, False) == _walk(tiny, ROOT, 6, True)
    tiny.clear_cache()
    assert _walk(tiny, ROOT, 4, False) == _walk(big, ROOT, 4, True)


def test_seed_determines_tree(zeta15):
    a = TreeStore(zeta15, 5).level_counts(ROOT, 6)
    b = TreeStore(zeta15, 5).level_counts(ROOT, 6)
    c = TreeStore(zeta15, 6).level_counts(ROOT, 6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_root_counts_chi_square(uniform3):
    counts = np.bincount([TreeStore(uniform3, s).offspring_count() for s in range(6000)],
                         minlength=4)[1:]
    assert stats.chisquare(counts).pvalue > 0.001


def test_level_recursion(mu12):
    store = TreeStore(mu12, 3)
    m = 12
    for node in (ROOT, NodeRef((0,)), NodeRef((0, 0))):
        total = store.level_counts(node, m)
        kids = [store.level_counts(k, m - 1) for k in store.children(node)]
        assert total[0] == 1
        assert np.array_equal(total[1:], np.sum(kids, axis=0))


def test_level_counts_match_walk(uniform3):
    store = TreeStore(uniform3, 8)
    nodes = _walk(store, ROOT, 5, False)
    by_depth = np.bincount([len(p) for p in nodes])
    assert np.array_equal(store.level_counts(ROOT, 5), by_depth)


def test_w_mean_is_one(uniform3):
    # W_10 = |T_10| / mu**10 has mean 1 and variance about sigma2 / (mu**2 - mu)
    w = np.array([TreeStore(uniform3, s).w_estimate(ROOT, 10).value for s in range(3000)])
    assert abs(w.mean() - 1.0) <= 4 * w.std() / np.sqrt(w.size)
    assert w.min() > 0


def test_w_estimate_fields(mu12):
    store = TreeStore(mu12, 1)
    est = store.w_estimate(NodeRef((0,)), 5)
    assert est.count == store.generation_size(5, NodeRef((0,)))
    assert est.value == pytest.approx(est.count / 1.2 ** 5)


def test_unreachable(binary):
    store = TreeStore(binary, 0)
    assert store.offspring_count(NodeRef((1, 0, 1))) == 2
    with pytest.raises(UnreachableNode):
        store.offspring_count(NodeRef((0, 2)))
    with pytest.raises(UnreachableNode):
        store.node_key(NodeRef((-1,)))


def test_budget(binary, uniform3):
    with pytest.raises(BudgetExceeded):
        TreeStore(binary, 0, budget=1000).level_counts(ROOT, 20)
    assert TreeStore(binary, 0, budget=1 << 21).generation_size(20) == 1 << 20
    with pytest.raises(ValueError):
        TreeStore(uniform3, 0).level_counts(ROOT, -1)


def test_node_ref_helpers():
    v = NodeRef((1, 2))
    assert v.depth == 2 and v.parent().path == (1,) and v.child(0).path == (1, 2, 0)
    assert ROOT.is_ancestor_of(v) and not v.is_ancestor_of(ROOT)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 2), max_size=6))
def test_valid_path_keys_stable(seed, path):
    a, b = TreeStore(_U3, seed), TreeStore(_U3, seed, cache_bytes=1)
    try:
        ka = a.node_key(NodeRef(tuple(path)))
    except UnreachableNode:
        with pytest.raises(UnreachableNode):
            b.node_key(NodeRef(tuple(path)))
        return
    assert ka == b.node_key(NodeRef(tuple(path)))
