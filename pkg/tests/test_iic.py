import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gwperc import (BudgetExceeded, EnumerationBudget, HeightMismatch, NotSubtree, TreeStore,
                    WeightedFiniteTree, iic_consistency_check, iic_measure_exact, make_spec,
                    sample_iic, sample_iic_batch)
from gwperc.iic import (IICSample, count_subtrees, enumerate_subtrees, iic_measure_table,
                        normalization_defect, restrict, sample_finite, spine_is_valid,
                        spine_kernel)
from gwperc.properties import fixed_depth2_tree, random_enumerable_tree
from gwperc.tree_store import ROOT, NodeRef


def test_binary_height_one():
    p = 0.3
    wt = WeightedFiniteTree.regular(2, 1, p)
    one = iic_measure_exact(wt, [(), (0,)], 1)
    both = iic_measure_exact(wt, [(), (0,), (1,)], 1)
    # w(child) / w(root) = 1 / (2p)
    assert one == pytest.approx((1 - p) / 2, rel=1e-15)
    assert both == pytest.approx(p, rel=1e-15)
    assert 2 * one + both == pytest.approx(1.0)


def test_height_zero_is_root_only():
    wt = WeightedFiniteTree.regular(3, 2, 0.5)
    assert iic_measure_exact(wt, [()], 0) == 1.0


def test_counts_and_enumeration():
    wt = WeightedFiniteTree.regular(2, 2, 0.5)
    # each child is absent or present with any subset of its two children
    assert count_subtrees(wt, 2) == (1 + 4) ** 2
    subs = enumerate_subtrees(wt, 2)
    assert len(subs) == len(set(subs)) == 25 - 2 ** 2  # drop those stopping at level 1
    assert all(max(len(v) for v in t) == 2 for t in subs)


def test_errors():
    wt = fixed_depth2_tree()
    with pytest.raises(NotSubtree):
        iic_measure_exact(wt, [(0,), (0, 1)], 2)
    with pytest.raises(NotSubtree):
        iic_measure_exact(wt, [(), (0, 1)], 2)
    with pytest.raises(NotSubtree):
        iic_measure_exact(wt, [(), (1,), (1, 2)], 2)
    with pytest.raises(HeightMismatch):
        iic_measure_exact(wt, [(), (0,)], 2)
    with pytest.raises(HeightMismatch):
        iic_measure_exact(wt, [(), (0,)], 3)
    with pytest.raises(HeightMismatch):
        iic_consistency_check(wt, 2)
    with pytest.raises(EnumerationBudget):
        enumerate_subtrees(WeightedFiniteTree.regular(3, 3, 0.4), 3, budget=100)
    with pytest.raises(ValueError):
        WeightedFiniteTree.regular(2, 1, 1.5)
    with pytest.raises(ValueError):
        WeightedFiniteTree.harmonic(lambda v: 0, 2, 0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_consistency_and_normalisation(seed):
    wt = random_enumerable_tree(np.random.default_rng(seed))
    assert wt.harmonic_defect() <= 1e-12
    for n in range(wt.height):
        assert iic_consistency_check(wt, n) <= 1e-12
    for n in range(wt.height + 1):
        assert normalization_defect(wt, n) <= 1e-12


def test_restrict():
    t = frozenset([(), (0,), (0, 1), (0, 1, 0)])
    assert restrict(t, 1) == frozenset([(), (0,)])


def test_finite_sampler_matches_exact():
    wt = fixed_depth2_tree()
    exact = iic_measure_table(wt, 2)
    size = 100000
    got = Counter(sample_finite(wt, 2, size, np.random.default_rng(3)))
    assert set(got) <= set(exact)
    keys = sorted(exact, key=sorted)
    obs = np.array([got.get(t, 0) for t in keys])
    exp = size * np.array([exact[t] for t in keys])
    assert stats.chisquare(obs, exp).pvalue > 0.001


def test_from_store_is_harmonic(uniform3):
    store = TreeStore(uniform3, 2)
    wt = WeightedFiniteTree.from_store(store, 3, 10)
    assert wt.harmonic_defect() <= 1e-12
    assert wt.weights[()] == pytest.approx(store.w_estimate(ROOT, 10).value, rel=1e-12)
    with pytest.raises(ValueError):
        WeightedFiniteTree.from_store(store, 3, 2)


def test_spine_kernel_regular(binary):
    assert np.array_equal(spine_kernel(TreeStore(binary, 0), ROOT, 6), [0.5, 0.5])


def _three_child_store(spec):
    s = 0
    while TreeStore(spec, s).offspring_count() != 3:
        s += 1
    return TreeStore(spec, s)


def test_quenched_level_one_law(uniform3):
    # against the exact finite measure with leaf weights W_{m_w}
    store = _three_child_store(uniform3)
    m_w = 10
    wt = WeightedFiniteTree.from_store(store, 1, m_w + 1)
    exact = np.zeros(4)
    for t, q in iic_measure_table(wt, 1).items():
        exact[len(t) - 1] += q
    size = 40000
    b = sample_iic_batch(store, 1, m_w, size, 21, chunk=10000)
    assert not b.aborted.any()
    obs = np.bincount(b.counts, minlength=4)
    assert obs[0] == 0
    assert stats.chisquare(obs[1:], size * exact[1:]).pvalue > 0.001


def test_quenched_spine_law(uniform3):
    store = _three_child_store(uniform3)
    m_w = 8
    pi = spine_kernel(store, ROOT, m_w)
    size = 3000
    first = np.array([sample_iic(store, 1, m_w, i, 22).spine[1].path[0] for i in range(size)])
    assert stats.chisquare(np.bincount(first, minlength=3), size * pi).pvalue > 0.001


def test_single_and_batch_agree(zeta15):
    store = TreeStore(zeta15, 4)
    b = sample_iic_batch(store, 6, 5, 30, 23, sample_start=10, chunk=7, threads=2)
    for j in range(30):
        s = sample_iic(store, 6, 5, 10 + j, 23)
        assert s.cluster_level_count == b.counts[j]
        assert spine_is_valid(store, s)
        assert len(s.spine) == 7 and s.spine[0] == ROOT
    assert np.allclose(b.z, b.counts / 6 ** 2)


def test_invalid_spine(uniform3):
    store = TreeStore(uniform3, 0)
    bad = IICSample(2, (ROOT, NodeRef((5,)), NodeRef((5, 0))), 1, 1.0)
    assert not spine_is_valid(store, bad)
    broken = IICSample(2, (ROOT, NodeRef((0,)), NodeRef((1, 0))), 1, 1.0)
    assert not spine_is_valid(store, broken)


def test_budget_and_arguments(binary, uniform3):
    with pytest.raises(BudgetExceeded):
        sample_iic(TreeStore(binary, 0, budget=1000), 3, 20, 0, 0)
    store = TreeStore(uniform3, 0)
    with pytest.raises(ValueError):
        sample_iic(store, 0, 4, 0, 0)
    with pytest.raises(ValueError):
        sample_iic_batch(store, 3, -1, 10, 0)


def test_level_count_grows_linearly(mu12):
    # under the IIC E|C_n| grows like n (size-biased mean 2/C in the limit)
    store = TreeStore(mu12, 0)
    z = sample_iic_batch(store, 40, 30, 4000, 24).z
    assert 0.5 * 2 / 7.2 < z.mean() < 2 * 2 / 7.2
    assert math.isfinite(z.max())
