import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwperc import (EmptyBatch, EstimatorSummary, InsufficientSurvivors, InvalidLevels, TreeStore,
                    binned_transition_estimate, laplace_estimate, run_batch, run_cluster,
                    survival_estimate, wilson_interval)
from gwperc.estimators import Z99, LaplaceAccumulator, later_level_estimate, poisson_weights
from gwperc.percolation import BatchResult


def test_wilson_example():
    iv = wilson_interval(50, 100)
    z2 = Z99 ** 2
    half = Z99 * math.sqrt(0.25 / 100 + z2 / 40000) / (1 + z2 / 100)
    assert iv.estimate == 0.5
    assert iv.lo == pytest.approx(0.5 - half, rel=1e-14)
    assert iv.hi == pytest.approx(0.5 + half, rel=1e-14)
    assert Z99 == pytest.approx(2.5758293035489004, rel=1e-15)


def test_wilson_edges():
    assert wilson_interval(0, 10).lo == 0.0
    assert wilson_interval(10, 10).hi == 1.0
    with pytest.raises(EmptyBatch):
        wilson_interval(0, 0)


@given(st.integers(1, 10**6), st.data())
def test_wilson_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    iv = wilson_interval(k, n)
    assert 0.0 <= iv.lo <= k / n <= iv.hi <= 1.0


def test_wilson_coverage():
    gen = np.random.default_rng(5)
    p, n = 0.3, 200
    ks = gen.binomial(n, p, size=4000)
    cover = np.mean([wilson_interval(int(k), n).contains(p) for k in ks])
    assert cover >= 0.98


def test_poisson_weights():
    w = poisson_weights(7, np.arange(2000), 500)
    assert w.shape == (2000, 500)
    assert abs(w.mean() - 1.0) < 0.01 and abs(w.var() - 1.0) < 0.02
    sub = poisson_weights(7, np.array([3, 1999]), 500)
    assert np.array_equal(sub, w[[3, 1999]])
    assert not np.array_equal(poisson_weights(8, np.array([3]), 500), w[[3]])


def test_accumulator_merge_is_addition():
    gen = np.random.default_rng(6)
    x = gen.exponential(size=3000)
    idx = np.arange(3000)
    whole = LaplaceAccumulator((0.5, 2.0), 200, 1)
    whole.add(idx, x)
    a, b = LaplaceAccumulator((0.5, 2.0), 200, 1), LaplaceAccumulator((0.5, 2.0), 200, 1)
    a.add(idx[:1234], x[:1234])
    b.add(idx[1234:], x[1234:])
    m = a.merge(b)
    assert m.count == whole.count
    assert np.array_equal(m.boot_counts, whole.boot_counts)
    assert np.allclose(m.sums, whole.sums, rtol=1e-13)
    assert np.allclose(m.boot_sums, whole.boot_sums, rtol=1e-12)
    with pytest.raises(ValueError):
        a.merge(LaplaceAccumulator((0.5,), 200, 1))


def test_laplace_known_law():
    # geometric Y on {1, 2, ...} with parameter q: E s**Y = q s / (1 - (1 - q) s)
    gen = np.random.default_rng(7)
    q = 0.2
    y = gen.geometric(q, size=20000)
    est = laplace_estimate(y, 5, [0.1, 0.5, 1.0], 1.0, scale=1.0)
    for th, iv in zip([0.1, 0.5, 1.0], est.intervals):
        s = math.exp(-th)
        assert iv.contains(q * s / (1 - (1 - q) * s))
    assert np.all(np.diff(est.values) < 0)
    assert est.mean == pytest.approx(y.mean())
    assert est.n_survivors == 20000


def test_zero_theta_is_one():
    est = laplace_estimate(np.array([1, 2, 3] * 50), 2, [0.0], 1.0)
    assert est.values[0] == 1.0


def test_insufficient_survivors():
    with pytest.raises(InsufficientSurvivors):
        laplace_estimate(np.array([0, 0, 1, 2]), 3, [1.0], 1.0)


def test_survival_sources(uniform3):
    store = TreeStore(uniform3, 0)
    b = run_batch(store, 10, 500, 1, levels=[10])
    deep = run_batch(store, 10, 500, 1)  # only the depth is known
    traces = [run_cluster(store, 10, r, 1) for r in range(500)]
    a, c, d = survival_estimate(b, 10), survival_estimate(deep, 10), survival_estimate(traces, 10)
    assert a.n_survived == c.n_survived == d.n_survived
    assert survival_estimate(deep, 4).n_survived >= a.n_survived
    with pytest.raises(InvalidLevels):
        laplace_estimate(deep, 10, [1.0], 1.0)
    with pytest.raises(InvalidLevels):
        survival_estimate(traces, 11)
    with pytest.raises(EmptyBatch):
        survival_estimate(np.zeros(0, dtype=np.int64), 3)


def _synthetic(a_vals, later_vals):
    counts = np.stack([a_vals, later_vals], axis=1).astype(np.int64)
    depth = np.where(later_vals > 0, 2, np.where(a_vals > 0, 1, 0))
    return BatchResult("annealed", 2, (1, 2), 0, counts, depth)


def test_binned_transition_example():
    gen = np.random.default_rng(8)
    a = gen.integers(0, 9, size=5000)
    z = a * 2
    b = _synthetic(a, z)
    bins = binned_transition_estimate(b, 1, 2, [0.5], 0.0, centres=[4.0, 100.0],
                                      min_count=50, n_boot=100)
    assert bins[0].count == int(np.sum((a >= 3) & (a <= 5)))
    assert not bins[0].dropped and bins[1].dropped and bins[1].count == 0
    # given a in [3, 5], z = 2a exactly
    sel = a[(a >= 3) & (a <= 5)]
    assert bins[0].values[0] == pytest.approx(np.mean(np.exp(-0.5 * 2 * sel)))
    assert bins[0].mean_a == pytest.approx(sel.mean())
    med = binned_transition_estimate(b, 1, 2, [0.5], 0.0, min_count=50, n_boot=10)
    assert med[0].centre == np.median(a[a > 0])


def test_binned_no_survivors():
    b = _synthetic(np.zeros(10), np.zeros(10))
    out = binned_transition_estimate(b, 1, 2, [1.0], 1.0)
    assert out[0].dropped and out[0].count == 0


def test_later_level_keeps_zeros():
    b = _synthetic(np.array([1, 1, 0] * 100), np.array([0, 3, 5] * 100))
    est = later_level_estimate(b, 1, 2, [1.0], 0.0, n_boot=50)
    assert est.n_survivors == 200
    assert est.values[0] == pytest.approx((1 + math.exp(-3)) / 2)


def test_summary_merge(mu12):
    thetas = (0.5, 1.0)
    whole = EstimatorSummary(20, 1.0, thetas, n_boot=100)
    parts = [EstimatorSummary(20, 1.0, thetas, n_boot=100) for _ in range(2)]
    b = run_batch(mu12, 20, 20000, 3, levels=[20])
    b1 = run_batch(mu12, 20, 8000, 3, levels=[20])
    b2 = run_batch(mu12, 20, 12000, 3, levels=[20], run_start=8000)
    whole.add_batch(b)
    parts[0].add_batch(b1)
    parts[1].add_batch(b2)
    m = parts[0].merge(parts[1])
    assert m.survival().n_survived == whole.survival().n_survived
    assert np.allclose(m.laplace_estimate().values, whole.laplace_estimate().values, rtol=1e-13)
    assert [iv.lo for iv in m.laplace_estimate().intervals] == pytest.approx(
        [iv.lo for iv in whole.laplace_estimate().intervals], rel=1e-12)
    with pytest.raises(ValueError):
        whole.merge(EstimatorSummary(21, 1.0, thetas))
    with pytest.raises(EmptyBatch):
        EstimatorSummary(5, 1.0, thetas).survival()
