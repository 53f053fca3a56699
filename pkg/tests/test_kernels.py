"""The compiled kernels and the numpy fallback must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from gwperc import constants, kernels, make_spec, rng
from gwperc.offspring import sampler_table

impls = kernels.available()
needs_both = pytest.mark.skipif("cython" not in impls, reason="extension not built")

LAWS = [{"kind": "explicit", "pmf": {"1": 1 / 3, "2": 1 / 3, "3": 1 / 3}},
        {"kind": "explicit", "pmf": {"1": 0.8, "2": 0.2}},
        {"kind": "zeta_tail", "alpha": 1.5}]


def _args(d):
    spec = make_spec(d)
    return spec, sampler_table(spec), constants(spec).p_c


def test_selection_reports_name():
    assert kernels.IMPLEMENTATION in impls


@needs_both
@pytest.mark.parametrize("d", LAWS)
@pytest.mark.parametrize("annealed", [False, True])
def test_cluster_batch_identical(d, annealed):
    spec, (kind, table, alpha), p = _args(d)
    h1, h2 = rng.root_key(3)
    n_max = 30
    col = np.full(n_max + 1, -1, dtype=np.int64)
    col[[0, 7, 30]] = [0, 1, 2]
    out = [impl.cluster_batch(kind, table, alpha, p, annealed, h1, h2, 99, 1000, 3000,
                              n_max, col, 3, 12, 10**6) for impl in impls.values()]
    for a, b in zip(out[0], out[1]):
        assert np.array_equal(a, b)


@needs_both
@pytest.mark.parametrize("d", LAWS)
def test_subtree_counts_identical(d):
    _, (kind, table, alpha), _ = _args(d)
    h1, h2 = rng.root_key(17)
    a, b = [impl.subtree_counts(kind, table, alpha, h1, h2, 12, 10**7) for impl in impls.values()]
    assert np.array_equal(a, b)


@needs_both
def test_subtree_budget_identical():
    _, (kind, table, alpha), _ = _args({"kind": "explicit", "pmf": {"2": 1.0}})
    h1, h2 = rng.root_key(0)
    assert all(impl.subtree_counts(kind, table, alpha, h1, h2, 20, 1000) is None
               for impl in impls.values())


@needs_both
@pytest.mark.parametrize("d", LAWS)
def test_iic_batch_identical(d):
    _, (kind, table, alpha), p = _args(d)
    h1, h2 = rng.root_key(5)
    out = [impl.iic_batch(kind, table, alpha, p, h1, h2, 7, 40, 60, 12, 8, 10**7, True)
           for impl in impls.values()]
    for a, b in zip(out[0], out[1]):
        assert np.array_equal(a, b)


@pytest.mark.parametrize("name", sorted(impls))
def test_empty_batches(name):
    impl = impls[name]
    _, (kind, table, alpha), p = _args(LAWS[0])
    col = np.array([0, -1], dtype=np.int64)
    counts, depth, conn = impl.cluster_batch(kind, table, alpha, p, True, 0, 0, 1, 0, 0, 1,
                                             col, 1, -1, 100)
    assert counts.shape == (0, 1) and depth.shape == (0,)
    c, a, s = impl.iic_batch(kind, table, alpha, p, 1, 2, 3, 0, 0, 4, 3, 100, False)
    assert c.size == 0 and s is None


def test_pure_env_selects_fallback():
    env = {**os.environ, "GWPERC_PURE": "1"}
    out = subprocess.run([sys.executable, "-c", "from gwperc import kernels; print(kernels.IMPLEMENTATION)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
