"""Exact identity checks used by the property suite.

Each function returns plain numbers (largest defect found, counts) so the
harness can compare them with fixed tolerances and serialise them.
"""

from __future__ import annotations

import time
from collections import Counter

import numpy as np

from .iic import (WeightedFiniteTree, count_subtrees, iic_consistency_check,
                  iic_measure_table, normalization_defect, sample_finite)
from .limit_laws import LimitLaw
from .offspring import OffspringSpec, constants, make_spec

SUITE_LAWS = (
    {"kind": "explicit", "pmf": {"2": 1.0}},
    {"kind": "explicit", "pmf": {"1": 1 / 3, "2": 1 / 3, "3": 1 / 3}},
    {"kind": "explicit", "pmf": {"1": 0.8, "2": 0.2}},
    {"kind": "zeta_tail", "alpha": 1.5},
    {"kind": "zeta_tail", "alpha": 1.2},
)


def _rel(a, b):
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)


def limit_law_defects(spec: OffspringSpec) -> dict:
    """Largest defects of the closed-form identities on fixed grids."""
    law = LimitLaw(constants(spec))
    c = law.C
    g = np.logspace(-2, 2, 10)
    s, t, lam = np.meshgrid(g, g, g, indexing="ij")
    semigroup = float(np.max(_rel(law.u(s, law.u(t, lam)), law.u(s + t, lam))))

    theta = np.logspace(-3, 3, 61)
    identity = float(np.max(np.abs((1 - law.phi(theta)) - law.u(1.0, theta) / c)))

    a = np.array([0.0, 0.3, 1.0, 4.0])
    dt = np.array([0.1, 1.0, 3.0])
    aa, dd, tt = np.meshgrid(a, dt, theta, indexing="ij")
    q = law.csbp_transition_lt(aa, dd, tt)
    transition = float(np.max(np.abs(q - np.exp(-aa * law.u(dd, tt)))))
    branching = float(np.max(np.abs(law.csbp_transition_lt(aa + 0.7, dd, tt)
                                    - q * law.csbp_transition_lt(0.7, dd, tt))))
    # (1 - phi(theta)) / theta = C^-1 (1 + x**(alpha-1))**-beta, so the relative
    # error is about beta x**(alpha-1): at theta = 1e-6 only alpha = 2 gets below
    # 1e-4; stable laws are evaluated where that leading term is 1e-5.
    if law.alpha == 2.0:
        theta0 = 1e-6
    else:
        theta0 = c * (1e-5 / law.beta) ** (1.0 / (law.alpha - 1.0))
    mean = float(abs(law.one_minus_phi(theta0) / theta0 - 1 / c) * c)
    mean_1e6 = float(abs(law.one_minus_phi(1e-6) / 1e-6 - 1 / c) * c)
    return {"semigroup_rel": semigroup, "identity_abs": identity,
            "transition_abs": transition, "branching_abs": branching, "mean_rel": mean,
            "mean_theta": theta0, "mean_rel_at_1e-6": mean_1e6}


def limit_law_suite() -> dict:
    start = time.perf_counter()
    per_law = {}
    for d in SUITE_LAWS:
        spec = make_spec(d)
        per_law[str(spec.describe())] = limit_law_defects(spec)
    keys = ("semigroup_rel", "identity_abs", "transition_abs", "branching_abs", "mean_rel")
    worst = {k: max(v[k] for v in per_law.values()) for k in keys}
    return {"per_law": per_law, "worst": worst, "seconds": time.perf_counter() - start}


def random_enumerable_tree(gen: np.random.Generator, height: int = 3, max_branching: int = 3,
                           limit: int = 20000) -> WeightedFiniteTree:
    """Random shape and harmonic weights, redrawn until the enumeration stays small."""
    while True:
        p = float(gen.uniform(0.2, 0.8))
        wt = WeightedFiniteTree.random(gen, height, max_branching, p)
        if count_subtrees(wt, height) <= limit:
            return wt


def iic_exact_suite(seed: int, trials: int = 20) -> dict:
    start = time.perf_counter()
    gen = np.random.default_rng(seed)
    consistency = normal = harmonic = 0.0
    for _ in range(trials):
        wt = random_enumerable_tree(gen)
        harmonic = max(harmonic, wt.harmonic_defect())
        for n in range(wt.height):
            consistency = max(consistency, iic_consistency_check(wt, n))
        for n in range(1, wt.height + 1):
            normal = max(normal, normalization_defect(wt, n))
    return {"trials": trials, "consistency_defect": consistency,
            "normalization_defect": normal, "harmonic_defect": harmonic,
            "seconds": time.perf_counter() - start}


def fixed_depth2_tree() -> WeightedFiniteTree:
    """Root with two children carrying 3 and 2 children, distinct leaf weights."""
    shape = {(): 2, (0,): 3, (1,): 2}
    return WeightedFiniteTree.harmonic(lambda v: shape[v], 2, 0.45,
                                       lambda v: 1.0 + 0.5 * v[0] + 0.3 * v[1])


def spine_sampler_check(seed: int, samples: int = 10**6) -> dict:
    """Per-atom z-scores of the spine sampler against the exact height-2 measure."""
    start = time.perf_counter()
    wt = fixed_depth2_tree()
    exact = iic_measure_table(wt, 2)
    got = Counter(sample_finite(wt, 2, samples, np.random.default_rng(seed)))
    unknown = sum(v for k, v in got.items() if k not in exact)
    z = max(abs(got.get(t, 0) - samples * q) / np.sqrt(samples * q * (1 - q))
            for t, q in exact.items())
    return {"atoms": len(exact), "samples": samples, "max_abs_z": float(z),
            "unknown_atoms": unknown, "seconds": time.perf_counter() - start}
