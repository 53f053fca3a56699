"""Streaming Monte Carlo estimators with confidence intervals.

Survival probabilities use the 99% Wilson interval.  Transform functionals
E[exp(-theta s Y) | Y > 0] use a Poisson bootstrap: replicate b gives run r
an independent Poisson(1) weight derived by hashing ``(seed, r, b)``, so
replicates can be accumulated chunk by chunk and two partial summaries over
disjoint runs merge by plain addition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .errors import EmptyBatch, InsufficientSurvivors, InvalidLevels

Z99 = 2.5758293035489004
N_BOOT = 1000
MIN_SURVIVORS = 100
MIN_BIN = 200
BIN_HALF_WIDTH = 0.25

# Poisson(1) cdf up to k = 19; P(X >= 20) < 1e-19
_POIS1_CDF = np.cumsum([math.exp(-1.0) / math.factorial(k) for k in range(20)])
_POIS1_CDF[-1] = 1.0


# ---- binomial ----------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    estimate: float
    lo: float
    hi: float

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "ci_lo": self.lo, "ci_hi": self.hi}


def wilson_interval(k: int, n: int, z: float = Z99) -> Interval:
    if n <= 0:
        raise EmptyBatch("no trials")
    ph = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (ph + z2 / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z2 / (4 * n * n)) / denom
    return Interval(ph, max(0.0, min(ph, centre - half)), min(1.0, max(ph, centre + half)))


@dataclass(frozen=True)
class SurvivalEstimate:
    n: int
    n_runs: int
    n_survived: int
    interval: Interval

    @property
    def estimate(self) -> float:
        return self.interval.estimate

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.n_runs)

    def as_dict(self) -> dict:
        return {"n": self.n, "n_runs": self.n_runs, "n_survived": self.n_survived,
                "stderr": self.stderr, **self.interval.as_dict()}


def _level_values(source, n: int, exact: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """(run indices, Y_n) for the non-aborted runs of ``source``.

    ``source`` is a BatchResult, a sequence of ClusterTrace, or a plain array
    of Y_n values (run indices are then 0..len-1).
    """
    from .percolation import BatchResult, ClusterTrace

    if isinstance(source, BatchResult):
        keep = ~source.aborted
        if n in source.levels:
            y = source.column(n)
        elif n <= source.n_max and not exact:
            y = (source.depth >= n).astype(np.int64)  # only the sign is known
        else:
            raise InvalidLevels(f"level {n} was not recorded (n_max={source.n_max})")
        return source.run_indices[keep], y[keep]
    if isinstance(source, np.ndarray) or (isinstance(source, Sequence) and source
                                          and not isinstance(source[0], ClusterTrace)):
        y = np.asarray(source, dtype=np.int64)
        return np.arange(y.size, dtype=np.int64), y
    traces = list(source)
    for t in traces:
        if t.n_max < n:
            raise InvalidLevels(f"trace has n_max={t.n_max} < {n}")
    y = np.array([t.counts[n] for t in traces], dtype=np.int64)
    return np.arange(y.size, dtype=np.int64), y


def survival_estimate(source, n: int) -> SurvivalEstimate:
    _, y = _level_values(source, n, exact=False)
    if y.size == 0:
        raise EmptyBatch("no runs")
    k = int(np.count_nonzero(y > 0))
    return SurvivalEstimate(n, int(y.size), k, wilson_interval(k, int(y.size)))


# ---- transforms --------------------------------------------------------------

def poisson_weights(seed: int, run_index: np.ndarray, n_boot: int) -> np.ndarray:
    """Poisson(1) bootstrap weights, shape (len(run_index), n_boot), keyed by run."""
    r = np.asarray(run_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = rng.mix64_np(np.uint64(seed & rng.MASK64) ^ (r * np.uint64(rng.GOLDEN)))
        b = np.arange(n_boot, dtype=np.uint64) * np.uint64(rng.LANE2)
        bits = rng.mix64_np(base[:, None] + b[None, :])
    u = rng.unit_closed_left_np(bits)
    return np.searchsorted(_POIS1_CDF, u, side="right").astype(np.float64)


@dataclass
class LaplaceAccumulator:
    """Running sums of exp(-theta * x) plus Poisson-bootstrap replicates."""

    thetas: tuple[float, ...]
    n_boot: int = N_BOOT
    seed: int = 0
    count: int = 0
    sums: np.ndarray = None
    boot_sums: np.ndarray = None
    boot_counts: np.ndarray = None
    x_sum: float = 0.0

    def __post_init__(self):
        self.thetas = tuple(float(t) for t in self.thetas)
        if self.sums is None:
            self.sums = np.zeros(len(self.thetas))
            self.boot_sums = np.zeros((self.n_boot, len(self.thetas)))
            self.boot_counts = np.zeros(self.n_boot)

    def add(self, run_index: np.ndarray, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=np.float64)
        if x.size == 0:
            return
        vals = np.exp(-np.outer(x, self.thetas))
        self.count += x.size
        self.x_sum += math.fsum(x)
        self.sums += vals.sum(axis=0)
        if self.n_boot:
            w = poisson_weights(self.seed, run_index, self.n_boot)
            self.boot_sums += w.T @ vals
            self.boot_counts += w.sum(axis=0)

    def merge(self, other: "LaplaceAccumulator") -> "LaplaceAccumulator":
        if other.thetas != self.thetas or other.n_boot != self.n_boot or other.seed != self.seed:
            raise ValueError("accumulators differ in theta grid or bootstrap setup")
        return LaplaceAccumulator(self.thetas, self.n_boot, self.seed, self.count + other.count,
                                  self.sums + other.sums, self.boot_sums + other.boot_sums,
                                  self.boot_counts + other.boot_counts, self.x_sum + other.x_sum)

    def values(self) -> np.ndarray:
        return self.sums / self.count if self.count else np.full(len(self.thetas), np.nan)

    def intervals(self, level: float = 0.99) -> list[Interval]:
        v = self.values()
        if not self.n_boot or not self.count:
            return [Interval(float(x), float(x), float(x)) for x in v]
        ok = self.boot_counts > 0
        reps = self.boot_sums[ok] / self.boot_counts[ok, None]
        q = (1 - level) / 2
        lo = np.quantile(reps, q, axis=0)
        hi = np.quantile(reps, 1 - q, axis=0)
        return [Interval(float(x), float(min(a, x)), float(max(b, x)))
                for x, a, b in zip(v, lo, hi)]

    @property
    def mean(self) -> float:
        return self.x_sum / self.count if self.count else float("nan")


@dataclass
class LaplaceEstimate:
    n: int
    scale: float
    n_survivors: int
    thetas: tuple[float, ...]
    intervals: list[Interval]
    mean: float

    @property
    def values(self) -> np.ndarray:
        return np.array([iv.estimate for iv in self.intervals])

    def as_dict(self) -> dict:
        return {"n": self.n, "scale": self.scale, "n_survivors": self.n_survivors,
                "mean": self.mean,
                "points": [{"theta": t, **iv.as_dict()} for t, iv in zip(self.thetas, self.intervals)]}


def _finish(acc: LaplaceAccumulator, n: int, scale: float, min_survivors: int) -> LaplaceEstimate:
    if acc.count < min_survivors:
        raise InsufficientSurvivors(f"{acc.count} survivors at level {n}, need {min_survivors}")
    return LaplaceEstimate(n, scale, acc.count, acc.thetas, acc.intervals(), acc.mean)


def laplace_estimate(source, n: int, thetas: Iterable[float], beta: float, *,
                     scale: float | None = None, n_boot: int = N_BOOT, seed: int = 0,
                     min_survivors: int = MIN_SURVIVORS) -> LaplaceEstimate:
    """E[exp(-theta * scale * Y_n) | Y_n > 0] with scale = n**-beta by default."""
    idx, y = _level_values(source, n)
    scale = n ** -beta if scale is None else scale
    keep = y > 0
    acc = LaplaceAccumulator(tuple(thetas), n_boot, seed)
    acc.add(idx[keep], y[keep] * scale)
    return _finish(acc, n, scale, min_survivors)


def later_level_estimate(source, n: int, later: int, thetas: Iterable[float], beta: float, *,
                         n_boot: int = N_BOOT, seed: int = 0,
                         min_survivors: int = MIN_SURVIVORS) -> LaplaceEstimate:
    """E[exp(-theta n^-beta Y_later) | Y_n > 0], zeros at the later level included."""
    idx, y = _level_values(source, n)
    _, z = _level_values(source, later)
    keep = y > 0
    scale = n ** -beta
    acc = LaplaceAccumulator(tuple(thetas), n_boot, seed)
    acc.add(idx[keep], z[keep] * scale)
    return _finish(acc, n, scale, min_survivors)


# ---- binned transitions ------------------------------------------------------

@dataclass
class TransitionBin:
    centre: float
    half_width: float
    count: int
    mean_a: float
    thetas: tuple[float, ...]
    intervals: list[Interval] = field(default_factory=list)
    dropped: bool = False

    @property
    def values(self) -> np.ndarray:
        return np.array([iv.estimate for iv in self.intervals])

    def as_dict(self) -> dict:
        return {"centre": self.centre, "half_width": self.half_width, "count": self.count,
                "mean_a": self.mean_a, "dropped": self.dropped,
                "points": [{"theta": t, **iv.as_dict()} for t, iv in zip(self.thetas, self.intervals)]}


def binned_transition_estimate(source, n: int, later: int, thetas: Iterable[float],
                               beta: float, *, centres: Sequence[float] | None = None,
                               half_width: float = BIN_HALF_WIDTH, min_count: int = MIN_BIN,
                               n_boot: int = N_BOOT, seed: int = 0) -> list[TransitionBin]:
    """Conditional transform of n^-beta Y_later given n^-beta Y_n in [a - d, a + d].

    ``d = half_width * a``.  Without explicit centres a single bin sits at the
    median of n^-beta Y_n over surviving runs.  Bins with fewer than
    ``min_count`` members are returned with ``dropped=True``.
    """
    thetas = tuple(float(t) for t in thetas)
    idx, y = _level_values(source, n)
    _, z = _level_values(source, later)
    keep = y > 0
    scale = n ** -beta
    a_all, z_all, idx = y[keep] * scale, z[keep] * scale, idx[keep]
    if centres is None:
        if a_all.size == 0:
            return [TransitionBin(float("nan"), float("nan"), 0, float("nan"), thetas, dropped=True)]
        centres = [float(np.median(a_all))]
    out = []
    for c in centres:
        d = half_width * c
        sel = (a_all >= c - d) & (a_all <= c + d)
        k = int(sel.sum())
        b = TransitionBin(float(c), float(d), k, float(a_all[sel].mean()) if k else float("nan"),
                          thetas)
        if k < min_count:
            b.dropped = True
        else:
            acc = LaplaceAccumulator(thetas, n_boot, seed)
            acc.add(idx[sel], z_all[sel])
            b.intervals = acc.intervals()
        out.append(b)
    return out


# ---- summaries ---------------------------------------------------------------

@dataclass
class EstimatorSummary:
    """Mergeable per-batch summary at one level n."""

    n: int
    beta: float
    thetas: tuple[float, ...]
    n_runs: int = 0
    n_aborted: int = 0
    n_survived: int = 0
    laplace: LaplaceAccumulator | None = None
    n_boot: int = N_BOOT
    seed: int = 0

    def __post_init__(self):
        if self.laplace is None:
            self.laplace = LaplaceAccumulator(self.thetas, self.n_boot, self.seed)

    def add_batch(self, batch) -> "EstimatorSummary":
        idx, y = _level_values(batch, self.n)
        self.n_runs += int(y.size)
        self.n_aborted += int(batch.aborted.sum()) if hasattr(batch, "aborted") else 0
        keep = y > 0
        self.n_survived += int(keep.sum())
        self.laplace.add(idx[keep], y[keep] * self.n ** -self.beta)
        return self

    def merge(self, other: "EstimatorSummary") -> "EstimatorSummary":
        if (self.n, self.beta, self.thetas) != (other.n, other.beta, other.thetas):
            raise ValueError("summaries describe different estimands")
        return EstimatorSummary(self.n, self.beta, self.thetas, self.n_runs + other.n_runs,
                                self.n_aborted + other.n_aborted,
                                self.n_survived + other.n_survived,
                                self.laplace.merge(other.laplace), self.n_boot, self.seed)

    def survival(self) -> SurvivalEstimate:
        if not self.n_runs:
            raise EmptyBatch("no runs")
        return SurvivalEstimate(self.n, self.n_runs, self.n_survived,
                                wilson_interval(self.n_survived, self.n_runs))

    def laplace_estimate(self, min_survivors: int = MIN_SURVIVORS) -> LaplaceEstimate:
        return _finish(self.laplace, self.n, self.n ** -self.beta, min_survivors)
