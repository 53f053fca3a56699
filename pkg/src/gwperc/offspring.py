"""Offspring laws on {1, 2, ...} and the model constants derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import MalformedPmf, RejectLeaves, RejectSubcritical

K_TABLE = 1 << 16

KIND_EXPLICIT = 0
KIND_ZETA = 1


class Regime(str, Enum):
    FINITE_VARIANCE = "FiniteVariance"
    STABLE_TAIL = "StableTail"


@dataclass(frozen=True)
class OffspringSpec:
    """An offspring law without leaves.

    ``kind == "explicit"``: ``pmf[j]`` is P(X = j + 1).
    ``kind == "zeta_tail"``: P(X >= k) = k**-alpha for integers k >= 1.
    """

    kind: str
    pmf: tuple[float, ...] | None = None
    alpha: float | None = None

    @property
    def regime(self) -> Regime:
        # a finite table always has finite variance
        return Regime.FINITE_VARIANCE if self.kind == "explicit" else Regime.STABLE_TAIL

    def describe(self) -> dict:
        if self.kind == "explicit":
            return {"kind": "explicit",
                    "pmf": {str(k + 1): p for k, p in enumerate(self.pmf) if p > 0}}
        return {"kind": "zeta_tail", "alpha": self.alpha}


@dataclass(frozen=True)
class ModelConstants:
    mu: float
    p_c: float
    regime: Regime
    alpha: float
    beta: float
    C_alpha: float
    c1: float | None = None
    sigma2: float | None = None

    def as_dict(self) -> dict:
        return {"mu": self.mu, "p_c": self.p_c, "regime": self.regime.value,
                "alpha": self.alpha, "beta": self.beta, "C_alpha": self.C_alpha,
                "c1": self.c1, "sigma2": self.sigma2}


def make_spec(config: Mapping) -> OffspringSpec:
    """Validate a distribution description and return an :class:`OffspringSpec`.

    Accepts ``{"kind": "explicit", "pmf": {"1": 0.8, "2": 0.2}}`` or
    ``{"kind": "zeta_tail", "alpha": 1.5}``.
    """
    kind = config.get("kind")
    if kind == "zeta_tail":
        alpha = float(config["alpha"])
        if not 1.0 < alpha < 2.0:
            raise MalformedPmf(f"zeta_tail needs alpha in (1, 2), got {alpha}")
        return OffspringSpec("zeta_tail", alpha=alpha)
    if kind != "explicit":
        raise MalformedPmf(f"unknown distribution kind {kind!r}")

    raw = {int(k): float(v) for k, v in dict(config["pmf"]).items()}
    if any(p < 0 or not math.isfinite(p) for p in raw.values()):
        raise MalformedPmf("probabilities must be finite and nonnegative")
    if any(k < 0 for k in raw):
        raise MalformedPmf("support must be nonnegative integers")
    if raw.get(0, 0.0) > 0:
        raise RejectLeaves("offspring law puts mass on 0 children")
    raw.pop(0, None)
    total = math.fsum(raw.values())
    if abs(total - 1.0) > 1e-9:
        raise MalformedPmf(f"pmf sums to {total!r}")
    k_max = max(k for k, p in raw.items() if p > 0)
    pmf = tuple(raw.get(k, 0.0) / total for k in range(1, k_max + 1))
    mu = math.fsum((k + 1) * p for k, p in enumerate(pmf))
    if mu <= 1.0:
        raise RejectSubcritical(f"mean {mu} is not > 1")
    return OffspringSpec("explicit", pmf=pmf)


_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def zeta_series(s: float, n_head: int = 64) -> tuple[float, float]:
    """Riemann zeta for s > 1 by direct summation plus an Euler-Maclaurin tail.

    Returns ``(value, error_bound)``; the bound is the magnitude of the first
    omitted correction term.
    """
    head = math.fsum(k ** -s for k in range(1, n_head))
    n = float(n_head)
    terms = [n ** (1 - s) / (s - 1), 0.5 * n ** -s]
    rising = s  # s (s+1) ... (s + 2j - 2)
    fact = 2.0  # (2j)!
    for j, b in enumerate(_BERNOULLI, start=1):
        if j > 1:
            rising *= (s + 2 * j - 3) * (s + 2 * j - 2)
            fact *= (2 * j - 1) * (2 * j)
        term = b / fact * rising * n ** (-s - 2 * j + 1)
        if j == len(_BERNOULLI):
            return head + math.fsum(terms), abs(term)
        terms.append(term)
    raise AssertionError("unreachable")


def gamma_one_minus(alpha: float) -> float:
    """Gamma(1 - alpha) through Gamma(2 - alpha) / (1 - alpha); negative on (1, 2)."""
    return math.gamma(2.0 - alpha) / (1.0 - alpha)


@lru_cache(maxsize=64)
def constants(spec: OffspringSpec) -> ModelConstants:
    if spec.kind == "explicit":
        ks = np.arange(1, len(spec.pmf) + 1, dtype=float)
        p = np.asarray(spec.pmf)
        mu = math.fsum(ks * p)
        fact2 = math.fsum(ks * (ks - 1) * p)
        sigma2 = math.fsum((ks - mu) ** 2 * p)
        return ModelConstants(mu=mu, p_c=1.0 / mu, regime=Regime.FINITE_VARIANCE,
                              alpha=2.0, beta=1.0, C_alpha=2.0 * mu * mu / fact2,
                              sigma2=sigma2)
    alpha = spec.alpha
    beta = 1.0 / (alpha - 1.0)
    mu, _ = zeta_series(alpha)
    c1 = 1.0
    g = abs(gamma_one_minus(alpha))
    c_alpha = c1 ** -beta * mu ** (alpha * beta) * g ** -beta * beta ** beta
    return ModelConstants(mu=mu, p_c=1.0 / mu, regime=Regime.STABLE_TAIL, alpha=alpha,
                          beta=beta, C_alpha=c_alpha, c1=c1)


def c_alpha_candidates(spec: OffspringSpec) -> dict:
    """Both readings of the stable-tail constant.

    ``magnitude`` uses |Gamma(1 - alpha)| (the value the library uses);
    ``literal`` raises the signed Gamma(1 - alpha) to the power -beta in the
    complex plane, which is real only when beta is an integer.
    """
    c = constants(spec)
    if c.regime is Regime.FINITE_VARIANCE:
        return {"magnitude": c.C_alpha, "literal": c.C_alpha}
    g = complex(gamma_one_minus(c.alpha))
    lit = c.c1 ** -c.beta * c.mu ** (c.alpha * c.beta) * g ** -c.beta * c.beta ** c.beta
    return {"magnitude": c.C_alpha,
            "literal": lit.real if abs(lit.imag) < 1e-12 * abs(lit) else [lit.real, lit.imag]}


@lru_cache(maxsize=64)
def sampler_table(spec: OffspringSpec) -> tuple[int, np.ndarray, float]:
    """Inverse-CDF table shared by every sampling path.

    explicit: ``table[j] = P(X <= j + 1)``.
    zeta_tail: ``table[j] = (j + 1) ** -alpha = P(X >= j + 1)`` for j <= K_TABLE.
    """
    if spec.kind == "explicit":
        cdf = np.cumsum(np.asarray(spec.pmf, dtype=np.float64))
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        return KIND_EXPLICIT, cdf, 0.0
    ks = np.arange(1, K_TABLE + 2, dtype=np.float64)
    tail = ks ** -spec.alpha
    tail.setflags(write=False)
    return KIND_ZETA, tail, float(spec.alpha)


def offspring_from_uniform(spec: OffspringSpec, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF map from u in (0, 1] to offspring counts (int64)."""
    return inverse_from_table(*sampler_table(spec), u)


def inverse_from_table(kind: int, table: np.ndarray, alpha: float, u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if kind == KIND_EXPLICIT:
        x = np.searchsorted(table, u, side="left") + 1
        return np.minimum(x, len(table)).astype(np.int64)
    k_table = len(table) - 1
    x = np.empty(u.shape, dtype=np.int64)
    inside = u > table[k_table]
    # count of table entries >= u, table is decreasing
    x[inside] = len(table) - np.searchsorted(table[::-1], u[inside], side="left")
    far = ~inside
    if far.any():
        x[far] = _zeta_far(u[far], alpha)
    return x


def _zeta_far(u: np.ndarray, alpha: float) -> np.ndarray:
    # generator uniforms are >= 2**-53, far below the cap; the cap only keeps
    # the cast defined for hand-fed inputs
    k = np.minimum(np.floor(u ** (-1.0 / alpha)), 2.0 ** 62).astype(np.int64)
    # fix rounding: want (k + 1)**-alpha < u <= k**-alpha
    for _ in range(4):
        up = (k + 1).astype(np.float64) ** -alpha >= u
        k = k + up
        down = k.astype(np.float64) ** -alpha < u
        k = k - down
        if not (up.any() or down.any()):
            break
    return k


def offspring_scalar(spec: OffspringSpec, u: float) -> int:
    return int(offspring_from_uniform(spec, np.array([u]))[0])


def sample_offspring(spec: OffspringSpec, rng: np.random.Generator, size=None):
    """Draw offspring counts from a caller-owned numpy Generator."""
    u = 1.0 - rng.random(size)
    out = offspring_from_uniform(spec, np.atleast_1d(u))
    return int(out[0]) if size is None else out.reshape(np.shape(u))
