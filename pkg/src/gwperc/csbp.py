"""Compound-Poisson sampler for the finite-variance (alpha = 2) CSBP.

Over a step of length dt, mass a becomes a sum of N ~ Poisson(a C / dt)
independent Exp(rate C / dt) jumps.  The sum of N exponentials is
Gamma(N, scale dt / C), which is what is drawn.  For alpha < 2 no sampler is
offered; those claims are checked in transform space only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, UnsupportedRegime
from .offspring import ModelConstants, Regime


@dataclass(frozen=True)
class CsbpStep:
    a: float
    dt: float
    constants: ModelConstants

    @property
    def poisson_mean(self) -> float:
        return self.a * self.constants.C_alpha * self.dt ** -self.constants.beta

    @property
    def jump_rate(self) -> float:
        return self.constants.C_alpha / self.dt


def _require_alpha2(c: ModelConstants) -> None:
    if c.regime is not Regime.FINITE_VARIANCE:
        raise UnsupportedRegime(f"sampler needs alpha = 2, got alpha = {c.alpha}")


def step_alpha2(constants: ModelConstants, a, dt: float, gen: np.random.Generator, size=None):
    """One transition from mass ``a`` (scalar or array) over time ``dt``."""
    _require_alpha2(constants)
    if dt <= 0:
        raise DomainError("dt must be > 0")
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0):
        raise DomainError("mass must be >= 0")
    shape = a.shape if size is None else size
    lam = a * constants.C_alpha / dt
    n = np.asarray(gen.poisson(np.broadcast_to(lam, shape)))
    out = np.zeros(shape, dtype=np.float64)
    hit = n > 0
    if np.any(hit):
        out[hit] = gen.gamma(n[hit], dt / constants.C_alpha)
    return float(out) if out.ndim == 0 else out


def path_alpha2(constants: ModelConstants, a0, times, gen: np.random.Generator,
                size: int | None = None) -> np.ndarray:
    """Masses at each time in ``times`` (first entry is the start, mass a0).

    With ``size`` set, returns ``size`` independent paths as rows.
    """
    _require_alpha2(constants)
    t = np.asarray(times, dtype=np.float64)
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0):
        raise DomainError("times must be a strictly increasing grid")
    rows = 1 if size is None else size
    out = np.empty((rows, t.size), dtype=np.float64)
    out[:, 0] = a0
    for j in range(1, t.size):
        out[:, j] = step_alpha2(constants, out[:, j - 1], t[j] - t[j - 1], gen)
    return out[0] if size is None else out


def write_path_csv(path: str | Path, times, masses) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "mass"])
        for t, m in zip(times, masses):
            w.writerow([repr(float(t)), repr(float(m))])
