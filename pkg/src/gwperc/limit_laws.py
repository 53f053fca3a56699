"""Closed-form limit objects for the rescaled critical cluster.

All functions accept scalars or numpy arrays.  With ``x = theta / C``:

    1 - phi(theta)        = x (1 + x**(alpha-1)) ** -beta
    u(t, lam)             = lam (1 + (lam/C)**(alpha-1) t) ** -beta
    psi(lam)              = beta C**(1-alpha) lam**alpha
    E exp(-theta Y*)      = (1 + x**(alpha-1)) ** -(beta+1)

The last line is ``-C phi'(theta)`` after using beta (alpha - 1) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .offspring import ModelConstants

_CONSISTENCY = 1e-12


def _check_nonneg(name, value):
    arr = np.asarray(value, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


@dataclass(frozen=True)
class LimitLaw:
    constants: ModelConstants

    @property
    def C(self) -> float:
        return self.constants.C_alpha

    @property
    def alpha(self) -> float:
        return self.constants.alpha

    @property
    def beta(self) -> float:
        return self.constants.beta

    def one_minus_phi(self, theta):
        theta = _check_nonneg("theta", theta)
        x = theta / self.C
        with np.errstate(over="ignore"):
            return _out(x * (1.0 + x ** (self.alpha - 1.0)) ** -self.beta)

    def phi(self, theta):
        """Laplace transform of the conditioned limit Y."""
        return _out(1.0 - np.asarray(self.one_minus_phi(theta)))

    def phi_prime(self, theta):
        theta = _check_nonneg("theta", theta)
        x = theta / self.C
        return _out(-(1.0 + x ** (self.alpha - 1.0)) ** (-self.beta - 1.0) / self.C)

    def u(self, t, lam):
        """Log-Laplace flow of the limiting CSBP."""
        t = _check_nonneg("t", t)
        lam = _check_nonneg("lambda", lam)
        return _out(lam * (1.0 + (lam / self.C) ** (self.alpha - 1.0) * t) ** -self.beta)

    def psi(self, lam):
        lam = _check_nonneg("lambda", lam)
        return _out(self.beta * self.C ** (1.0 - self.alpha) * lam ** self.alpha)

    def log_transition_lt(self, a, dt, theta):
        """log Q_{a,dt}(theta) computed through the Poisson representation."""
        a = _check_nonneg("a", a)
        dt = np.asarray(dt, dtype=np.float64)
        if np.any(~(dt > 0)):
            raise DomainError("dt must be > 0")
        theta = _check_nonneg("theta", theta)
        scale = dt ** self.beta
        poisson = np.asarray(self.one_minus_phi(theta * scale)) * self.C / scale
        flow = np.asarray(self.u(dt, theta))
        # the two forms coincide through u_t(theta) = t**-beta u_1(t**beta theta)
        gap = np.abs(poisson - flow)
        tol = _CONSISTENCY * np.maximum(1.0, np.abs(flow))
        if np.any(gap > tol):
            raise AssertionError(f"transition forms disagree by {np.max(gap):.3e}")
        return _out(-a * poisson)

    def csbp_transition_lt(self, a, dt, theta):
        """E[exp(-theta Y_{s+dt}) | Y_s = a] for the limiting CSBP."""
        val = np.exp(np.asarray(self.log_transition_lt(a, dt, theta)))
        return _out(np.clip(val, 0.0, 1.0))

    def size_biased_lt(self, theta):
        """Laplace transform of the size-biased limit Y*."""
        theta = _check_nonneg("theta", theta)
        x = theta / self.C
        return _out((1.0 + x ** (self.alpha - 1.0)) ** (-self.beta - 1.0))

    def mean(self) -> float:
        return 1.0 / self.C

    def size_biased_mean(self) -> float:
        """E[Y*] = C E[Y^2]; finite only in the finite-variance case (2 / C)."""
        if self.alpha < 2.0:
            return float("inf")
        return 2.0 / self.C

    def extinction_lt(self, a, dt):
        """Limit of the transition transform as theta -> infinity."""
        return float(np.exp(-a * self.C * dt ** -self.beta))
