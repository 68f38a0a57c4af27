"""Bid distributions on [0, 1] and the virtual-valuation transform.

Revenue maximization rewrites each bid b as the virtual valuation
phi(b) = b - (1 - F(b)) / f(b). All three supported families are regular
(phi strictly increasing), so phi inverts cleanly; the exponential and
Gaussian families are truncated to [0, 1], which preserves regularity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import brentq

__all__ = [
    "BidDistribution",
    "UniformUnit",
    "TruncatedExponential",
    "TruncatedGaussian",
    "virtual_bid",
    "inverse_virtual_bid",
    "DomainError",
    "RangeError",
]


class DomainError(ValueError):
    """Bid outside the distribution's [0, 1] support."""


class RangeError(ValueError):
    """Virtual value outside [phi(0), phi(1)]."""


class BidDistribution:
    """Common surface: cdf/pdf on [0, 1], sampling, and a stable name."""

    name: str

    def cdf(self, b: float) -> float:
        raise NotImplementedError

    def pdf(self, b: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformUnit(BidDistribution):
    name: str = "uniform"

    def cdf(self, b: float) -> float:
        return float(np.clip(b, 0.0, 1.0))

    def pdf(self, b: float) -> float:
        return 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(0.0, 1.0, size)


@dataclass(frozen=True)
class TruncatedExponential(BidDistribution):
    rate: float = 1.0
    name: str = "exponential"

    def _dist(self):
        return stats.truncexpon(b=self.rate, scale=1.0 / self.rate)

    def cdf(self, b: float) -> float:
        return float(self._dist().cdf(b))

    def pdf(self, b: float) -> float:
        return float(self._dist().pdf(b))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._dist().rvs(size=size, random_state=rng)


@dataclass(frozen=True)
class TruncatedGaussian(BidDistribution):
    mean: float = 0.5
    stddev: float = 0.2
    name: str = "gaussian"

    def _dist(self):
        a = (0.0 - self.mean) / self.stddev
        b = (1.0 - self.mean) / self.stddev
        return stats.truncnorm(a, b, loc=self.mean, scale=self.stddev)

    def cdf(self, b: float) -> float:
        return float(self._dist().cdf(b))

    def pdf(self, b: float) -> float:
        return float(self._dist().pdf(b))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._dist().rvs(size=size, random_state=rng)


def virtual_bid(dist: BidDistribution, b: float) -> float:
    """phi(b) = b - (1 - F(b)) / f(b); raises DomainError off support."""
    if not (0.0 <= b <= 1.0):
        raise DomainError(f"bid {b} outside [0, 1]")
    if b == 1.0:
        return 1.0
    return float(b - (1.0 - dist.cdf(b)) / dist.pdf(b))


def inverse_virtual_bid(dist: BidDistribution, phi_value: float) -> float:
    """The bid whose virtual valuation equals ``phi_value`` (within 1e-9)."""
    if isinstance(dist, UniformUnit):
        b = (phi_value + 1.0) / 2.0
        if not (-1e-12 <= b <= 1.0 + 1e-12):
            raise RangeError(f"virtual value {phi_value} outside [-1, 1]")
        return float(np.clip(b, 0.0, 1.0))
    lo, hi = virtual_bid(dist, 0.0), 1.0
    if not (lo - 1e-9 <= phi_value <= hi + 1e-9):
        raise RangeError(f"virtual value {phi_value} outside [{lo}, {hi}]")
    if phi_value <= lo:
        return 0.0
    if phi_value >= hi:
        return 1.0
    return float(brentq(lambda b: virtual_bid(dist, b) - phi_value, 0.0, 1.0, xtol=1e-12))
