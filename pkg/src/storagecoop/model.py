"""Market and storage data model, prices and profits.

Schedules are plain ``(n, n_t)`` float arrays: row ``i`` holds storage ``i``'s
energy per period, positive for a purchase and negative for a sale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


def _frozen_vector(values, name):
    arr = np.array(values, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarketParams:
    """Affine inverse demand ``p[t] = beta[t] + gamma[t] * total_demand[t]``."""

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        beta = _frozen_vector(self.beta, "beta")
        gamma = _frozen_vector(self.gamma, "gamma")
        if beta.shape != gamma.shape:
            raise DimensionError(
                f"beta has {beta.size} periods but gamma has {gamma.size}"
            )
        if beta.size < 2:
            raise ValueError("a market needs at least two periods")
        if np.any(gamma <= 0):
            raise ValueError("every price sensitivity gamma[t] must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_periods(self) -> int:
        return self.beta.size

    @classmethod
    def two_period(cls, gamma_effective: float = 1.0, spread: float = 1.0) -> "MarketParams":
        """Two-period market in the reduced single-slope convention.

        The reduced two-period profit ``d*spread - gamma*d*sum(d) - eps*d**2``
        is reproduced by the general model with ``beta = [0, spread]`` and a
        per-period slope of ``gamma_effective / 2``.
        """
        half = gamma_effective / 2.0
        return cls(beta=[0.0, spread], gamma=[half, half])

    def __eq__(self, other):
        if not isinstance(other, MarketParams):
            return NotImplemented
        return np.array_equal(self.beta, other.beta) and np.array_equal(self.gamma, other.gamma)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Fleet:
    """Storages with quadratic operating cost ``(eps[i] / 2) * x**2`` per period.

    ``allow_zero`` admits zero cost coefficients; only the zero-cost bounding
    case of the two-period Nash formula uses it.
    """

    eps: np.ndarray
    allow_zero: bool = field(default=False, repr=False)

    def __post_init__(self):
        eps = _frozen_vector(self.eps, "eps")
        if eps.size < 1:
            raise ValueError("a fleet needs at least one storage")
        if self.allow_zero:
            if np.any(eps < 0):
                raise ValueError("cost coefficients must be non-negative")
        elif np.any(eps <= 0):
            raise ValueError("every cost coefficient eps[i] must be positive")
        object.__setattr__(self, "eps", eps)

    @property
    def n(self) -> int:
        return self.eps.size

    @property
    def sum_inv_eps(self) -> float:
        return float(np.sum(1.0 / self.eps))

    @classmethod
    def identical(cls, n: int, eps: float = 1.0) -> "Fleet":
        return cls(np.full(n, float(eps)), allow_zero=eps == 0)

    def __eq__(self, other):
        if not isinstance(other, Fleet):
            return NotImplemented
        return np.array_equal(self.eps, other.eps)

    __hash__ = None


@dataclass(frozen=True)
class ProfitReport:
    per_storage: np.ndarray
    aggregate: float
    per_period_price: np.ndarray


def as_schedule(sched, market: MarketParams, fleet: Fleet) -> np.ndarray:
    """Coerce ``sched`` to an ``(n, n_t)`` float array, checking its shape."""
    d = np.asarray(sched, dtype=float)
    if d.ndim == 1 and fleet.n == 1:
        d = d[np.newaxis, :]
    expected = (fleet.n, market.n_periods)
    if d.shape != expected:
        raise DimensionError(f"schedule has shape {d.shape}, expected {expected}")
    return d


def price(market: MarketParams, t: int, total_demand: float) -> float:
    if not 0 <= t < market.n_periods:
        raise IndexError(f"period {t} out of range for {market.n_periods} periods")
    return float(market.beta[t] + market.gamma[t] * total_demand)


def prices(market: MarketParams, sched) -> np.ndarray:
    """Market price in every period for the fleet-wide schedule ``sched``."""
    d = np.asarray(sched, dtype=float)
    if d.ndim == 1:
        d = d[np.newaxis, :]
    if d.shape[1] != market.n_periods:
        raise DimensionError(
            f"schedule has {d.shape[1]} periods, market has {market.n_periods}"
        )
    return market.beta + market.gamma * d.sum(axis=0)


def _profits(d, market, fleet):
    p = prices(market, d)
    per_storage = -(d * p).sum(axis=1) - 0.5 * fleet.eps * (d * d).sum(axis=1)
    return per_storage, p


def storage_profit(i: int, sched, market: MarketParams, fleet: Fleet) -> float:
    d = as_schedule(sched, market, fleet)
    if not 0 <= i < fleet.n:
        raise IndexError(f"storage {i} out of range for a fleet of {fleet.n}")
    p = prices(market, d)
    return float(-(d[i] @ p) - 0.5 * fleet.eps[i] * (d[i] @ d[i]))


def aggregate_profit(sched, market: MarketParams, fleet: Fleet) -> ProfitReport:
    d = as_schedule(sched, market, fleet)
    per_storage, p = _profits(d, market, fleet)
    return ProfitReport(
        per_storage=per_storage,
        aggregate=float(per_storage.sum()),
        per_period_price=p,
    )


def kkt_residual_gc(sched, lam, market: MarketParams, fleet: Fleet) -> float:
    """Largest violation of the grand-coalition stationarity and budget rows.

    Stationarity: ``-beta[t] - 2*gamma[t]*sum_j d[j,t] - eps[i]*d[i,t] + lam[i] = 0``.
    """
    d = as_schedule(sched, market, fleet)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != fleet.n:
        raise DimensionError(f"lambda has {lam.size} entries, fleet has {fleet.n}")
    total = d.sum(axis=0)
    stat = (
        -market.beta[np.newaxis, :]
        - 2.0 * market.gamma[np.newaxis, :] * total[np.newaxis, :]
        - fleet.eps[:, np.newaxis] * d
        + lam[:, np.newaxis]
    )
    budget = d.sum(axis=1)
    return float(max(np.max(np.abs(stat)), np.max(np.abs(budget))))


def kkt_residual_ne(sched, lam, market: MarketParams, fleet: Fleet, acf=None) -> float:
    """Largest violation of the per-player Nash stationarity and budget rows.

    With artificial costs ``(a/2) x**2 + b x`` subtracted from each storage's
    profit the stationarity row reads
    ``-beta - b - gamma*sum_j d[j] - (eps + gamma + a) d[i] + lam[i] = 0``.
    """
    d = as_schedule(sched, market, fleet)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != fleet.n:
        raise DimensionError(f"lambda has {lam.size} entries, fleet has {fleet.n}")
    a = np.zeros_like(d) if acf is None else acf.a
    b = np.zeros_like(d) if acf is None else acf.b
    g = market.gamma[np.newaxis, :]
    stat = (
        -market.beta[np.newaxis, :]
        - b
        - g * d.sum(axis=0)[np.newaxis, :]
        - (fleet.eps[:, np.newaxis] + g + a) * d
        + lam[:, np.newaxis]
    )
    return float(max(np.max(np.abs(stat)), np.max(np.abs(d.sum(axis=1)))))


def budget_residual(sched) -> np.ndarray:
    """Per-storage net energy ``sum_t d[i, t]``; zero for a feasible schedule."""
    return np.asarray(sched, dtype=float).sum(axis=1)
