"""Aggregator-storage stage game, grim-trigger repetition and cooperation regions.

The aggregator buys on the wholesale market at the coalition prices ``p`` and
resells to storage ``i`` at its own tariff ``tau``. Negotiated tariffs are
parametrized by a per-stage transfer ``theta``::

    tau(theta) = p + theta * d* / |d*|**2

so that the aggregator earns exactly ``theta`` per stage from storage ``i``
while the storage keeps its coalition profit minus ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import GcSolution
from .errors import BoxViolation, NonConvergence
from .model import Fleet, MarketParams
from .numerics import IntervalSet, solve_quadratic_le_zero

TIE_SLACK = 1e-12


@dataclass(frozen=True)
class TariffBounds:
    """Price box ``lower <= tau[t] <= upper``; scalars or per-period arrays."""

    lower: float | np.ndarray = -1.0
    upper: float | np.ndarray = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
            raise ValueError("tariff lower bound exceeds upper bound")

    def arrays(self, n_periods: int):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n_periods,))
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n_periods,))
        return lo, hi

    def contains(self, tariff, tol: float = 0.0) -> bool:
        tau = np.asarray(tariff, dtype=float)
        lo, hi = self.arrays(tau.shape[-1])
        return bool(np.all(tau >= lo - tol) and np.all(tau <= hi + tol))

    def midpoint(self, n_periods: int) -> np.ndarray:
        lo, hi = self.arrays(n_periods)
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Tariff:
    tau: np.ndarray
    bounds: TariffBounds

    def __post_init__(self):
        tau = np.array(self.tau, dtype=float, ndmin=2)
        if not self.bounds.contains(tau):
            raise BoxViolation("tariff entries leave the price bounds")
        tau.setflags(write=False)
        object.__setattr__(self, "tau", tau)


@dataclass(frozen=True)
class RepeatedGameParams:
    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"discount factor must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class CooperationRegion:
    """Transfer values sustaining cooperation with one storage.

    ``region`` is the intersection of the storage condition, the aggregator
    condition and the box-feasible transfers.
    """

    storage: IntervalSet
    aggregator: IntervalSet
    box: IntervalSet
    region: IntervalSet

    @property
    def is_empty(self) -> bool:
        return self.region.is_empty


# -- stage game ---------------------------------------------------------------


def storage_stage_profit(tariff, row, eps_i: float) -> float:
    tau, d = np.asarray(tariff, float), np.asarray(row, float)
    return float(-(tau @ d) - 0.5 * eps_i * (d @ d))


def aggregator_stage_profit(tariff, row, market_prices) -> float:
    tau, d = np.asarray(tariff, float), np.asarray(row, float)
    return float((tau - np.asarray(market_prices, float)) @ d)


def storage_best_response_to_tariff(i: int, tariff, fleet: Fleet) -> np.ndarray:
    """``d[t] = (mean(tau) - tau[t]) / eps_i``; balanced by construction."""
    tau = np.asarray(tariff, dtype=float)
    return (tau.mean() - tau) / fleet.eps[i]


def aggregator_defection_tariff(committed, bounds: TariffBounds) -> np.ndarray:
    """Bang-bang tariff maximizing one stage of profit against a fixed schedule.

    Charges the upper bound where the storage buys, the lower bound where it
    sells, and the bound midpoint where it does not trade.
    """
    d = np.asarray(committed, dtype=float)
    lo, hi = bounds.arrays(d.size)
    return np.where(d > 0, hi, np.where(d < 0, lo, 0.5 * (lo + hi)))


def singleshot_equilibrium_check(
    tariff,
    row,
    fleet: Fleet,
    i: int,
    bounds: TariffBounds,
    atol: float = 1e-12,
) -> bool:
    """Whether ``(tariff, row)`` are mutual best responses in the stage game."""
    tau, d = np.asarray(tariff, float), np.asarray(row, float)
    if not bounds.contains(tau, atol):
        return False
    if np.max(np.abs(d - storage_best_response_to_tariff(i, tau, fleet))) > atol:
        return False
    lo, hi = bounds.arrays(tau.size)
    buy, sell = d > atol, d < -atol
    return bool(np.all(np.abs(tau[buy] - hi[buy]) <= atol) and np.all(np.abs(tau[sell] - lo[sell]) <= atol))


def best_response_dynamics(
    i: int,
    tariff,
    fleet: Fleet,
    bounds: TariffBounds,
    step: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
):
    """Iterate the stage game until trading stops.

    The storage plays its exact best response; the aggregator moves its
    tariff along its profit gradient ``d`` with step ``step`` (default
    ``eps_i / 2``). Exact bang-bang replies by the aggregator cycle instead of
    converging.

    Returns:
        ``(tariff, row, iterations)`` with ``max|row| <= tol``.
    """
    tau = np.array(tariff, dtype=float)
    if not bounds.contains(tau):
        raise BoxViolation("starting tariff leaves the price bounds")
    eta = 0.5 * fleet.eps[i] if step is None else float(step)
    lo, hi = bounds.arrays(tau.size)
    for k in range(max_iter):
        d = storage_best_response_to_tariff(i, tau, fleet)
        if np.max(np.abs(d)) <= tol:
            return tau, d, k
        tau = np.clip(tau + eta * d, lo, hi)
    raise NonConvergence(f"stage-game dynamics did not settle in {max_iter} iterations")


# -- transfer family ----------------------------------------------------------


def _direction(i, gc):
    d = np.asarray(gc.sched[i], dtype=float)
    norm2 = float(d @ d)
    if norm2 == 0.0:
        raise ValueError(f"storage {i} does not trade in the coalition schedule")
    return d / norm2


def transfer_box_interval(i: int, gc: GcSolution, bounds: TariffBounds) -> IntervalSet:
    """Transfers ``theta`` whose tariff stays inside ``bounds``."""
    p = gc.report.per_period_price
    v = _direction(i, gc)
    lo_b, hi_b = bounds.arrays(p.size)
    lo, hi = -math.inf, math.inf
    for pt, vt, l, h in zip(p, v, lo_b, hi_b):
        if vt > 0:
            lo, hi = max(lo, (l - pt) / vt), min(hi, (h - pt) / vt)
        elif vt < 0:
            lo, hi = max(lo, (h - pt) / vt), min(hi, (l - pt) / vt)
        elif not l <= pt <= h:
            return IntervalSet.empty()
    return IntervalSet.closed(lo, hi)


def transfer_tariff(
    i: int,
    theta: float,
    gc: GcSolution,
    market: MarketParams,
    bounds: TariffBounds | None = None,
) -> np.ndarray:
    """Tariff that moves ``theta`` per stage from storage ``i`` to the aggregator.

    Raises:
        BoxViolation: if the tariff leaves ``bounds``; ``.feasible`` holds the
            admissible transfer interval.
    """
    tau = gc.report.per_period_price + theta * _direction(i, gc)
    if bounds is not None and not bounds.contains(tau, 1e-12):
        box = transfer_box_interval(i, gc, bounds)
        raise BoxViolation(
            f"transfer {theta} puts the tariff outside its bounds",
            feasible=None if box.is_empty else box,
        )
    return tau


def tariff_spread(tariff) -> float:
    """Second-period minus first-period price of a two-period tariff."""
    tau = np.asarray(tariff, dtype=float)
    return float(tau[1] - tau[0])


def joint_stage_profit(i: int, gc: GcSolution) -> float:
    """Storage ``i``'s coalition profit at market prices; the surplus to share."""
    return float(gc.report.per_storage[i])


# -- repeated game ------------------------------------------------------------


def longterm_profits(
    i: int,
    tariff,
    gc: GcSolution,
    fleet: Fleet,
    params: RepeatedGameParams,
    bounds: TariffBounds,
    defect_time_storage: float = math.inf,
    defect_time_aggregator: float = math.inf,
):
    """Discounted profits ``(storage, aggregator)`` under grim trigger.

    Both cooperate (coalition schedule, agreed tariff) until the earlier
    defection stage. In that stage the defector plays its one-shot best
    reply against the other's cooperative action (both defect if the times
    coincide); every later stage is the zero-profit stage equilibrium.
    """
    delta = params.delta
    tau = np.asarray(tariff, dtype=float)
    d = gc.sched[i]
    p = gc.report.per_period_price
    eps = fleet.eps[i]
    coop_s = storage_stage_profit(tau, d, eps)
    coop_a = aggregator_stage_profit(tau, d, p)

    k = min(defect_time_storage, defect_time_aggregator)
    if math.isinf(k):
        return coop_s / (1 - delta), coop_a / (1 - delta)
    if k < 0 or k != int(k):
        raise ValueError("defection times must be non-negative integers or inf")

    tau_k = aggregator_defection_tariff(d, bounds) if defect_time_aggregator == k else tau
    d_k = storage_best_response_to_tariff(i, tau, fleet) if defect_time_storage == k else d
    prefix = (1 - delta**k) / (1 - delta)
    weight = delta**k
    return (
        prefix * coop_s + weight * storage_stage_profit(tau_k, d_k, eps),
        prefix * coop_a + weight * aggregator_stage_profit(tau_k, d_k, p),
    )


def sustainable_storage(
    i: int,
    tariff,
    gc: GcSolution,
    fleet: Fleet,
    params: RepeatedGameParams,
) -> bool:
    """``(1 - delta) * profit(defect) <= profit(cooperate)``, ties cooperate."""
    tau = np.asarray(tariff, dtype=float)
    eps = fleet.eps[i]
    cheat = storage_stage_profit(tau, storage_best_response_to_tariff(i, tau, fleet), eps)
    coop = storage_stage_profit(tau, gc.sched[i], eps)
    return (1 - params.delta) * cheat <= coop + TIE_SLACK


def sustainable_aggregator(
    i: int,
    tariff,
    gc: GcSolution,
    params: RepeatedGameParams,
    bounds: TariffBounds,
) -> bool:
    """Aggregator-side condition for the last storage it still cooperates with.

    Trades with storages it already defected on earn nothing, so the test
    reduces to storage ``i`` alone, at coalition market prices.
    """
    d = gc.sched[i]
    p = gc.report.per_period_price
    coop = aggregator_stage_profit(tariff, d, p)
    cheat = aggregator_stage_profit(aggregator_defection_tariff(d, bounds), d, p)
    return coop + TIE_SLACK >= (1 - params.delta) * cheat


def cooperation_region_theta(
    i: int,
    gc: GcSolution,
    fleet: Fleet,
    params: RepeatedGameParams,
    bounds: TariffBounds,
) -> CooperationRegion:
    """Transfers along ``tau(theta)`` for which both sides keep cooperating.

    The storage condition is quadratic in ``theta`` (its one-shot defection
    profit is ``|tau - mean(tau)|**2 / (2 eps)``), the aggregator condition is
    the half-line ``theta >= (1 - delta) * cheat`` since its bang-bang
    defection does not depend on the agreed tariff. An empty region is a
    valid outcome.
    """
    one_minus = 1 - params.delta
    eps = fleet.eps[i]
    v = _direction(i, gc)
    p = gc.report.per_period_price
    pc = p - p.mean()
    total = joint_stage_profit(i, gc)
    storage = solve_quadratic_le_zero(
        one_minus * float(v @ v) / (2 * eps),
        one_minus * float(pc @ v) / eps + 1.0,
        one_minus * float(pc @ pc) / (2 * eps) - total,
    )
    d = gc.sched[i]
    cheat = aggregator_stage_profit(aggregator_defection_tariff(d, bounds), d, p)
    aggregator = IntervalSet(((one_minus * cheat, math.inf),))
    box = transfer_box_interval(i, gc, bounds)
    return CooperationRegion(
        storage=storage,
        aggregator=aggregator,
        box=box,
        region=storage & aggregator & box,
    )
