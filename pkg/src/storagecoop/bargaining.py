"""Nash bargaining between the aggregator and one storage.

The agreed schedule is the coalition schedule; only the transfer ``theta`` is
negotiated. With the disagreement point at zero and risk-neutral players the
deal maximizes ``storage_share * aggregator_share`` over the cooperation region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aggregator import (
    CooperationRegion,
    RepeatedGameParams,
    TariffBounds,
    cooperation_region_theta,
    joint_stage_profit,
    transfer_tariff,
)
from .equilibrium import GcSolution
from .errors import NoSurplus
from .model import Fleet, MarketParams
from .numerics import IntervalSet


@dataclass(frozen=True)
class BargainOutcome:
    theta_star: float
    tariff: np.ndarray | None
    normalized_storage_utility: float
    feasible: bool
    region: CooperationRegion

    @property
    def normalized_aggregator_utility(self) -> float:
        return 1.0 - self.normalized_storage_utility


def _surplus(i, gc):
    total = joint_stage_profit(i, gc)
    if not total > 0:
        raise NoSurplus(f"storage {i} has no positive coalition profit to share ({total})")
    return total


def normalized_utilities(i: int, theta: float, gc: GcSolution):
    """``(storage, aggregator)`` shares of the joint profit at transfer ``theta``.

    The discount factor scales both longterm utilities by ``1 / (1 - delta)``
    and cancels in the normalization.
    """
    total = _surplus(i, gc)
    storage = (total - theta) / total
    return storage, 1.0 - storage


def bargain_on_interval(total: float, feasible: IntervalSet) -> float:
    """Transfer maximizing the share product over ``feasible``.

    The product is a concave parabola in ``theta`` peaking at ``total / 2``,
    so the answer is the feasible point closest to the equal split.
    """
    return feasible.nearest(0.5 * total)


def nash_bargain(
    i: int,
    gc: GcSolution,
    market: MarketParams,
    fleet: Fleet,
    params: RepeatedGameParams,
    bounds: TariffBounds,
) -> BargainOutcome:
    """Nash bargaining deal with storage ``i``.

    Raises:
        NoSurplus: if the storage's coalition profit is not positive.
    """
    total = _surplus(i, gc)
    region = cooperation_region_theta(i, gc, fleet, params, bounds)
    if region.is_empty:
        return BargainOutcome(
            theta_star=math.nan,
            tariff=None,
            normalized_storage_utility=math.nan,
            feasible=False,
            region=region,
        )
    theta = bargain_on_interval(total, region.region)
    return BargainOutcome(
        theta_star=theta,
        tariff=transfer_tariff(i, theta, gc, market),
        normalized_storage_utility=normalized_utilities(i, theta, gc)[0],
        feasible=True,
        region=region,
    )
