"""Coalition, Nash and aggregator outcomes for fleets of price-anticipatory energy storages."""

from .acf import AcfSet, acf_closed_form, acf_multi_period, acf_two_period, sensitivity_experiment
from .aggregator import RepeatedGameParams, TariffBounds, cooperation_region_theta, transfer_tariff
from .bargaining import nash_bargain
from .equilibrium import gc_closed_form, gc_solve_kkt, ne_solve, verify_equilibrium
from .model import Fleet, MarketParams, aggregate_profit, storage_profit

__all__ = [
    "AcfSet",
    "Fleet",
    "MarketParams",
    "RepeatedGameParams",
    "TariffBounds",
    "acf_closed_form",
    "acf_multi_period",
    "acf_two_period",
    "aggregate_profit",
    "cooperation_region_theta",
    "gc_closed_form",
    "gc_solve_kkt",
    "nash_bargain",
    "ne_solve",
    "sensitivity_experiment",
    "storage_profit",
    "transfer_tariff",
    "verify_equilibrium",
]

__version__ = "0.1.0"
