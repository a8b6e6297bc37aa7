"""Grand-coalition and Nash-equilibrium schedules.

Each outcome is available in closed form (where one exists) and by solving
the stacked KKT linear system. Unknowns are ordered ``d[0,0..n_t-1], ...,
d[n-1, ...], lambda[0..n-1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    Fleet,
    MarketParams,
    ProfitReport,
    aggregate_profit,
    as_schedule,
    storage_profit,
)
from .numerics import numeric_best_response, solve_linear


@dataclass(frozen=True)
class GcSolution:
    sched: np.ndarray
    lam: np.ndarray
    report: ProfitReport


@dataclass(frozen=True)
class NeSolution:
    sched: np.ndarray
    lam: np.ndarray
    report: ProfitReport


def z_weights(market: MarketParams, sum_inv_eps: float, gamma=None) -> np.ndarray:
    """``z[t] = 1 + 2 gamma[t] sum_j 1/eps_j``."""
    gamma = market.gamma if gamma is None else np.asarray(gamma, dtype=float)
    return 1.0 + 2.0 * gamma * sum_inv_eps


def gc_profile(market: MarketParams, sum_inv_eps: float, gamma=None):
    """Per-unit-cost GC profile ``u`` and the common multiplier ``lam``.

    The coalition schedule is ``d[i, t] = u[t] / eps[i]``. Both quantities
    only depend on the market and on ``sum_j 1/eps_j``.
    """
    beta = market.beta
    z = z_weights(market, sum_inv_eps, gamma)
    inv_z = 1.0 / z
    lam = float((beta * inv_z).sum() / inv_z.sum())
    # sum_k (beta[k] - beta[t]) / z[k] == (lam - beta[t]) * sum_k 1/z[k]
    u = (lam - beta) / z
    return u, lam


def gc_closed_form(market: MarketParams, fleet: Fleet) -> GcSolution:
    u, lam = gc_profile(market, fleet.sum_inv_eps)
    sched = u[np.newaxis, :] / fleet.eps[:, np.newaxis]
    return GcSolution(
        sched=sched,
        lam=np.full(fleet.n, lam),
        report=aggregate_profit(sched, market, fleet),
    )


def _assemble(market, fleet, own, cross):
    """Stationarity + budget matrix.

    Row ``(i, t)``: ``own[i, t] * d[i, t] + cross[t] * sum_j d[j, t] + lambda[i]``.
    """
    n, nt = fleet.n, market.n_periods
    size = n * nt + n
    A = np.zeros((size, size))
    rows = np.arange(n * nt).reshape(n, nt)
    for t in range(nt):
        A[np.ix_(rows[:, t], rows[:, t])] = cross[t]
    A[rows, rows] += own
    A[rows, n * nt + np.arange(n)[:, np.newaxis]] = 1.0
    A[n * nt + np.arange(n)[:, np.newaxis], rows] = 1.0
    return A


def _split(x, n, nt):
    return x[: n * nt].reshape(n, nt), x[n * nt :]


def gc_solve_kkt(market: MarketParams, fleet: Fleet) -> GcSolution:
    """Grand coalition from ``-beta - 2 gamma sum_j d_j - eps_i d_i + lambda_i = 0``."""
    n, nt = fleet.n, market.n_periods
    own = -np.broadcast_to(fleet.eps[:, np.newaxis], (n, nt))
    A = _assemble(market, fleet, own, -2.0 * market.gamma)
    rhs = np.concatenate([np.tile(market.beta, n), np.zeros(n)])
    sched, lam = _split(solve_linear(A, rhs), n, nt)
    return GcSolution(sched=sched, lam=lam, report=aggregate_profit(sched, market, fleet))


def ne_solve(market: MarketParams, fleet: Fleet, acf=None) -> NeSolution:
    """Nash equilibrium, optionally under artificial costs ``(a/2) x**2 + b x``.

    Solves ``-beta - b - gamma sum_j d_j - (eps_i + gamma + a) d_i + lambda_i = 0``
    jointly for every storage and period, plus the budget rows.
    """
    n, nt = fleet.n, market.n_periods
    a = np.zeros((n, nt)) if acf is None else as_schedule(acf.a, market, fleet)
    b = np.zeros((n, nt)) if acf is None else as_schedule(acf.b, market, fleet)
    own = -(fleet.eps[:, np.newaxis] + market.gamma[np.newaxis, :] + a)
    A = _assemble(market, fleet, own, -market.gamma)
    rhs = np.concatenate([(market.beta[np.newaxis, :] + b).reshape(-1), np.zeros(n)])
    sched, lam = _split(solve_linear(A, rhs), n, nt)
    return NeSolution(sched=sched, lam=lam, report=aggregate_profit(sched, market, fleet))


def ne_closed_form_two_period(gamma_effective: float, fleet) -> NeSolution:
    """Two-period Nash equilibrium for a unit price spread.

    ``d_i = 1 / ((2 eps_i + gamma) (1 + gamma sum_j 1/(2 eps_j + gamma)))``.
    ``fleet`` may be a :class:`Fleet` or a bare array of cost coefficients;
    zero coefficients are accepted here (they only serve as a profit bound).
    """
    if not isinstance(fleet, Fleet):
        fleet = Fleet(fleet, allow_zero=True)
    g = float(gamma_effective)
    w = 1.0 / (2.0 * fleet.eps + g)
    d = w / (1.0 + g * w.sum())
    sched = np.column_stack([d, -d])
    market = MarketParams.two_period(g)
    report = aggregate_profit(sched, market, fleet)
    # multiplier of the first-period stationarity row
    lam = market.beta[0] + market.gamma[0] * d.sum() + (fleet.eps + market.gamma[0]) * d
    return NeSolution(sched=sched, lam=lam, report=report)


def identical_fleet_profits(n_values, eps: float = 1.0, gamma_effective: float = 1.0):
    """Aggregate GC and NE profits of ``n`` identical storages, two periods.

    Vectorized over ``n_values``. Substituting the closed-form schedules
    into ``n * (d - gamma n d**2 - eps d**2)`` gives ``n d / 2`` for the
    coalition and ``n (eps + gamma) d**2`` for the equilibrium, which avoid
    the cancellation of the raw expression.
    """
    n = np.asarray(n_values, dtype=float)
    g = float(gamma_effective)
    d_gc = 1.0 / (2.0 * (eps + g * n))
    d_ne = 1.0 / (2.0 * eps + g + g * n)
    gc = 0.5 * n * d_gc
    ne = n * (eps + g) * d_ne**2
    return gc, ne


def verify_equilibrium(sched, market: MarketParams, fleet: Fleet, acf=None) -> float:
    """Largest profit any storage gains by deviating unilaterally.

    Each storage's deviation payoff includes its artificial cost when ``acf``
    is given. Nonpositive (up to rounding) for an equilibrium.
    """
    d = as_schedule(sched, market, fleet)
    gains = []
    for i in range(fleet.n):
        current = _payoff(i, d, market, fleet, acf)
        dev = d.copy()
        dev[i] = numeric_best_response(i, d, market, fleet, extra_cost=acf)
        gains.append(_payoff(i, dev, market, fleet, acf) - current)
    return float(max(gains))


def _payoff(i, d, market, fleet, acf):
    value = storage_profit(i, d, market, fleet)
    if acf is not None:
        x = d[i]
        value -= float((0.5 * acf.a[i] * x) @ x + acf.b[i] @ x)
    return value
