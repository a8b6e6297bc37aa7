"""Artificial cost functions that turn the Nash equilibrium into the coalition optimum.

A storage facing artificial costs pays ``(a[i,t]/2) x**2 + b[i,t] x`` on top of
its operating cost in every period. The coefficients are chosen so that

* the resulting Nash equilibrium equals the grand-coalition schedule, and
* the artificial cost is zero at that schedule (revenue neutrality).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .equilibrium import gc_closed_form, gc_profile, ne_solve
from .errors import DegeneratePeriod, DimensionError, StorageCoopError
from .model import Fleet, MarketParams
from .numerics import solve_linear

ZERO_TARGET_RTOL = 1e-12


class ConcavityWarning(UserWarning):
    """A synthesized cost violates ``eps_i + gamma[t] + a[i,t] > 0``."""


@dataclass(frozen=True, eq=False)
class AcfSet:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float, ndmin=2)
        b = np.array(self.b, dtype=float, ndmin=2)
        if a.shape != b.shape:
            raise DimensionError(f"a has shape {a.shape}, b has shape {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("artificial cost coefficients must be finite")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def zeros(cls, n: int, n_periods: int) -> "AcfSet":
        return cls(np.zeros((n, n_periods)), np.zeros((n, n_periods)))

    @classmethod
    def from_pair(cls, a, b) -> "AcfSet":
        """Per-period form of a two-period cost ``g(x) = a x**2 + b x``.

        The pair cost is charged as ``g1(x) + g2(-x)`` on the first-period
        quantity ``x``, so the quadratic term splits as ``a`` in each period
        and the linear term as ``+b/2`` then ``-b/2``.
        """
        a = np.asarray(a, dtype=float).reshape(-1)
        b = np.asarray(b, dtype=float).reshape(-1)
        return cls(np.column_stack([a, a]), np.column_stack([b / 2.0, -b / 2.0]))

    def cost(self, sched) -> np.ndarray:
        """Artificial cost of every storage in every period."""
        d = np.asarray(sched, dtype=float)
        if d.shape != self.a.shape:
            raise DimensionError(f"schedule has shape {d.shape}, ACF has {self.a.shape}")
        return 0.5 * self.a * d * d + self.b * d


class PeriodPartition(NamedTuple):
    t1: tuple
    t2: tuple


def acf_coefficients(eps_i: float, gamma: float, sum_inv_eps: float):
    """Two-period coefficients ``(a, b)`` of ``g(x) = a x**2 + b x`` for one storage.

    Needs only the storage's own cost coefficient, the public price slope and
    the fleet aggregate ``sum_j 1/eps_j``.
    """
    a = -gamma * (1.0 - eps_i * sum_inv_eps)
    b = -a / (2.0 * eps_i * (1.0 + gamma * sum_inv_eps))
    return a, b


def acf_two_period_pair(gamma_effective: float, fleet: Fleet):
    """Arrays of pair coefficients ``(a_i, b_i)`` for the whole fleet."""
    s = fleet.sum_inv_eps
    pairs = [acf_coefficients(e, gamma_effective, s) for e in fleet.eps]
    a, b = (np.array(v) for v in zip(*pairs))
    return a, b


def acf_two_period(gamma_effective: float, fleet: Fleet) -> AcfSet:
    """Two-period artificial costs in per-period form (see :meth:`AcfSet.from_pair`)."""
    if gamma_effective <= 0:
        raise ValueError("gamma must be positive")
    return AcfSet.from_pair(*acf_two_period_pair(gamma_effective, fleet))


def period_partition(market: MarketParams, fleet: Fleet) -> PeriodPartition:
    """Split periods into buying (``beta[t] < lambda*``) and the rest; ties sell."""
    _, lam = gc_profile(market, fleet.sum_inv_eps)
    buy = market.beta < lam
    t = np.arange(market.n_periods)
    return PeriodPartition(tuple(int(k) for k in t[buy]), tuple(int(k) for k in t[~buy]))


def acf_closed_form(
    market: MarketParams,
    fleet: Fleet,
    gamma=None,
    sum_inv_eps: float | None = None,
) -> AcfSet:
    """Per-period revenue-neutral costs from the aggregate-only closed form.

    ``a[i,t] = -2 gamma[t] (1 - eps_i S)`` and ``b[i,t] = -a[i,t] d*[i,t] / 2``
    with ``d*`` the coalition schedule and ``S = sum_j 1/eps_j``. ``gamma`` and
    ``sum_inv_eps`` override the designer's beliefs about those parameters;
    the storage's own ``eps_i`` is always exact.
    """
    gamma = market.gamma if gamma is None else np.broadcast_to(np.asarray(gamma, float), market.gamma.shape)
    s = fleet.sum_inv_eps if sum_inv_eps is None else float(sum_inv_eps)
    u, _ = gc_profile(market, s, gamma)
    eps = fleet.eps[:, np.newaxis]
    a = -2.0 * gamma[np.newaxis, :] * (1.0 - eps * s)
    target = u[np.newaxis, :] / eps
    return AcfSet(a, -0.5 * a * target)


def assemble_acf_system(
    market: MarketParams,
    fleet: Fleet,
    coefficients,
):
    """Stacked linear system in ``(d, b, lambda)``.

    Rows, in order: the artificial-equilibrium stationarity rows
    ``-beta - gamma sum_j d_j - (eps_i + gamma) d_i + c[t] b_i + lambda_i = 0``,
    the coalition stationarity rows, and the budget rows. ``coefficients[t]``
    is ``c[t]``, the multiple of ``b`` left after eliminating ``a d`` through
    the neutrality rule of that period.
    """
    n, nt = fleet.n, market.n_periods
    m = n * nt
    size = 2 * m + n
    A = np.zeros((size, size))
    rhs = np.zeros(size)
    idx = np.arange(m).reshape(n, nt)  # d[i,t] column and row offset
    gamma, eps = market.gamma, fleet.eps
    c = np.asarray(coefficients, dtype=float)
    for t in range(nt):
        col = idx[:, t]
        A[np.ix_(col, col)] = -gamma[t]
        A[np.ix_(m + col, col)] = -2.0 * gamma[t]
        A[col, col] += -(eps + gamma[t])
        A[m + col, col] += -eps
        A[col, m + col] = c[t]
    lam_cols = 2 * m + np.arange(n)[:, np.newaxis]
    A[idx, lam_cols] = 1.0
    A[m + idx, lam_cols] = 1.0
    A[2 * m + np.arange(n)[:, np.newaxis], idx] = 1.0
    rhs[:m] = np.tile(market.beta, n)
    rhs[m : 2 * m] = rhs[:m]
    return A, rhs


def acf_multi_period(market: MarketParams, fleet: Fleet, sell_coefficient: float = 1.0) -> AcfSet:
    """Revenue-neutral artificial costs for any number of periods.

    Solves the stacked system of :func:`assemble_acf_system` and recovers
    ``a`` from ``a d = -(1 + c) b``. Per-period neutrality ``(a/2) d + b = 0``
    gives ``c = 1`` in every period. ``sell_coefficient`` sets ``c`` on the
    selling periods; ``-3`` pairs them with the rule ``a d - 2 b = 0``, which
    keeps the equilibrium aligned but is not revenue neutral.

    Raises:
        DegeneratePeriod: if the coalition schedule is identically zero, or a
            zero-target period cannot be made consistent.
        SingularMatrix: propagated from the linear solve.
    """
    n, nt = fleet.n, market.n_periods
    gc = gc_closed_form(market, fleet)
    scale = max(1.0, float(np.max(np.abs(market.beta))))
    zero = np.abs(gc.sched) <= ZERO_TARGET_RTOL * scale
    if np.all(zero):
        raise DegeneratePeriod("coalition schedule is identically zero; there is nothing to align")

    part = period_partition(market, fleet)
    _check_partition(gc.sched, part, zero)
    c = np.ones(nt)
    c[list(part.t2)] = sell_coefficient

    A, rhs = assemble_acf_system(market, fleet, c)
    x = solve_linear(A, rhs)
    m = n * nt
    d = x[:m].reshape(n, nt)
    b = x[m : 2 * m].reshape(n, nt)
    if np.max(np.abs(d - gc.sched)) > 1e-8 * scale:
        raise StorageCoopError("linear system did not reproduce the coalition schedule")

    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(zero, 0.0, -(1.0 + c[np.newaxis, :]) * b / gc.sched)
    b = np.where(zero, 0.0, b)
    acf = AcfSet(a, b)

    if np.any(zero):
        check = ne_solve(market, fleet, acf)
        if np.max(np.abs(check.sched - gc.sched)) > 1e-8 * scale:
            raise DegeneratePeriod("zero-target periods break the equilibrium alignment")

    margin = fleet.eps[:, np.newaxis] + market.gamma[np.newaxis, :] + acf.a
    if np.any(margin <= 0):
        warnings.warn(
            f"eps + gamma + a is not positive for {int(np.sum(margin <= 0))} entries",
            ConcavityWarning,
            stacklevel=2,
        )
    return acf


def _check_partition(sched, part, zero):
    t1 = list(part.t1)
    t2 = list(part.t2)
    if np.any(sched[:, t1] <= 0) or np.any((sched[:, t2] > 0) & ~zero[:, t2]):
        raise StorageCoopError("coalition schedule signs disagree with the period partition")


def revenue_neutrality_check(acf: AcfSet, sched) -> np.ndarray:
    """Artificial cost ``g[i,t](d[i,t])`` of every storage and period."""
    return acf.cost(sched)


class SensitivityResult(NamedTuple):
    profit_true_acf: float
    profit_misestimated_acf: float
    profit_gc: float
    profit_ne: float


def sensitivity_experiment(
    market: MarketParams,
    fleet: Fleet,
    which: str,
    rel_error: float,
) -> SensitivityResult:
    """Aggregate profit when the cost designer misjudges one aggregate parameter.

    ``which`` is ``"sum_inv_eps"`` or ``"gamma"``; the believed value is the
    true one times ``1 + rel_error``. Synthesis uses the belief, the resulting
    equilibrium and all profits use the true market.
    """
    if not abs(rel_error) < 1:
        raise ValueError("relative error must lie in (-1, 1)")
    if which == "sum_inv_eps":
        believed = acf_closed_form(market, fleet, sum_inv_eps=fleet.sum_inv_eps * (1 + rel_error))
    elif which == "gamma":
        believed = acf_closed_form(market, fleet, gamma=market.gamma * (1 + rel_error))
    else:
        raise ValueError(f"unknown parameter {which!r}; expected 'sum_inv_eps' or 'gamma'")
    exact = acf_closed_form(market, fleet)
    return SensitivityResult(
        profit_true_acf=ne_solve(market, fleet, exact).report.aggregate,
        profit_misestimated_acf=ne_solve(market, fleet, believed).report.aggregate,
        profit_gc=gc_closed_form(market, fleet).report.aggregate,
        profit_ne=ne_solve(market, fleet).report.aggregate,
    )
