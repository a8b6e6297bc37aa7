"""Dense linear solves, quadratic inequalities and a best-response oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NonConvergence, SingularMatrix
from .model import Fleet, MarketParams, as_schedule

PIVOT_RTOL = 1e-12


def solve_linear(A, b) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Raises:
        SingularMatrix: if a pivot is smaller than ``1e-12 * max|A|``.
    """
    A = np.array(A, dtype=float)
    x = np.array(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"matrix must be square, got shape {A.shape}")
    n = A.shape[0]
    if x.shape != (n,):
        raise DimensionError(f"right-hand side has shape {x.shape}, expected ({n},)")
    if n == 0:
        return x
    scale = np.max(np.abs(A))
    threshold = PIVOT_RTOL * scale
    if scale == 0.0:
        raise SingularMatrix("zero matrix")

    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) <= threshold:
            raise SingularMatrix(f"pivot {k} has magnitude {abs(A[p, k]):.3e}")
        if p != k:
            A[[k, p]] = A[[p, k]]
            x[[k, p]] = x[[p, k]]
        # the game matrices are sparse: only touch rows and columns that change
        rows = k + 1 + np.flatnonzero(A[k + 1 :, k])
        if rows.size == 0:
            continue
        cols = k + np.flatnonzero(A[k, k:])
        factors = A[rows, k] / A[k, k]
        if rows.size * cols.size > 0.25 * (n - k) ** 2:
            A[k + 1 :, k:] -= np.outer(A[k + 1 :, k] / A[k, k], A[k, k:])
        else:
            A[np.ix_(rows, cols)] -= np.outer(factors, A[k, cols])
        x[rows] -= factors * x[k]
    if abs(A[n - 1, n - 1]) <= threshold:
        raise SingularMatrix(f"pivot {n - 1} has magnitude {abs(A[n - 1, n - 1]):.3e}")

    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1 :] @ x[k + 1 :]) / A[k, k]
    return x


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of closed, disjoint, sorted intervals over the reals.

    Unbounded pieces use ``-inf`` / ``inf`` as endpoints.
    """

    intervals: tuple = ()

    def __post_init__(self):
        pieces = sorted((float(lo), float(hi)) for lo, hi in self.intervals)
        merged = []
        for lo, hi in pieces:
            if lo > hi or math.isnan(lo) or math.isnan(hi):
                raise ValueError(f"invalid interval [{lo}, {hi}]")
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls(((-math.inf, math.inf),))

    @classmethod
    def closed(cls, lo: float, hi: float) -> "IntervalSet":
        return cls(((lo, hi),)) if lo <= hi else cls.empty()

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def lower(self) -> float:
        return self.intervals[0][0] if self.intervals else math.nan

    @property
    def upper(self) -> float:
        return self.intervals[-1][1] if self.intervals else math.nan

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return any(lo - tol <= x <= hi + tol for lo, hi in self.intervals)

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for lo1, hi1 in self.intervals:
            for lo2, hi2 in other.intervals:
                lo, hi = max(lo1, lo2), min(hi1, hi2)
                if lo <= hi:
                    out.append((lo, hi))
        return IntervalSet(tuple(out))

    __and__ = intersect

    def issubset(self, other: "IntervalSet", tol: float = 0.0) -> bool:
        return all(
            any(lo2 - tol <= lo and hi <= hi2 + tol for lo2, hi2 in other.intervals)
            for lo, hi in self.intervals
        )

    def nearest(self, x: float) -> float:
        """Point of the set closest to ``x`` (ties go to the lower point)."""
        if self.is_empty:
            raise ValueError("empty interval set has no nearest point")
        best, best_dist = math.nan, math.inf
        for lo, hi in self.intervals:
            y = min(max(x, lo), hi)
            if abs(y - x) < best_dist:
                best, best_dist = y, abs(y - x)
        return best

    def map(self, fn) -> "IntervalSet":
        """Image under a monotone function (increasing or decreasing)."""
        out = []
        for lo, hi in self.intervals:
            a, b = fn(lo), fn(hi)
            out.append((min(a, b), max(a, b)))
        return IntervalSet(tuple(out))

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)


def _sorted_roots(a2, a1, a0):
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0:
        return None
    q = -0.5 * (a1 + math.copysign(math.sqrt(disc), a1))
    if q == 0.0:
        return 0.0, 0.0
    r1, r2 = q / a2, a0 / q
    return (r1, r2) if r1 <= r2 else (r2, r1)


def solve_quadratic_le_zero(a2: float, a1: float, a0: float) -> IntervalSet:
    """Exact solution set of ``a2*x**2 + a1*x + a0 <= 0``."""
    inf = math.inf
    if a2 == 0.0:
        if a1 == 0.0:
            return IntervalSet.real_line() if a0 <= 0 else IntervalSet.empty()
        root = -a0 / a1
        return IntervalSet(((-inf, root),)) if a1 > 0 else IntervalSet(((root, inf),))
    roots = _sorted_roots(a2, a1, a0)
    if a2 > 0:
        if roots is None:
            return IntervalSet.empty()
        return IntervalSet((roots,))
    if roots is None:
        return IntervalSet.real_line()
    return IntervalSet(((-inf, roots[0]), (roots[1], inf)))


def numeric_best_response(
    i: int,
    others,
    market: MarketParams,
    fleet: Fleet,
    extra_cost=None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Storage ``i``'s profit-maximizing row with every other row held fixed.

    Projected gradient ascent on the budget hyperplane ``sum_t x[t] = 0``,
    with a Barzilai-Borwein trial step refined by Armijo backtracking. Row
    ``i`` of ``others`` is ignored.

    Args:
        extra_cost: optional object with ``a`` and ``b`` arrays of shape
            ``(n, n_t)``; storage ``i`` additionally pays
            ``(a[i,t]/2) x**2 + b[i,t] x`` in every period.

    Raises:
        NonConvergence: if the projected gradient is not below ``tol`` after
            ``max_iter`` iterations.
    """
    d = as_schedule(others, market, fleet)
    beta, gamma, eps = market.beta, market.gamma, fleet.eps[i]
    rest = d.sum(axis=0) - d[i]
    if extra_cost is None:
        a = np.zeros(market.n_periods)
        b = np.zeros(market.n_periods)
    else:
        a = np.asarray(extra_cost.a, dtype=float)[i]
        b = np.asarray(extra_cost.b, dtype=float)[i]

    curv = 2.0 * gamma + eps + a
    if np.any(curv <= 0):
        raise NonConvergence(f"storage {i} objective is not strictly concave")

    def objective(x):
        return float(-(beta + gamma * (rest + x)) @ x - 0.5 * eps * (x @ x) - (0.5 * a * x) @ x - b @ x)

    def projected_gradient(x):
        g = -beta - gamma * rest - curv * x - b
        return g - g.mean()

    x = np.zeros(market.n_periods)
    g = projected_gradient(x)
    f = objective(x)
    step = 1.0 / float(np.max(curv))
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= tol:
            return x
        gg = g @ g
        while True:
            x_new = x + step * g
            x_new -= x_new.mean()
            f_new = objective(x_new)
            slack = 1e-14 * (1.0 + abs(f))
            if f_new >= f + 1e-4 * step * gg - slack or step < 1e-300:
                break
            step *= 0.5
        g_new = projected_gradient(x_new)
        s, y = x_new - x, g_new - g
        sy = s @ y
        # BB step for ascent: the curvature along s is -(s.y)/(s.s)
        step = float(-(s @ s) / sy) if sy < 0 else 1.0 / float(np.max(curv))
        x, g, f = x_new, g_new, f_new
    raise NonConvergence(f"best response of storage {i} did not converge in {max_iter} iterations")
