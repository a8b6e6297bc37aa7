"""Experiment runners producing CSV tables.

Every runner takes a :class:`~storagecoop.config.ScenarioConfig` and returns
``{filename: (header, rows)}``; :func:`write_tables` renders them with the
shortest round-trip float representation so that output is byte-stable.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path

import numpy as np

from . import acf as acf_mod
from .aggregator import (
    RepeatedGameParams,
    TariffBounds,
    cooperation_region_theta,
    longterm_profits,
    tariff_spread,
    transfer_box_interval,
    transfer_tariff,
)
from .bargaining import nash_bargain
from .config import ScenarioConfig
from .equilibrium import gc_closed_form, identical_fleet_profits, ne_solve
from .errors import ConfigError, StorageCoopError
from .model import Fleet

log = logging.getLogger(__name__)

BUDGET_TOL = 1e-8


class ExperimentCheckFailed(StorageCoopError):
    """A property the experiment asserts about its own output does not hold."""


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_tables(tables, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in sorted(tables.items()):
        path = out / name
        path.write_text(render_csv(header, rows))
        written.append(path)
    return written


def _sweep(cfg, key, default):
    return cfg.sweep.get(key, default)


def run_fig1(cfg: ScenarioConfig):
    g = cfg.market.gamma_effective
    if g is None:
        raise ConfigError("fig1 needs the two-period market (market.gamma_effective)")
    n_max = int(_sweep(cfg, "n_max", 100))
    eps = float(_sweep(cfg, "eps", 1.0))
    n = np.arange(1, n_max + 1)
    gc, ne = identical_fleet_profits(n, eps, g)
    limit = 1.0 / (4.0 * g)
    rows = [(int(k), gc_k, ne_k, limit) for k, gc_k, ne_k in zip(n, gc, ne)]
    return {"fig1.csv": (("n", "profit_gc", "profit_ne", "limit"), rows)}


def _run_sensitivity(cfg, which, name):
    market = cfg.build_market()
    n_max = int(_sweep(cfg, "n_max", 100))
    eps = float(_sweep(cfg, "eps", 1.0))
    err = float(_sweep(cfg, "rel_error", 0.3))
    rows = []
    for n in range(2, n_max + 1):
        fleet = Fleet.identical(n, eps)
        over = acf_mod.sensitivity_experiment(market, fleet, which, err)
        under = acf_mod.sensitivity_experiment(market, fleet, which, -err)
        rows.append((n, over.profit_gc, over.profit_ne, over.profit_misestimated_acf, under.profit_misestimated_acf))
    header = ("n", "profit_gc", "profit_ne", "profit_over", "profit_under")
    return {name: (header, rows)}


def run_fig2(cfg: ScenarioConfig):
    return _run_sensitivity(cfg, "sum_inv_eps", "fig2.csv")


def run_fig3(cfg: ScenarioConfig):
    return _run_sensitivity(cfg, "gamma", "fig3.csv")


def run_fig4(cfg: ScenarioConfig):
    market = cfg.build_market()
    fleet = cfg.build_fleet()
    gc = gc_closed_form(market, fleet)
    ne = ne_solve(market, fleet)
    for label, sol in (("GC", gc), ("NE", ne)):
        worst = float(np.max(np.abs(sol.sched.sum(axis=1))))
        if worst > BUDGET_TOL:
            raise ExperimentCheckFailed(f"{label} budget residual {worst:.3e} exceeds {BUDGET_TOL}")
    p_gc, p_ne = gc.report.per_period_price, ne.report.per_period_price
    if np.var(p_ne, ddof=1) > np.var(p_gc, ddof=1):
        raise ExperimentCheckFailed("NE prices are not flatter than GC prices")
    if not ne.report.aggregate < gc.report.aggregate:
        raise ExperimentCheckFailed("NE aggregate profit is not below the GC profit")
    log.info("fig4: GC profit %.6g, NE profit %.6g", gc.report.aggregate, ne.report.aggregate)
    total_gc, total_ne = gc.sched.sum(axis=0), ne.sched.sum(axis=0)
    periods = range(market.n_periods)
    return {
        "fig4_demand.csv": (
            ("period", "total_ne", "total_gc"),
            [(t, total_ne[t], total_gc[t]) for t in periods],
        ),
        "fig4_price.csv": (
            ("period", "beta", "price_ne", "price_gc"),
            [(t, market.beta[t], p_ne[t], p_gc[t]) for t in periods],
        ),
    }


def _repeated_game_inputs(cfg):
    market = cfg.build_market()
    fleet = cfg.build_fleet()
    bounds = TariffBounds(*cfg.tariff_bounds)
    return market, fleet, bounds, RepeatedGameParams(cfg.delta), gc_closed_form(market, fleet)


def run_fig5(cfg: ScenarioConfig):
    market, fleet, bounds, params, gc = _repeated_game_inputs(cfg)
    if market.n_periods != 2:
        raise ConfigError("fig5 plots the two-period price spread; use a two-period market")
    i = int(_sweep(cfg, "storage", 0))
    points = int(_sweep(cfg, "points", 201))
    box = transfer_box_interval(i, gc, bounds)
    if box.is_empty:
        raise ConfigError("no transfer keeps the tariff inside the bounds")
    # pass-through and equal-split transfers are always part of the grid
    anchors = [t for t in (0.0, 0.5 * float(gc.report.per_storage[i])) if box.contains(t)]
    thetas = sorted(set(np.linspace(box.lower, box.upper, points).tolist()) | set(anchors))
    rows = []
    for theta in thetas:
        tau = transfer_tariff(i, theta, gc, market)
        coop = longterm_profits(i, tau, gc, fleet, params, bounds)
        s_cheat = longterm_profits(i, tau, gc, fleet, params, bounds, defect_time_storage=0)
        a_cheat = longterm_profits(i, tau, gc, fleet, params, bounds, defect_time_aggregator=0)
        rows.append((tariff_spread(tau), coop[0], s_cheat[0], coop[1], a_cheat[1]))
    rows.sort(key=lambda r: r[0])
    header = ("tau_hat", "storage_coop", "storage_cheat", "agg_coop", "agg_cheat")
    return {"fig5.csv": (header, rows)}


def run_coop_region(cfg: ScenarioConfig):
    market, fleet, bounds, params, gc = _repeated_game_inputs(cfg)
    rows = []
    for i in range(fleet.n):
        reg = cooperation_region_theta(i, gc, fleet, params, bounds)
        lo, hi = (reg.region.lower, reg.region.upper) if not reg.is_empty else (math.nan, math.nan)
        if market.n_periods == 2 and not reg.is_empty:
            s = reg.region.map(lambda th: tariff_spread(transfer_tariff(i, th, gc, market)))
            spread = (s.lower, s.upper)
        else:
            spread = (math.nan, math.nan)
        rows.append((
            i, not reg.is_empty, lo, hi,
            reg.storage.lower, reg.storage.upper, reg.aggregator.lower,
            reg.box.lower, reg.box.upper, *spread,
        ))
    header = (
        "storage", "nonempty", "theta_lo", "theta_hi", "storage_lo", "storage_hi",
        "aggregator_lo", "box_lo", "box_hi", "spread_lo", "spread_hi",
    )
    return {"coop_region.csv": (header, rows)}


def run_bargain(cfg: ScenarioConfig):
    market, fleet, bounds, params, gc = _repeated_game_inputs(cfg)
    rows = []
    for i in range(fleet.n):
        out = nash_bargain(i, gc, market, fleet, params, bounds)
        if out.feasible:
            spread = tariff_spread(out.tariff) if market.n_periods == 2 else math.nan
            rows.append((i, out.theta_star, spread, out.normalized_storage_utility,
                         out.normalized_aggregator_utility, True))
        else:
            rows.append((i, math.nan, math.nan, math.nan, math.nan, False))
    header = ("storage", "theta_star", "tau_spread", "utility_storage", "utility_agg", "feasible")
    return {"bargain.csv": (header, rows)}


RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "coop-region": run_coop_region,
    "bargain": run_bargain,
}


def run_experiment(cfg: ScenarioConfig):
    return RUNNERS[cfg.experiment](cfg)
