"""Scenario configuration, price-series ingestion and the seeded generator.

A scenario is one JSON document::

    {
      "experiment": "fig4",
      "market": {"beta_csv": "builtin:pjm_like_24",
                 "gamma_rule": {"mean": 0.05, "jitter": 0.1, "seed": 11}},
      "fleet": {"random": {"n": 20, "low": 0.5, "high": 2.0, "seed": 7}},
      "tariff_bounds": [-1.0, 1.0],
      "delta": 0.95,
      "sweep": {},
      "output_dir": "out/fig4"
    }

See the README for every key.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .model import Fleet, MarketParams

EXPERIMENTS = ("fig1", "fig2", "fig3", "fig4", "fig5", "coop-region", "bargain")
BUILTIN_PREFIX = "builtin:"

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 stream; ``uniform`` uses the top 53 bits of each output."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * ((self.next_u64() >> 11) * 2.0**-53)


def load_prices_csv(path) -> np.ndarray:
    """Read a ``period,beta`` file with contiguous 0-based periods."""
    text = _read_text(path)
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["period", "beta"]:
        raise ParseError(1, "expected header 'period,beta'")
    seen = set()
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(lineno, f"expected 2 fields, got {len(row)}")
        try:
            period = int(row[0])
        except ValueError:
            raise ParseError(lineno, f"period {row[0]!r} is not an integer") from None
        try:
            beta = float(row[1])
        except ValueError:
            raise ParseError(lineno, f"beta {row[1]!r} is not a number") from None
        if not math.isfinite(beta):
            raise ParseError(lineno, "beta must be finite")
        if period in seen:
            raise ParseError(lineno, f"duplicate period {period}")
        if period != len(values):
            raise ParseError(lineno, f"expected period {len(values)}, got {period}")
        seen.add(period)
        values.append(beta)
    if len(values) < 2:
        raise ParseError(len(rows), f"need at least 2 periods, got {len(values)}")
    return np.array(values)


def _read_text(path) -> str:
    path = str(path)
    if path.startswith(BUILTIN_PREFIX):
        name = path[len(BUILTIN_PREFIX) :]
        try:
            return resources.files("storagecoop.data").joinpath(f"{name}.csv").read_text()
        except FileNotFoundError:
            raise ConfigError(f"unknown builtin price series {name!r}") from None
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _only(mapping, keys, where):
    present = [k for k in keys if mapping.get(k) is not None]
    if len(present) != 1:
        raise ConfigError(f"{where}: exactly one of {', '.join(keys)} is required, got {present or 'none'}")
    return present[0]


def _reject_unknown(mapping, allowed, where):
    extra = sorted(set(mapping) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")


def _floats(values, where):
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a list of numbers") from None


def _seed(value, where):
    if value is None:
        raise ConfigError(f"{where}: seed is mandatory")
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
        raise ConfigError(f"{where}: seed must be an unsigned 64-bit integer")
    return value


@dataclass(frozen=True)
class GammaRule:
    """``gamma[t] = c * beta[t] * (1 + j[t])`` with ``j[t] ~ U[-jitter, jitter]``.

    ``c`` is chosen so that the mean of ``gamma`` equals ``mean``.
    """

    mean: float
    seed: int
    jitter: float = 0.1

    def apply(self, beta: np.ndarray) -> np.ndarray:
        rng = SplitMix64(self.seed)
        shape = np.array([b * (1.0 + rng.uniform(-self.jitter, self.jitter)) for b in beta])
        return shape * (self.mean / shape.mean())


@dataclass(frozen=True)
class MarketSpec:
    beta: tuple | None = None
    beta_csv: str | None = None
    gamma: tuple | None = None
    gamma_rule: GammaRule | None = None
    gamma_effective: float | None = None

    @classmethod
    def from_dict(cls, d) -> "MarketSpec":
        if not isinstance(d, dict):
            raise ConfigError("market must be an object")
        _reject_unknown(d, ("beta", "beta_csv", "gamma", "gamma_rule", "gamma_effective"), "market")
        if d.get("gamma_effective") is not None:
            clash = [k for k in ("beta", "beta_csv", "gamma", "gamma_rule") if d.get(k) is not None]
            if clash:
                raise ConfigError(f"market: gamma_effective excludes {clash}")
            return cls(gamma_effective=float(d["gamma_effective"]))
        _only(d, ("beta", "beta_csv"), "market")
        _only(d, ("gamma", "gamma_rule"), "market")
        rule = None
        if d.get("gamma_rule") is not None:
            r = d["gamma_rule"]
            _reject_unknown(r, ("mean", "jitter", "seed"), "market.gamma_rule")
            if "mean" not in r:
                raise ConfigError("market.gamma_rule: mean is required")
            rule = GammaRule(
                mean=float(r["mean"]),
                seed=_seed(r.get("seed"), "market.gamma_rule"),
                jitter=float(r.get("jitter", 0.1)),
            )
        return cls(
            beta=None if d.get("beta") is None else tuple(_floats(d["beta"], "market.beta")),
            beta_csv=d.get("beta_csv"),
            gamma=None if d.get("gamma") is None else tuple(_floats(d["gamma"], "market.gamma")),
            gamma_rule=rule,
        )

    def to_dict(self) -> dict:
        if self.gamma_effective is not None:
            return {"gamma_effective": self.gamma_effective}
        out = {}
        if self.beta is not None:
            out["beta"] = list(self.beta)
        else:
            out["beta_csv"] = self.beta_csv
        if self.gamma is not None:
            out["gamma"] = list(self.gamma)
        else:
            r = self.gamma_rule
            out["gamma_rule"] = {"mean": r.mean, "jitter": r.jitter, "seed": r.seed}
        return out

    def build(self, base_dir: Path | None = None) -> MarketParams:
        if self.gamma_effective is not None:
            return MarketParams.two_period(self.gamma_effective)
        if self.beta is not None:
            beta = np.array(self.beta)
        else:
            path = self.beta_csv
            if not path.startswith(BUILTIN_PREFIX) and base_dir is not None:
                path = str(base_dir / path)
            beta = load_prices_csv(path)
        gamma = np.array(self.gamma) if self.gamma is not None else self.gamma_rule.apply(beta)
        try:
            return MarketParams(beta, gamma)
        except ValueError as exc:
            raise ConfigError(f"market: {exc}") from None


@dataclass(frozen=True)
class RandomFleet:
    n: int
    low: float
    high: float
    seed: int


@dataclass(frozen=True)
class FleetSpec:
    eps: tuple | None = None
    random: RandomFleet | None = None

    @classmethod
    def from_dict(cls, d) -> "FleetSpec":
        if not isinstance(d, dict):
            raise ConfigError("fleet must be an object")
        _reject_unknown(d, ("eps", "random"), "fleet")
        key = _only(d, ("eps", "random"), "fleet")
        if key == "eps":
            return cls(eps=tuple(_floats(d["eps"], "fleet.eps")))
        r = d["random"]
        _reject_unknown(r, ("n", "low", "high", "seed"), "fleet.random")
        try:
            spec = RandomFleet(
                n=int(r["n"]), low=float(r["low"]), high=float(r["high"]),
                seed=_seed(r.get("seed"), "fleet.random"),
            )
        except KeyError as exc:
            raise ConfigError(f"fleet.random: missing {exc}") from None
        if spec.n < 1 or not 0 < spec.low <= spec.high:
            raise ConfigError("fleet.random: need n >= 1 and 0 < low <= high")
        return cls(random=spec)

    def to_dict(self) -> dict:
        if self.eps is not None:
            return {"eps": list(self.eps)}
        r = self.random
        return {"random": {"n": r.n, "low": r.low, "high": r.high, "seed": r.seed}}

    def build(self) -> Fleet:
        if self.eps is not None:
            eps = np.array(self.eps)
        else:
            rng = SplitMix64(self.random.seed)
            eps = np.array([rng.uniform(self.random.low, self.random.high) for _ in range(self.random.n)])
        try:
            return Fleet(eps)
        except ValueError as exc:
            raise ConfigError(f"fleet: {exc}") from None


_SWEEP_KEYS = ("n_max", "eps", "rel_error", "points", "storage")


@dataclass(frozen=True)
class ScenarioConfig:
    experiment: str
    market: MarketSpec
    fleet: FleetSpec | None = None
    tariff_bounds: tuple = (-1.0, 1.0)
    delta: float = 0.95
    sweep: dict = field(default_factory=dict)
    output_dir: str | None = None
    base_dir: Path | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_dict(cls, d, base_dir: Path | None = None) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(
            d, ("experiment", "market", "fleet", "tariff_bounds", "delta", "sweep", "output_dir"), "config"
        )
        exp = d.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
        if "market" not in d:
            raise ConfigError("market is required")
        bounds = tuple(_floats(d.get("tariff_bounds", (-1.0, 1.0)), "tariff_bounds"))
        if len(bounds) != 2 or bounds[0] > bounds[1]:
            raise ConfigError("tariff_bounds must be [lower, upper] with lower <= upper")
        delta = float(d.get("delta", 0.95))
        if not 0 < delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        sweep = d.get("sweep", {}) or {}
        if not isinstance(sweep, dict):
            raise ConfigError("sweep must be an object")
        _reject_unknown(sweep, _SWEEP_KEYS, "sweep")
        fleet = d.get("fleet")
        if fleet is None and exp not in ("fig1", "fig2", "fig3"):
            raise ConfigError(f"experiment {exp} needs a fleet")
        return cls(
            experiment=exp,
            market=MarketSpec.from_dict(d["market"]),
            fleet=None if fleet is None else FleetSpec.from_dict(fleet),
            tariff_bounds=bounds,
            delta=delta,
            sweep=dict(sorted(sweep.items())),
            output_dir=d.get("output_dir"),
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment, "market": self.market.to_dict()}
        if self.fleet is not None:
            out["fleet"] = self.fleet.to_dict()
        out["tariff_bounds"] = list(self.tariff_bounds)
        out["delta"] = self.delta
        out["sweep"] = dict(self.sweep)
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def build_market(self) -> MarketParams:
        return self.market.build(self.base_dir)

    def build_fleet(self) -> Fleet:
        if self.fleet is None:
            raise ConfigError("this scenario has no fleet")
        return self.fleet.build()
