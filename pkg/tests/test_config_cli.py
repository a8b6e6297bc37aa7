import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storagecoop.cli import main
from storagecoop.config import GammaRule, ScenarioConfig, SplitMix64, load_prices_csv
from storagecoop.errors import ConfigError, ParseError
from storagecoop.experiments import format_value, render_csv

CONFIGS = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"


def test_splitmix64_reference_vector():
    g = SplitMix64(1234567)
    assert [g.next_u64() for _ in range(3)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
    ]


@given(st.integers(0, 2**64 - 1))
def test_splitmix64_uniform_range_and_replay(seed):
    a, b = SplitMix64(seed), SplitMix64(seed)
    xs = [a.uniform(2.0, 3.0) for _ in range(5)]
    assert xs == [b.uniform(2.0, 3.0) for _ in range(5)]
    assert all(2.0 <= x < 3.0 for x in xs)


def test_gamma_rule_mean_and_proportionality():
    beta = np.linspace(20, 60, 24)
    g = GammaRule(mean=0.05, seed=3, jitter=0.1).apply(beta)
    assert g.mean() == pytest.approx(0.05, rel=1e-12)
    ratio = g / beta
    assert ratio.max() / ratio.min() <= 1.1 / 0.9 + 1e-12
    np.testing.assert_array_equal(g, GammaRule(mean=0.05, seed=3, jitter=0.1).apply(beta))


def test_builtin_prices():
    beta = load_prices_csv("builtin:pjm_like_24")
    assert beta.shape == (24,)
    with pytest.raises(ConfigError):
        load_prices_csv("builtin:nope")


@pytest.mark.parametrize(
    "body, line",
    [
        ("time,beta\n0,1\n1,2\n", 1),
        ("period,beta\n0,1\nx,2\n", 3),
        ("period,beta\n0,1\n1,abc\n", 3),
        ("period,beta\n0,1\n1,inf\n", 3),
        ("period,beta\n0,1\n0,2\n", 3),
        ("period,beta\n0,1\n2,2\n", 3),
        ("period,beta\n0,1\n", 2),
        ("period,beta\n0,1,3\n1,2\n", 2),
    ],
)
def test_price_csv_errors(tmp_path, body, line):
    p = tmp_path / "p.csv"
    p.write_text(body)
    with pytest.raises(ParseError) as exc:
        load_prices_csv(p)
    assert exc.value.line == line


def test_price_csv_relative_to_config(tmp_path):
    (tmp_path / "b.csv").write_text("period,beta\n0,1.5\n1,2.5\n2,0.5\n")
    cfg = {"experiment": "fig4", "market": {"beta_csv": "b.csv", "gamma": [1, 1, 1]}, "fleet": {"eps": [1, 2]}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    market = ScenarioConfig.load(tmp_path / "c.json").build_market()
    np.testing.assert_array_equal(market.beta, [1.5, 2.5, 0.5])


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    cfg = ScenarioConfig.load(path)
    again = ScenarioConfig.from_dict(json.loads(cfg.dumps()), base_dir=cfg.base_dir)
    assert again == cfg
    assert again.dumps() == cfg.dumps()


@pytest.mark.parametrize(
    "patch",
    [
        {"experiment": "fig9"},
        {"delta": 1.0},
        {"tariff_bounds": [1, -1]},
        {"sweep": {"bogus": 1}},
        {"extra": 1},
        {"fleet": {"random": {"n": 3, "low": 1, "high": 2}}},
        {"fleet": {"random": {"n": 3, "low": 1, "high": 2, "seed": -1}}},
        {"market": {"beta": [0, 1], "gamma": [1, 1], "gamma_effective": 1}},
    ],
)
def test_bad_configs(patch):
    base = {"experiment": "bargain", "market": {"gamma_effective": 1}, "fleet": {"eps": [1, 1]}}
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({**base, **patch})


def test_format_value():
    assert format_value(True) == "true"
    assert format_value(np.int64(3)) == "3"
    assert format_value(0.1) == "0.1"
    assert format_value(1 / 3) == repr(1 / 3)
    assert render_csv(("a", "b"), [(1, 0.5)]) == "a,b\n1,0.5\n"


def _write(tmp_path, cfg, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_cli_run_and_determinism(tmp_path):
    cfg = str(CONFIGS / "fig5.json")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "fig5.csv").read_bytes() == (tmp_path / "b" / "fig5.csv").read_bytes()


def test_cli_bargain_delta_override(tmp_path):
    cfg = str(CONFIGS / "bargain.json")
    assert main(["bargain", "--config", cfg, "--out", str(tmp_path), "--delta", "0.01"]) == 0
    lines = (tmp_path / "bargain.csv").read_text().splitlines()
    assert lines[1].endswith("false")
    assert main(["bargain", "--config", cfg, "--out", str(tmp_path), "--delta", "1.5"]) == 2


def test_cli_validate(capsys):
    assert main(["validate", "--config", str(CONFIGS / "fig4.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["experiment"] == "fig4"


def test_cli_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setenv("NO_COLOR", "1")
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    # a flat price curve leaves nothing to trade, so the fig4 self-checks fail
    flat = {"experiment": "fig4", "market": {"beta": [1, 1, 1], "gamma": [1, 1, 1]}, "fleet": {"eps": [1, 2]}}
    assert main(["run", "--config", _write(tmp_path, flat), "--out", str(tmp_path / "o")]) == 3
    # no output directory anywhere
    assert main(["run", "--config", _write(tmp_path, {**flat, "experiment": "bargain"})]) == 2
