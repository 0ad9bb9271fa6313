import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from voltarget import (
    ConfigurationError,
    DomainError,
    HestonParams,
    MarketParams,
    OptionSpec,
    PortfolioState,
    StrategyConfig,
    ValidationError,
    VolCurve,
    effective_vol,
    mlvts_weight,
    vts_weight,
)
from voltarget.core_types import load_heston, load_vol_curve

CFG = StrategyConfig(sigma_hat=0.2, leverage_cap=2.0)


@pytest.mark.parametrize("sigma, expected", [(0.2, 1.0), (0.4, 0.5), (0.05, 4.0)])
def test_vts_weight(sigma, expected):
    assert vts_weight(sigma, StrategyConfig(0.2)) == expected


@pytest.mark.parametrize("sigma, expected", [(0.05, 2.0), (0.4, 0.5), (0.1, 2.0)])
def test_mlvts_weight(sigma, expected):
    assert mlvts_weight(sigma, CFG) == expected


@pytest.mark.parametrize("sigma, expected", [(0.05, 0.10), (0.4, 0.20), (0.1, 0.20)])
def test_effective_vol(sigma, expected):
    assert effective_vol(sigma, CFG) == pytest.approx(expected, abs=1e-15)


def test_weight_branch_tie_is_irrelevant():
    # at sigma = sigma_hat / L both branches give the same number
    assert mlvts_weight(0.1, CFG) == 0.2 / 0.1


def test_mlvts_weight_requires_cap():
    with pytest.raises(ConfigurationError):
        mlvts_weight(0.2, StrategyConfig(0.2))


@pytest.mark.parametrize("sigma", [0.0, -0.1, float("nan")])
def test_weights_reject_non_positive_vol(sigma):
    with pytest.raises(DomainError):
        vts_weight(sigma, CFG)
    with pytest.raises(DomainError):
        mlvts_weight(sigma, CFG)


def test_weights_vectorize():
    sig = np.array([0.05, 0.1, 0.4])
    np.testing.assert_array_equal(mlvts_weight(sig, CFG), [2.0, 2.0, 0.5])
    np.testing.assert_array_equal(effective_vol(sig, CFG), mlvts_weight(sig, CFG) * sig)


vols = st.floats(min_value=1e-4, max_value=5.0)
targets = st.floats(min_value=0.01, max_value=1.0)
caps = st.floats(min_value=1.0, max_value=10.0)


@given(vols, targets, caps)
def test_capped_weight_bounds(sigma, sigma_hat, cap):
    cfg = StrategyConfig(sigma_hat, cap)
    w = mlvts_weight(sigma, cfg)
    assert w <= vts_weight(sigma, cfg)
    assert w <= cap
    assert effective_vol(sigma, cfg) == w * sigma


@given(vols, vols, targets, caps)
def test_effective_vol_monotone_and_bounded(s1, s2, sigma_hat, cap):
    cfg = StrategyConfig(sigma_hat, cap)
    lo, hi = sorted((s1, s2))
    assert effective_vol(lo, cfg) <= effective_vol(hi, cfg) * (1 + 1e-15)
    assert effective_vol(hi, cfg) <= sigma_hat * (1 + 1e-15)


def test_effective_vol_continuous_at_threshold():
    eps = 1e-12
    t = CFG.threshold
    assert abs(effective_vol(t - eps, CFG) - effective_vol(t + eps, CFG)) < 1e-10


class TestValidation:
    def test_maturity_before_valuation(self):
        with pytest.raises(ValidationError, match="T >= t0"):
            MarketParams(0.05, 1.0, 0.5)

    def test_negative_rate_allowed(self):
        mkt = MarketParams(-0.01, 0.0, 1.0)
        assert mkt.negative_rate

    @pytest.mark.parametrize("sigma_hat", [0.0, -0.2])
    def test_target_vol_positive(self, sigma_hat):
        with pytest.raises(ValidationError, match="sigma_hat"):
            StrategyConfig(sigma_hat)

    def test_cap_at_least_one(self):
        with pytest.raises(ValidationError, match="leverage_cap"):
            StrategyConfig(0.2, 0.5)

    def test_strike_non_negative(self):
        with pytest.raises(ValidationError, match="strike"):
            OptionSpec(-1.0)

    def test_option_kind(self):
        assert OptionSpec(1.0, "put").kind.value == "put"
        with pytest.raises(ValidationError):
            OptionSpec(1.0, "straddle")

    def test_portfolio_positive(self):
        with pytest.raises(ValidationError):
            PortfolioState(0.0, 1.0, 1.0)

    def test_vol_curve_values_positive(self):
        with pytest.raises(ValidationError):
            VolCurve((0.0, 0.5, 1.0), (0.2, 0.0))

    def test_vol_curve_increasing(self):
        with pytest.raises(ValidationError):
            VolCurve((0.0, 1.0, 1.0), (0.2, 0.3))

    def test_vol_curve_shape(self):
        with pytest.raises(ValidationError):
            VolCurve((0.0, 1.0), (0.2, 0.3))

    def test_heston_rho_range(self):
        with pytest.raises(ValidationError, match="rho"):
            HestonParams(1.0, 0.04, 0.3, -1.5, 0.04, 0.05, 100.0)

    def test_heston_positive(self):
        with pytest.raises(ValidationError, match="kappa"):
            HestonParams(0.0, 0.04, 0.3, 0.0, 0.04, 0.05, 100.0)


def test_vol_curve_lookup_and_segments():
    curve = VolCurve((0.0, 0.5, 1.0), (0.05, 0.4))
    assert curve(0.25) == 0.05
    assert curve(0.5) == 0.4
    assert curve(1.0) == 0.4
    assert curve.segments(0.25, 1.0) == [(0.05, 0.25), (0.4, 0.5)]
    with pytest.raises(DomainError):
        curve.segments(0.0, 1.5)


def test_config_files_round_trip(tmp_path):
    (tmp_path / "curve.json").write_text(json.dumps({"breakpoints": [0, 0.5, 1], "values": [0.05, 0.4]}))
    heston = dict(kappa=0.6067, theta=0.2207, xi=0.2928, rho=-0.75, nu0=0.2154, mu=0.0824, s0=100.0)
    (tmp_path / "heston.json").write_text(json.dumps(heston))
    assert load_vol_curve(tmp_path / "curve.json") == VolCurve((0.0, 0.5, 1.0), (0.05, 0.4))
    assert load_heston(tmp_path / "heston.json") == HestonParams(**heston)


def test_config_file_unknown_field(tmp_path):
    (tmp_path / "heston.json").write_text(json.dumps({"kappa": 1.0, "lambda": 2.0}))
    with pytest.raises(ConfigurationError, match="lambda"):
        load_heston(tmp_path / "heston.json")
