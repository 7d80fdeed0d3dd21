import math

import pytest
from hypothesis import given, strategies as st

from informed_options import (
    DomainError,
    MarketParams,
    OptionSpec,
    Surface,
    SurfaceRow,
    market_price_of_risk,
    payoff_eval,
)


def test_market_params_validation():
    MarketParams(mu=0.05, sigma=0.2, r=0.01, p0=0.5, dt=0.01)
    with pytest.raises(DomainError):
        MarketParams(mu=0.05, sigma=0.0, r=0.01, p0=0.5)
    with pytest.raises(DomainError):
        MarketParams(mu=0.05, sigma=0.2, r=0.01, p0=1.0)
    with pytest.raises(DomainError):
        MarketParams(mu=0.05, sigma=0.2, r=0.01, p0=0.5, dt=0.0)
    with pytest.raises(DomainError):
        MarketParams(mu=math.nan, sigma=0.2, r=0.01, p0=0.5)


def test_default_step_is_one_trading_day():
    m = MarketParams(mu=0.05, sigma=0.2, r=0.01, p0=0.5)
    assert m.dt == pytest.approx(1.0 / 252.0, rel=0, abs=0)


def test_market_price_of_risk():
    m = MarketParams(mu=0.05, sigma=0.2, r=0.01, p0=0.5)
    assert market_price_of_risk(m) == pytest.approx(0.2, abs=1e-15)


def test_option_spec_validation():
    OptionSpec.call(100.0, 1.0)
    OptionSpec.put(100.0, 0.5)
    with pytest.raises(DomainError):
        OptionSpec(strike=0.0, maturity=1.0)
    with pytest.raises(DomainError):
        OptionSpec(strike=100.0, maturity=-1.0)
    with pytest.raises(DomainError):
        OptionSpec(strike=100.0, maturity=1.0, kind="straddle")
    with pytest.raises(DomainError):
        OptionSpec(strike=100.0, maturity=1.0, kind="custom")
    with pytest.raises(DomainError):
        OptionSpec(strike=100.0, maturity=1.0, kind="call", payoff_fn=lambda s: s)


def test_payoff_eval_call_put():
    call = OptionSpec.call(100.0, 1.0)
    put = OptionSpec.put(100.0, 1.0)
    assert payoff_eval(call, 110.0) == 10.0
    assert payoff_eval(call, 90.0) == 0.0
    assert payoff_eval(put, 90.0) == 10.0
    assert payoff_eval(put, 110.0) == 0.0


def test_payoff_eval_custom_and_rejects_bad_values():
    digital = OptionSpec(strike=100.0, maturity=1.0, kind="custom",
                         payoff_fn=lambda s: 1.0 if s > 100.0 else 0.0)
    assert payoff_eval(digital, 101.0) == 1.0
    bad = OptionSpec(strike=100.0, maturity=1.0, kind="custom",
                     payoff_fn=lambda s: -1.0)
    with pytest.raises(DomainError):
        payoff_eval(bad, 50.0)
    nan_payoff = OptionSpec(strike=100.0, maturity=1.0, kind="custom",
                            payoff_fn=lambda s: math.nan)
    with pytest.raises(DomainError):
        payoff_eval(nan_payoff, 50.0)


@given(st.floats(min_value=1.0, max_value=1e6))
def test_call_put_payoffs_split_the_distance(s):
    call = OptionSpec.call(100.0, 1.0)
    put = OptionSpec.put(100.0, 1.0)
    assert payoff_eval(call, s) - payoff_eval(put, s) == pytest.approx(
        s - 100.0, rel=1e-12, abs=1e-9
    )


def test_surface_rejects_duplicate_keys():
    row = SurfaceRow(moneyness=1.0, maturity=0.5, value=0.1, residual=0.0)
    with pytest.raises(DomainError):
        Surface(rows=(row, row))


def test_surface_sorted_rows():
    rows = (
        SurfaceRow(moneyness=1.1, maturity=1.0, value=0.1, residual=0.0),
        SurfaceRow(moneyness=0.9, maturity=0.5, value=0.2, residual=0.0),
        SurfaceRow(moneyness=0.9, maturity=1.0, value=0.3, residual=0.0),
    )
    ordered = Surface(rows=rows).sorted_rows()
    assert [(r.maturity, r.moneyness) for r in ordered] == [
        (0.5, 0.9), (1.0, 0.9), (1.0, 1.1),
    ]


def test_surface_row_status_rules():
    with pytest.raises(DomainError):
        SurfaceRow(moneyness=1.0, maturity=0.5, value=0.1, residual=-1.0)
    with pytest.raises(DomainError):
        SurfaceRow(moneyness=1.0, maturity=0.5, value=0.1, residual=0.0,
                   status="failed")
    with pytest.raises(DomainError):
        SurfaceRow(moneyness=1.0, maturity=0.5, value=None, residual=None,
                   status="bogus")
