import pytest
from fastapi.testclient import TestClient

from informed_options.chain_cli import estimate_params
from informed_options.chain_cli import PriceHistory
from informed_options.closed_form import BsmInputs, bsm_call
from informed_options.core_model import MarketParams
from informed_options.informed import InformedTraderSpec, enhance
from informed_options.service import app

client = TestClient(app)


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_price_bsm_matches_library():
    resp = client.post("/price", json={
        "model": "bsm", "S0": 100.0, "K": 100.0, "T": 1.0, "r": 0.01,
        "sigma": 0.2,
    })
    assert resp.status_code == 200
    body = resp.json()
    direct = bsm_call(BsmInputs(spot=100.0, strike=100.0, tau=1.0, r=0.01,
                                sigma=0.2))
    assert body["price"] == pytest.approx(direct, abs=1e-12)
    assert body["std_error"] is None


def test_price_accepts_lambda_by_its_public_name():
    base = {"S0": 100.0, "K": 100.0, "T": 1.0, "r": 0.01, "mu": 0.05,
            "sigma": 0.2, "p0": 0.5}
    resp = client.post("/price", json={"model": "informed", "lambda": 0.2, **base})
    assert resp.status_code == 200
    m = MarketParams(mu=0.05, sigma=0.2, r=0.01, p0=0.5)
    d_y = enhance(m, InformedTraderSpec(lambda_info=0.2)).d_y
    direct = bsm_call(BsmInputs(spot=100.0, strike=100.0, tau=1.0, r=0.01,
                                sigma=0.2, d_y=d_y))
    assert resp.json()["price"] == pytest.approx(direct, abs=1e-12)


def test_price_monte_carlo_reports_standard_error():
    resp = client.post("/price", json={
        "model": "tv-mc", "S0": 100.0, "K": 100.0, "T": 1.0, "r": 0.02,
        "sigma": 0.2, "dy": 0.05, "paths": 4096, "steps": 8, "seed": 3,
    })
    assert resp.status_code == 200
    assert resp.json()["std_error"] > 0.0


def test_price_validation_failures():
    assert client.post("/price", json={
        "model": "heston", "S0": 100.0, "K": 100.0, "T": 1.0,
    }).status_code == 422
    # usage error from the shared handler, not pydantic
    assert client.post("/price", json={
        "model": "informed", "S0": 100.0, "K": 100.0, "T": 1.0, "lambda": 0.1,
    }).status_code == 422


def test_estimate_matches_library():
    dates = ["2024-01-01", "2024-01-02", "2024-01-03"]
    closes = [100.0, 101.0, 100.5]
    resp = client.post("/estimate", json={"dates": dates, "closes": closes})
    assert resp.status_code == 200
    est = estimate_params(PriceHistory(rows=tuple(zip(dates, closes))))
    body = resp.json()
    assert body["p_hat"] == est.p_hat
    assert body["mu_hat"] == pytest.approx(est.mu_hat, abs=1e-15)
    assert body["window"] == 3


def test_estimate_input_errors():
    assert client.post("/estimate", json={
        "dates": ["2024-01-01"], "closes": [100.0, 101.0],
    }).status_code == 400
    assert client.post("/estimate", json={
        "dates": ["2024-01-02", "2024-01-01"], "closes": [100.0, 101.0],
    }).status_code == 400


def test_calibrate_lambda_chain():
    params = {"spot": 100.0, "r": 0.0064, "mu": 0.04536, "sigma": 0.3175,
              "p0": 0.56}
    m = MarketParams(mu=0.04536, sigma=0.3175, r=0.0064, p0=0.56)
    d_y = enhance(m, InformedTraderSpec(lambda_info=0.003)).d_y
    quotes = []
    for strike in (95.0, 100.0, 105.0):
        price = bsm_call(BsmInputs(spot=100.0, strike=strike, tau=1.0,
                                   r=m.r, sigma=m.sigma, d_y=d_y))
        quotes.append({"expiry_years": 1.0, "strike": strike,
                       "bid": price, "ask": price})
    resp = client.post("/calibrate", json={
        "target": "lambda", "quotes": quotes, "params": params,
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["rho_opt"] is None
    assert len(body["rows"]) == 3
    for row in body["rows"]:
        assert row["status"] == "ok"
        assert row["value"] == pytest.approx(0.003, abs=1e-6)


def test_calibrate_without_quotes_is_a_server_side_failure():
    resp = client.post("/calibrate", json={
        "target": "mu", "quotes": [],
        "params": {"spot": 100.0, "r": 0.0064, "mu": 0.04536,
                   "sigma": 0.3175, "p0": 0.56},
    })
    assert resp.status_code == 500
