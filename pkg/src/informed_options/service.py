"""HTTP face of the package: a small FastAPI app over the same handlers
the command line uses.

POST /price, /estimate and /calibrate mirror the CLI subcommands with JSON
bodies instead of files; GET /health is a liveness probe. Input errors map
to 400 (data) and 422 (usage/domain); numerical failures map to 500.
"""
from __future__ import annotations

from typing import List, Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .calibration import QuoteRow
from .chain_cli import calibrate_quotes, estimate_params, price_from_options
from .chain_cli import PriceHistory
from .core_model import MarketParams
from .errors import CalibrationError, DataError, InformedOptionsError, UsageError

app = FastAPI(title="informed-options", version="0.1.0")


class PriceRequest(BaseModel):
    model: Literal["crr", "jr", "ksrf", "informed", "mean-info", "tv-mc", "bsm"]
    S0: float
    K: float
    T: float
    r: float = 0.0
    kind: Literal["call", "put"] = "call"
    mu: Optional[float] = None
    sigma: Optional[float] = None
    p0: Optional[float] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    psi: Optional[float] = None
    delta: Optional[float] = None
    rho: Optional[float] = None
    dy: float = 0.0
    n: Optional[int] = None
    dt: Optional[float] = None
    dy_flag: Literal["as-printed", "pde-consistent"] = "as-printed"
    paths: int = 100_000
    steps: int = 64
    seed: int = 0

    model_config = {"populate_by_name": True}


class PriceResponse(BaseModel):
    price: float
    std_error: Optional[float] = None


class EstimateRequest(BaseModel):
    dates: List[str]
    closes: List[float]


class EstimateResponse(BaseModel):
    p_hat: float
    mu_hat: float
    sigma_hat: float
    window: int


class QuoteIn(BaseModel):
    expiry_years: float
    strike: float
    bid: float
    ask: float


class FixedParams(BaseModel):
    spot: float
    r: float
    mu: float
    sigma: float
    p0: float
    dt: float = 1.0 / 252.0


class CalibrateRequest(BaseModel):
    target: Literal["mu", "p", "lambda", "dev"]
    quotes: List[QuoteIn]
    params: FixedParams
    delta_grid: Optional[List[float]] = None


class SurfaceRowOut(BaseModel):
    moneyness: float
    maturity_years: float
    value: Optional[float]
    residual: Optional[float]
    status: str


class CalibrateResponse(BaseModel):
    rho_opt: Optional[float]
    rows: List[SurfaceRowOut]


def _http_error(exc: InformedOptionsError) -> HTTPException:
    if isinstance(exc, DataError):
        return HTTPException(status_code=400, detail=str(exc))
    if isinstance(exc, (UsageError,)) or isinstance(exc, ValueError):
        return HTTPException(status_code=422, detail=str(exc))
    return HTTPException(status_code=500, detail=str(exc))


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/price", response_model=PriceResponse)
def price(req: PriceRequest) -> PriceResponse:
    try:
        value, se = price_from_options(
            model=req.model, S0=req.S0, K=req.K, T=req.T, r=req.r,
            kind=req.kind, mu=req.mu, sigma=req.sigma, p0=req.p0,
            lam=req.lam, psi=req.psi, delta=req.delta, rho=req.rho,
            dy=req.dy, n=req.n, dt=req.dt, dy_flag=req.dy_flag,
            paths=req.paths, steps=req.steps, seed=req.seed,
        )
    except InformedOptionsError as exc:
        raise _http_error(exc) from exc
    return PriceResponse(price=value, std_error=se)


@app.post("/estimate", response_model=EstimateResponse)
def estimate(req: EstimateRequest) -> EstimateResponse:
    if len(req.dates) != len(req.closes):
        raise HTTPException(status_code=400, detail="dates and closes differ in length")
    try:
        est = estimate_params(PriceHistory(rows=tuple(zip(req.dates, req.closes))))
    except InformedOptionsError as exc:
        raise _http_error(exc) from exc
    return EstimateResponse(p_hat=est.p_hat, mu_hat=est.mu_hat,
                            sigma_hat=est.sigma_hat, window=est.window)


@app.post("/calibrate", response_model=CalibrateResponse)
def calibrate(req: CalibrateRequest) -> CalibrateResponse:
    try:
        fixed = MarketParams(mu=req.params.mu, sigma=req.params.sigma,
                             r=req.params.r, p0=req.params.p0, dt=req.params.dt)
        quotes = tuple(
            QuoteRow(
                strike=q.strike,
                expiry=q.expiry_years,
                market_price=0.5 * (q.bid + q.ask),
                spot=req.params.spot,
                quote_id=f"q{i}",
            )
            for i, q in enumerate(req.quotes)
        )
        surface, rho_opt = calibrate_quotes(req.target, quotes, fixed,
                                            req.delta_grid)
    except CalibrationError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    except InformedOptionsError as exc:
        raise _http_error(exc) from exc
    rows = [
        SurfaceRowOut(
            moneyness=r.moneyness,
            maturity_years=r.maturity,
            value=r.value,
            residual=r.residual,
            status=r.status,
        )
        for r in surface.sorted_rows()
    ]
    return CalibrateResponse(rho_opt=rho_opt, rows=rows)
