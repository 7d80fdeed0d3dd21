"""Command-line interface, file formats, and daily-data estimation.

Exit codes: 0 success, 1 bad usage, 2 unusable input data, 3 numerical
failure. Output is deterministic: the same argv, files, and seed produce
identical bytes on standard output regardless of thread count.

Estimates from price histories are in per-day units. Tree and closed-form
pricing works in years, so the caller annualizes explicitly (mean and
variance scale with the number of trading days); the CLI never converts
silently.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import statistics
import sys
from dataclasses import dataclass
from datetime import date
from typing import Optional, Sequence, Tuple

import numpy as np

from .calibration import CalibrationProblem, QuoteRow, fit_rho_then_dev, implied_surface
from .closed_form import AS_PRINTED, PDE_CONSISTENT, BsmInputs, bsm_call, bsm_put
from .core_model import MarketParams, OptionSpec, Surface, SurfaceRow
from .diffusion import ParamCurves, feynman_kac_price
from .errors import (
    DataError,
    DomainError,
    InformedOptionsError,
    UsageError,
)
from .informed import InformedTraderSpec, enhance
from .lattice import crr_step, jr_step, ksrf_step, lattice_price
from .mean_info import MeanInfoSpec, mean_info_price

MODELS = ("crr", "jr", "ksrf", "informed", "mean-info", "tv-mc", "bsm")
DY_FLAGS = {"as-printed": AS_PRINTED, "pde-consistent": PDE_CONSISTENT}

_DEFAULT_DELTA_GRID = (0.50, 1.00, 0.01)


def _fmt(x: float) -> str:
    return "%.10g" % x


# ---------------------------------------------------------------------------
# price history and parameter estimation


@dataclass(frozen=True)
class PriceHistory:
    """Daily closes: (ISO date string, close) rows, dates strictly
    increasing, closes positive."""

    rows: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        prev: Optional[date] = None
        for d, close in self.rows:
            if close <= 0.0 or not math.isfinite(close):
                raise DataError(f"close must be positive, got {close} on {d}")
            day = d if isinstance(d, date) else date.fromisoformat(d)
            if prev is not None and day <= prev:
                raise DataError(f"dates must be strictly increasing at {d}")
            prev = day


@dataclass(frozen=True)
class EstimatedParams:
    """Per-day estimates from a close series: p_hat is the fraction of
    non-negative daily log-returns, mu_hat and sigma_hat the sample mean
    and (n-1) standard deviation of those returns, window the number of
    closes used."""

    p_hat: float
    mu_hat: float
    sigma_hat: float
    window: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_hat <= 1.0:
            raise DomainError(f"p_hat must lie in [0, 1], got {self.p_hat}")
        if self.sigma_hat < 0.0:
            raise DomainError("sigma_hat must be non-negative")
        if self.window < 2:
            raise DomainError("window must be at least 2")


def estimate_params(history: PriceHistory) -> EstimatedParams:
    """Daily log-return estimates; a zero return counts as an up day.

    Invariant under uniform scaling of the price level. With a single
    return the dispersion is reported as zero.
    """
    if len(history.rows) < 2:
        raise DataError(f"need at least 2 closes, got {len(history.rows)}")
    closes = [c for _, c in history.rows]
    returns = [math.log(b / a) for a, b in zip(closes, closes[1:])]
    p_hat = sum(1 for r in returns if r >= 0.0) / len(returns)
    mu_hat = statistics.fmean(returns)
    sigma_hat = statistics.stdev(returns) if len(returns) > 1 else 0.0
    return EstimatedParams(p_hat=p_hat, mu_hat=mu_hat, sigma_hat=sigma_hat,
                           window=len(history.rows))


def load_history(path: str) -> PriceHistory:
    """Read a `date,close` CSV with ISO-8601 dates."""
    rows = []
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open history file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "close"]:
            raise DataError(f"{path}: expected header 'date,close', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path} line {line_no}: expected 2 fields, got {len(row)}")
            try:
                day = date.fromisoformat(row[0].strip())
                close = float(row[1])
            except ValueError as exc:
                raise DataError(f"{path} line {line_no}: {exc}") from exc
            rows.append((day.isoformat(), close))
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 rows, got {len(rows)}")
    return PriceHistory(rows=tuple(rows))


# ---------------------------------------------------------------------------
# option chains and fixed parameters


def load_chain(path: str, spot: float) -> Tuple[tuple, tuple]:
    """Read an `expiry_years,strike,bid,ask[,last]` CSV against one spot.

    Returns (quotes, rejected): structurally valid rows that fail a sanity
    bound (bid > ask, non-positive price or expiry) are collected into
    rejected as (line number, reason) instead of aborting the load. A
    malformed file (bad header, non-numeric field, wrong field count, or
    zero usable quotes) raises DataError.
    """
    if spot <= 0.0 or not math.isfinite(spot):
        raise DataError(f"spot must be positive, got {spot}")
    quotes = []
    rejected = []
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open chain file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        cleaned = [h.strip() for h in header] if header else None
        if cleaned not in (["expiry_years", "strike", "bid", "ask"],
                           ["expiry_years", "strike", "bid", "ask", "last"]):
            raise DataError(
                f"{path}: expected header 'expiry_years,strike,bid,ask[,last]', "
                f"got {header}"
            )
        width = len(cleaned)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(
                    f"{path} line {line_no}: expected {width} fields, got {len(row)}"
                )
            try:
                expiry, strike, bid, ask = (float(v) for v in row[:4])
            except ValueError as exc:
                raise DataError(f"{path} line {line_no}: {exc}") from exc
            if bid > ask:
                rejected.append((line_no, f"bid {bid} exceeds ask {ask}"))
                continue
            if bid <= 0.0 or strike <= 0.0 or expiry <= 0.0:
                rejected.append((line_no, "non-positive expiry, strike, or price"))
                continue
            quotes.append(QuoteRow(
                strike=strike,
                expiry=expiry,
                market_price=0.5 * (bid + ask),
                spot=spot,
                quote_id=f"line{line_no}",
            ))
    if not quotes:
        raise DataError(f"{path}: no usable quotes")
    return tuple(quotes), tuple(rejected)


_PARAM_KEYS = ("spot", "r", "mu", "sigma", "p0")


def load_params(path: str) -> Tuple[MarketParams, float]:
    """Read fixed calibration parameters from JSON: spot, r, mu, sigma, p0
    (annualized units) and optional dt (default one trading day)."""
    try:
        with open(path) as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot open params file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError(f"{path}: expected a JSON object")
    missing = [k for k in _PARAM_KEYS if k not in raw]
    if missing:
        raise DataError(f"{path}: missing keys {missing}")
    try:
        m = MarketParams(
            mu=float(raw["mu"]),
            sigma=float(raw["sigma"]),
            r=float(raw["r"]),
            p0=float(raw["p0"]),
            dt=float(raw.get("dt", 1.0 / 252.0)),
        )
        spot = float(raw["spot"])
    except (TypeError, ValueError, DomainError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    if spot <= 0.0:
        raise DataError(f"{path}: spot must be positive, got {spot}")
    return m, spot


def load_curves(path: str) -> ParamCurves:
    """Read time-varying curves from a `t,mu,sigma,r,p,psi` CSV; values are
    interpolated linearly in t and held flat outside the sampled range."""
    cols = {name: [] for name in ("t", "mu", "sigma", "r", "p", "psi")}
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open curves file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(cols):
            raise DataError(
                f"{path}: expected header 't,mu,sigma,r,p,psi', got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise DataError(f"{path} line {line_no}: expected 6 fields")
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise DataError(f"{path} line {line_no}: {exc}") from exc
            for name, v in zip(cols, values):
                cols[name].append(v)
    if len(cols["t"]) < 2:
        raise DataError(f"{path}: need at least 2 rows")
    t = np.array(cols["t"])
    if np.any(np.diff(t) <= 0.0):
        raise DataError(f"{path}: t must be strictly increasing")

    def interp(name: str):
        y = np.array(cols[name])
        return lambda s, _y=y: float(np.interp(s, t, _y))

    return ParamCurves(
        mu=interp("mu"),
        sigma=interp("sigma"),
        r=interp("r"),
        p=interp("p"),
        psi=interp("psi"),
        horizon=float(t[-1]),
    )


# ---------------------------------------------------------------------------
# surface serialization

_SURFACE_HEADER = ["moneyness", "maturity_years", "value", "residual", "status"]


def surface_to_csv(surface: Surface) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_SURFACE_HEADER)
    for row in surface.sorted_rows():
        writer.writerow([
            _fmt(row.moneyness),
            _fmt(row.maturity),
            "" if row.value is None else _fmt(row.value),
            "" if row.residual is None else _fmt(row.residual),
            row.status,
        ])
    return out.getvalue()


def surface_to_json(surface: Surface) -> str:
    records = []
    for row in surface.sorted_rows():
        records.append({
            "moneyness": float(_fmt(row.moneyness)),
            "maturity_years": float(_fmt(row.maturity)),
            "value": None if row.value is None else float(_fmt(row.value)),
            "residual": None if row.residual is None else float(_fmt(row.residual)),
            "status": row.status,
        })
    return json.dumps(records, indent=2) + "\n"


def export_surface(surface: Surface, path: str, format: str = "csv") -> None:
    """Write a surface as CSV or a JSON array, sorted by maturity then
    moneyness, floats at 10 significant digits."""
    if not surface.rows:
        raise DomainError("refusing to export an empty surface")
    if format == "csv":
        text = surface_to_csv(surface)
    elif format == "json":
        text = surface_to_json(surface)
    else:
        raise DomainError(f"format must be 'csv' or 'json', got {format!r}")
    try:
        with open(path, "w") as handle:
            handle.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def read_surface(path: str) -> Surface:
    """Parse a surface file previously written by export_surface; the
    format is sniffed from the content."""
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as exc:
        raise DataError(f"cannot open surface file {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("[") or stripped.startswith("{"):
        try:
            records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(records, list):
            raise DataError(f"{path}: expected a JSON array")
        rows = []
        for rec in records:
            try:
                rows.append(SurfaceRow(
                    moneyness=float(rec["moneyness"]),
                    maturity=float(rec["maturity_years"]),
                    value=None if rec.get("value") is None else float(rec["value"]),
                    residual=None if rec.get("residual") is None else float(rec["residual"]),
                    status=rec.get("status", "ok"),
                ))
            except (KeyError, TypeError, ValueError, DomainError) as exc:
                raise DataError(f"{path}: bad record {rec!r}: {exc}") from exc
        return Surface(rows=tuple(rows))
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != _SURFACE_HEADER:
        raise DataError(f"{path}: expected surface header, got {header}")
    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise DataError(f"{path} line {line_no}: expected 5 fields")
        try:
            rows.append(SurfaceRow(
                moneyness=float(row[0]),
                maturity=float(row[1]),
                value=float(row[2]) if row[2] != "" else None,
                residual=float(row[3]) if row[3] != "" else None,
                status=row[4],
            ))
        except (ValueError, DomainError) as exc:
            raise DataError(f"{path} line {line_no}: {exc}") from exc
    return Surface(rows=tuple(rows))


# ---------------------------------------------------------------------------
# pricing dispatch shared by the CLI and the HTTP service


def _need(condition: bool, message: str) -> None:
    if not condition:
        raise UsageError(message)


def _resolve_steps(maturity: float, n: Optional[int], dt: Optional[float]) -> Tuple[int, float]:
    """Number of steps and step length for a tree: from --n, from --dt, or
    both (then they must agree with the maturity)."""
    _need(n is not None or dt is not None,
          "tree models need --n or --dt to fix the step count")
    if n is not None:
        _need(n >= 1, f"--n must be >= 1, got {n}")
        if dt is not None and abs(n * dt - maturity) > 1e-9:
            raise UsageError(
                f"--n {n} times --dt {dt} is {n * dt}, not the maturity {maturity}"
            )
        return n, maturity / n
    steps = max(1, round(maturity / dt))
    if abs(steps * dt - maturity) > 1e-9:
        raise UsageError(
            f"maturity {maturity} is not a whole number of --dt {dt} steps; "
            "pass --n instead"
        )
    return steps, dt


def price_from_options(*, model: str, S0: float, K: float, T: float,
                       r: float = 0.0, kind: str = "call",
                       mu: Optional[float] = None, sigma: Optional[float] = None,
                       p0: Optional[float] = None, lam: Optional[float] = None,
                       psi: Optional[float] = None, delta: Optional[float] = None,
                       rho: Optional[float] = None, dy: float = 0.0,
                       n: Optional[int] = None, dt: Optional[float] = None,
                       dy_flag: str = "as-printed", paths: int = 100_000,
                       steps: int = 64, seed: int = 0,
                       curves: Optional[ParamCurves] = None) -> Tuple[float, Optional[float]]:
    """One European option price. Returns (price, standard error); the
    standard error is None for every model except tv-mc.

    This is the single entry point behind both `price` on the command line
    and POST /price on the service, so the two can never drift apart.
    """
    _need(model in MODELS, f"--model must be one of {MODELS}")
    _need(kind in ("call", "put"), "--kind must be call or put")
    _need(dy_flag in DY_FLAGS, "--dy-flag must be as-printed or pde-consistent")
    formula = DY_FLAGS[dy_flag]
    opt = OptionSpec.call(K, T) if kind == "call" else OptionSpec.put(K, T)

    if model == "bsm":
        _need(sigma is not None, "bsm needs --sigma")
        inputs = BsmInputs(spot=S0, strike=K, tau=T, r=r, sigma=sigma, d_y=dy)
        price = bsm_call(inputs, formula) if kind == "call" else bsm_put(inputs, formula)
        return price, None

    if model == "informed":
        _need(sigma is not None, "informed needs --sigma")
        if lam is None and psi is not None:
            _need(p0 is not None, "--psi needs --p0 to resolve the intensity")
            lam = psi * math.sqrt(p0 * (1.0 - p0))
        _need(lam is not None, "informed needs --lambda or --psi")
        if lam == 0.0:
            d_y = 0.0
        else:
            _need(mu is not None, "informed with a nonzero edge needs --mu")
            m = MarketParams(mu=mu, sigma=sigma, r=r, p0=p0 if p0 is not None else 0.5)
            d_y = enhance(m, InformedTraderSpec(lambda_info=lam)).d_y
        inputs = BsmInputs(spot=S0, strike=K, tau=T, r=r, sigma=sigma, d_y=d_y)
        price = bsm_call(inputs, formula) if kind == "call" else bsm_put(inputs, formula)
        return price, None

    if model == "tv-mc":
        if curves is None:
            _need(sigma is not None, "tv-mc needs --sigma or --curves")
            curves = ParamCurves.constant(
                mu=mu if mu is not None else r,
                sigma=sigma,
                r=r,
                p=p0 if p0 is not None else 0.5,
                psi=psi if psi is not None else 0.0,
                horizon=T,
            )
        price, se = feynman_kac_price(curves, dy, opt, S0, paths, steps, seed)
        return price, se

    n_steps, dt_eff = _resolve_steps(T, n, dt)
    _need(mu is not None and sigma is not None, f"{model} needs --mu and --sigma")
    if model == "crr":
        m = MarketParams(mu=mu, sigma=sigma, r=r, p0=0.5, dt=dt_eff)
        step = crr_step(m)
    elif model == "jr":
        m = MarketParams(mu=mu, sigma=sigma, r=r, p0=0.5, dt=dt_eff)
        step = jr_step(m)
    elif model == "ksrf":
        _need(p0 is not None, "ksrf needs --p0")
        m = MarketParams(mu=mu, sigma=sigma, r=r, p0=p0, dt=dt_eff)
        step = ksrf_step(m, p0)
    else:
        _need(p0 is not None and delta is not None and rho is not None,
              "mean-info needs --p0, --delta and --rho")
        m = MarketParams(mu=mu, sigma=sigma, r=r, p0=p0, dt=dt_eff)
        return mean_info_price(m, MeanInfoSpec(delta_info=delta, rho_info=rho),
                               opt, S0, n_steps), None
    return lattice_price(step, S0, opt, n_steps, r, dt_eff), None


def calibrate_quotes(target: str, quotes: Sequence[QuoteRow], fixed: MarketParams,
                     delta_grid: Optional[Sequence[float]] = None
                     ) -> Tuple[Surface, Optional[float]]:
    """Run the calibration for one target. Returns (surface, rho_opt);
    rho_opt is None except for the two-stage dev fit."""
    prob = CalibrationProblem(quotes=tuple(quotes), fixed=fixed, target=target)
    if target == "dev":
        if delta_grid is None:
            lo, hi, step = _DEFAULT_DELTA_GRID
            delta_grid = np.arange(lo, hi + 0.5 * step, step)
        fit = fit_rho_then_dev(prob, delta_grid)
        return fit.dev_surface, fit.rho_opt
    return implied_surface(prob), None


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="informed-options",
                     description="Option pricing with informed traders")
    sub = parser.add_subparsers(dest="command")

    p_est = sub.add_parser("estimate", help="estimate daily parameters from closes")
    p_est.add_argument("history", help="CSV with header date,close")

    p_price = sub.add_parser("price", help="price one European option")
    p_price.add_argument("--model", required=True, choices=MODELS)
    p_price.add_argument("--S0", type=float, required=True)
    p_price.add_argument("--K", type=float, required=True)
    p_price.add_argument("--T", type=float, required=True)
    p_price.add_argument("--r", type=float, default=0.0)
    p_price.add_argument("--kind", choices=("call", "put"), default="call")
    p_price.add_argument("--mu", type=float)
    p_price.add_argument("--sigma", type=float)
    p_price.add_argument("--p0", type=float)
    p_price.add_argument("--lambda", dest="lam", type=float)
    p_price.add_argument("--psi", type=float)
    p_price.add_argument("--delta", type=float)
    p_price.add_argument("--rho", type=float)
    p_price.add_argument("--dy", type=float, default=0.0)
    p_price.add_argument("--n", type=int)
    p_price.add_argument("--dt", type=float)
    p_price.add_argument("--dy-flag", dest="dy_flag", choices=tuple(DY_FLAGS),
                         default="as-printed")
    p_price.add_argument("--paths", type=int, default=100_000)
    p_price.add_argument("--steps", type=int, default=64)
    p_price.add_argument("--seed", type=int, default=0)
    p_price.add_argument("--curves", help="CSV t,mu,sigma,r,p,psi for tv-mc")

    p_cal = sub.add_parser("calibrate", help="invert a quote chain")
    p_cal.add_argument("--target", required=True, choices=("mu", "p", "lambda", "dev"))
    p_cal.add_argument("--chain", required=True, help="CSV expiry_years,strike,bid,ask[,last]")
    p_cal.add_argument("--params", required=True, help="JSON with spot,r,mu,sigma,p0[,dt]")
    p_cal.add_argument("--out", default=None, help="output path (default surface.<format>)")
    p_cal.add_argument("--format", choices=("csv", "json"), default="csv")
    p_cal.add_argument("--delta-lo", dest="delta_lo", type=float,
                       default=_DEFAULT_DELTA_GRID[0])
    p_cal.add_argument("--delta-hi", dest="delta_hi", type=float,
                       default=_DEFAULT_DELTA_GRID[1])
    p_cal.add_argument("--delta-step", dest="delta_step", type=float,
                       default=_DEFAULT_DELTA_GRID[2])

    p_exp = sub.add_parser("surface-export", help="rewrite a surface file")
    p_exp.add_argument("surface", help="surface CSV or JSON")
    p_exp.add_argument("--format", choices=("csv", "json"), required=True)
    p_exp.add_argument("--out", default=None,
                       help="output path (default: print to stdout)")

    p_srv = sub.add_parser("serve", help="run the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    return parser


def _run_estimate(args) -> int:
    est = estimate_params(load_history(args.history))
    payload = {
        "p_hat": float(_fmt(est.p_hat)),
        "mu_hat": float(_fmt(est.mu_hat)),
        "sigma_hat": float(_fmt(est.sigma_hat)),
        "window": est.window,
    }
    print(json.dumps(payload))
    return 0


def _run_price(args) -> int:
    curves = load_curves(args.curves) if args.curves else None
    price, se = price_from_options(
        model=args.model, S0=args.S0, K=args.K, T=args.T, r=args.r,
        kind=args.kind, mu=args.mu, sigma=args.sigma, p0=args.p0,
        lam=args.lam, psi=args.psi, delta=args.delta, rho=args.rho,
        dy=args.dy, n=args.n, dt=args.dt, dy_flag=args.dy_flag,
        paths=args.paths, steps=args.steps, seed=args.seed, curves=curves,
    )
    if se is None:
        print(_fmt(price))
    else:
        print(f"{_fmt(price)} {_fmt(se)}")
    return 0


def _run_calibrate(args) -> int:
    fixed, spot = load_params(args.params)
    quotes, rejected = load_chain(args.chain, spot)
    for line_no, reason in rejected:
        print(f"rejected line {line_no}: {reason}", file=sys.stderr)
    grid = None
    if args.target == "dev":
        if args.delta_step <= 0.0 or args.delta_hi <= args.delta_lo:
            raise UsageError("delta grid needs delta-lo < delta-hi and a positive step")
        grid = np.arange(args.delta_lo, args.delta_hi + 0.5 * args.delta_step,
                         args.delta_step)
    surface, rho_opt = calibrate_quotes(args.target, quotes, fixed, grid)
    out = args.out if args.out else f"surface.{args.format}"
    export_surface(surface, out, args.format)
    if rho_opt is not None:
        print(f"rho_opt={_fmt(rho_opt)}")
    ok = sum(1 for r in surface.rows if r.status != "failed")
    print(f"wrote {len(surface.rows)} rows ({ok} ok) to {out}")
    return 0


def _run_surface_export(args) -> int:
    surface = read_surface(args.surface)
    text = surface_to_csv(surface) if args.format == "csv" else surface_to_json(surface)
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
        print(f"wrote {len(surface.rows)} rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _run_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cli_dispatch(argv: Sequence[str]) -> int:
    """Parse argv and run one subcommand, mapping failures to exit codes:
    1 usage, 2 data, 3 numerics."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        handler = {
            "estimate": _run_estimate,
            "price": _run_price,
            "calibrate": _run_calibrate,
            "surface-export": _run_surface_export,
            "serve": _run_serve,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InformedOptionsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort mapping
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
