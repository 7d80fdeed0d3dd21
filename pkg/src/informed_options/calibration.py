"""Inverting quoted option prices for the information parameters.

Every inversion prices quotes on trees with the strike cell of the terminal
payoff averaged (see ``lattice_price``); without that the tree price is a
sawtooth in any parameter that slides the terminal grid across the strike,
and the scalar problems stop being single-rooted.

The two-stage fit for (rho, delta) deserves a note. The two parameters are
nearly collinear: a small move in rho can be almost perfectly compensated
by a move in delta, leaving per-quote residuals at the 1e-7 level along a
whole valley. The grid stage locates the valley; only a Gauss-Newton polish
on the stacked per-quote residual vector can walk along it to the true
minimum, because it sees the residual directions individually rather than
their sum of squares.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .closed_form import AS_PRINTED, BsmInputs, bsm_call
from .core_model import MarketParams, OptionSpec, Surface, SurfaceRow
from .errors import CalibrationError, DomainError
from .informed import InformedTraderSpec, enhance
from .lattice import ksrf_step, lattice_price
from .mean_info import _price_call_grid, dev_from_delta
from .diffusion import _worker_count

TARGETS = ("mu", "p", "lambda", "dev")

DEFAULT_BOUNDS = {
    "mu": (-0.5, 0.5),
    "p": (0.01, 0.99),
    "lambda": (-0.5, 0.5),
    "dev": (0.3, 1.2),
}

RHO_BOUNDS = (0.0, 5.0)

_GRID_POINTS = 33
_BOUNDARY_REL = 1e-6


@dataclass(frozen=True)
class QuoteRow:
    """One market quote: strike and expiry of a call, its mid price, the
    spot it was observed against, and an identifier for reporting."""

    strike: float
    expiry: float
    market_price: float
    spot: float
    quote_id: str = ""

    def __post_init__(self) -> None:
        for name in ("strike", "expiry", "market_price", "spot"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0.0:
                raise DomainError(f"{name} must be positive and finite, got {v}")

    @property
    def moneyness(self) -> float:
        return self.strike / self.spot


@dataclass(frozen=True)
class CalibrationProblem:
    """What to invert: the quotes, the parameters held fixed, which scalar
    to solve for, and solver controls.

    target is one of {"mu", "p", "lambda", "dev"}. bounds defaults to a
    per-target search interval. fixed.dt sets the tree resolution: each
    quote is priced on n = round(expiry / dt) steps of length expiry / n,
    so the tree always ends exactly at the quoted expiry.
    """

    quotes: tuple
    fixed: MarketParams
    target: str
    bounds: Optional[Tuple[float, float]] = None
    tol: float = 1e-10
    formula: str = AS_PRINTED
    first_order: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "quotes", tuple(self.quotes))
        if self.target not in TARGETS:
            raise DomainError(f"target must be one of {TARGETS}, got {self.target!r}")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo < hi:
                raise DomainError(f"bounds must satisfy lo < hi, got {self.bounds}")
        if self.tol <= 0.0:
            raise DomainError("tol must be positive")

    @property
    def search_bounds(self) -> Tuple[float, float]:
        return self.bounds if self.bounds is not None else DEFAULT_BOUNDS[self.target]


@dataclass(frozen=True)
class ImpliedPoint:
    value: float
    residual: float
    boundary: bool


@dataclass(frozen=True)
class FitResult:
    """Output of the two-stage fit: the common accuracy intensity, the
    per-quote probability shifts, and the same shifts expressed as
    annualized deviation premia."""

    rho_opt: float
    delta_surface: Surface
    dev_surface: Surface
    objective: float


def _quote_steps(q: QuoteRow, dt: float) -> Tuple[int, float]:
    n = max(1, round(q.expiry / dt))
    return n, q.expiry / n


def _model_price(prob: CalibrationProblem, quote: QuoteRow, x: float) -> float:
    """Model call price at scalar parameter x for the problem's target."""
    m = prob.fixed
    opt = OptionSpec.call(quote.strike, quote.expiry)
    if prob.target == "lambda":
        d_y = enhance(m, InformedTraderSpec(lambda_info=x)).d_y
        inputs = BsmInputs(spot=quote.spot, strike=quote.strike, tau=quote.expiry,
                           r=m.r, sigma=m.sigma, d_y=d_y)
        return bsm_call(inputs, prob.formula)
    n, dt = _quote_steps(quote, m.dt)
    if prob.target == "mu":
        step = ksrf_step(replace(m, mu=x, dt=dt), m.p0, prob.first_order)
    elif prob.target == "p":
        step = ksrf_step(replace(m, dt=dt), x, prob.first_order)
    else:
        raise DomainError(f"no scalar model for target {prob.target!r}")
    return lattice_price(step, quote.spot, opt, n, m.r, dt, strike_smoothing=True)


def _relative_error(prob: CalibrationProblem, quote: QuoteRow, x: float) -> float:
    return (_model_price(prob, quote, x) - quote.market_price) / quote.market_price


def implied_scalar(prob: CalibrationProblem, quote: QuoteRow) -> ImpliedPoint:
    """Solve one quote for the target parameter.

    A coarse scan over the bounds locates the global minimum of |relative
    error|; a bracketing root is polished by Brent's method, and when no
    sign change exists the minimum is refined within its neighboring cells.
    Values landing within a relative 1e-6 of either bound are flagged
    boundary. Pricing failures inside the bounds surface as
    CalibrationError naming the parameter value.
    """
    lo, hi = prob.search_bounds
    xs = np.linspace(lo, hi, _GRID_POINTS)

    def err(x: float) -> float:
        try:
            return _relative_error(prob, quote, x)
        except CalibrationError:
            raise
        except Exception as exc:
            raise CalibrationError(
                f"pricing failed at {prob.target}={x:.6g} for quote "
                f"{quote.quote_id or quote.strike}: {exc}"
            ) from exc

    es = np.array([err(float(x)) for x in xs])
    i0 = int(np.argmin(np.abs(es)))
    value: Optional[float] = None
    if es[i0] == 0.0:
        value = float(xs[i0])
    if value is None:
        for a, b in ((i0 - 1, i0), (i0, i0 + 1)):
            if 0 <= a and b < xs.size and es[a] * es[b] < 0.0:
                value = float(brentq(err, xs[a], xs[b], xtol=1e-13, rtol=8.9e-16))
                break
    if value is None:
        sign_cells = [i for i in range(xs.size - 1) if es[i] * es[i + 1] < 0.0]
        if sign_cells:
            i = min(sign_cells, key=lambda i: abs(i - i0))
            value = float(brentq(err, xs[i], xs[i + 1], xtol=1e-13, rtol=8.9e-16))
    if value is None:
        a = float(xs[max(i0 - 1, 0)])
        b = float(xs[min(i0 + 1, xs.size - 1)])
        res = minimize_scalar(lambda x: err(x) ** 2, bounds=(a, b),
                              method="bounded", options={"xatol": prob.tol})
        value = float(res.x)
        if err(value) ** 2 > es[i0] ** 2:
            value = float(xs[i0])
    residual = err(value) ** 2
    span = hi - lo
    boundary = min(value - lo, hi - value) <= _BOUNDARY_REL * span
    if boundary:
        value = lo if value - lo <= hi - value else hi
        residual = err(value) ** 2
    return ImpliedPoint(value=value, residual=residual, boundary=boundary)


def implied_surface(prob: CalibrationProblem) -> Surface:
    """Per-quote implied values as a surface over (moneyness, maturity).

    Quotes are solved independently (in parallel when several are given);
    a quote whose inversion raises is recorded as a failed row rather than
    aborting the rest. If every quote fails, that is an error.
    """
    if not prob.quotes:
        raise CalibrationError("no quotes to calibrate")

    def solve(quote: QuoteRow) -> SurfaceRow:
        try:
            pt = implied_scalar(prob, quote)
        except Exception:
            return SurfaceRow(moneyness=quote.moneyness, maturity=quote.expiry,
                              value=None, residual=None, status="failed")
        return SurfaceRow(
            moneyness=quote.moneyness,
            maturity=quote.expiry,
            value=pt.value,
            residual=pt.residual,
            status="boundary" if pt.boundary else "ok",
        )

    if len(prob.quotes) > 1:
        with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
            rows = list(pool.map(solve, prob.quotes))
    else:
        rows = [solve(prob.quotes[0])]
    if all(r.status == "failed" for r in rows):
        raise CalibrationError("every quote failed to invert")
    ordered = tuple(sorted(rows, key=lambda r: (r.maturity, r.moneyness)))
    return Surface(rows=ordered)


def implied_p_from_lambda(intensity: float, p0: float, dt: float) -> float:
    """Per-step guess probability implied by an intensity,
    1/2 (1 + lambda / sqrt(p0 (1-p0)) sqrt(dt)), validated in (0, 1)."""
    return InformedTraderSpec(lambda_info=intensity).guess_probability(p0, dt)


def _admissible_delta_range(m: MarketParams, deltas: np.ndarray) -> Tuple[float, float]:
    """Open delta interval keeping p0 + delta sqrt(dt) inside (0, 1),
    shrunk slightly and intersected with a margin around the grid."""
    sq = math.sqrt(m.dt)
    lo_adm = (1e-9 - m.p0) / sq
    hi_adm = (1.0 - 1e-9 - m.p0) / sq
    span = float(deltas.max() - deltas.min()) or 1.0
    lo = max(lo_adm, float(deltas.min()) - 0.5 * span)
    hi = min(hi_adm, float(deltas.max()) + 0.5 * span)
    return lo, hi


def fit_rho_then_dev(prob: CalibrationProblem, delta_grid: Sequence[float]) -> FitResult:
    """Two-stage fit of the accuracy intensity rho (shared by all quotes)
    and a per-quote probability shift delta.

    Stage one scans rho: for each candidate the objective sums squared
    relative errors over every quote and every grid delta, which is smooth
    in rho even though individual (rho, delta) pairs compensate. The rho
    minimizer is then polished jointly with a single shared delta by damped
    Gauss-Newton on the per-quote residual vector (see the module note on
    collinearity). Stage two holds rho fixed and solves each quote for its
    own delta by the same scan-and-bracket scheme as implied_scalar, then
    restates the shifts as annualized deviation premia.

    Quotes must be calls priced at a common fixed (mu, sigma, r, p0); the
    tree for a quote uses n = round(expiry / fixed.dt) steps.
    """
    if prob.target != "dev":
        raise DomainError(f"two-stage fit requires target 'dev', got {prob.target!r}")
    if not prob.quotes:
        raise CalibrationError("no quotes to calibrate")
    deltas = np.asarray(list(delta_grid), dtype=float)
    if deltas.size < 2:
        raise DomainError("delta_grid needs at least two points")
    if np.any(~np.isfinite(deltas)):
        raise DomainError("delta_grid must be finite")
    deltas = np.sort(deltas)
    m = prob.fixed
    sq = math.sqrt(m.dt)
    if m.p0 + deltas[0] * sq <= 0.0 or m.p0 + deltas[-1] * sq >= 1.0:
        raise DomainError("delta_grid pushes the step probability out of (0, 1)")

    quotes = prob.quotes
    grids = []
    for q in quotes:
        n, _ = _quote_steps(q, m.dt)
        grids.append((q, n))

    def grid_prices(rho: float, ds: np.ndarray) -> list:
        return [
            _price_call_grid(m, rho, ds, q.spot, q.strike, q.expiry, n)
            for q, n in grids
        ]

    def stage1_objective(rho: float) -> float:
        total = []
        for (q, n), prices in zip(grids, grid_prices(rho, deltas)):
            rel = (prices - q.market_price) / q.market_price
            total.append(float(np.dot(rel, rel)))
        return math.fsum(total)

    lo_r, hi_r = RHO_BOUNDS
    res = minimize_scalar(stage1_objective, bounds=(lo_r, hi_r), method="bounded",
                          options={"xatol": 1e-4})
    if not res.success:
        raise CalibrationError(f"rho scan failed: {res.message}")
    rho_hat = float(res.x)

    lo_d, hi_d = _admissible_delta_range(m, deltas)

    def resid_vec(rho: float, delta: float) -> np.ndarray:
        ds = np.array([delta])
        out = np.empty(len(grids))
        for i, ((q, n), price) in enumerate(zip(grids, grid_prices(rho, ds))):
            out[i] = (float(price[0]) - q.market_price) / q.market_price
        return out

    def signed_sum(delta: float) -> float:
        return math.fsum(resid_vec(rho_hat, delta))

    d_lo, d_hi = float(deltas[0]), float(deltas[-1])
    f_lo, f_hi = signed_sum(d_lo), signed_sum(d_hi)
    if f_lo * f_hi < 0.0:
        delta_hat = float(brentq(signed_sum, d_lo, d_hi, xtol=1e-10))
    else:
        probe = np.linspace(d_lo, d_hi, 9)
        delta_hat = float(min(probe, key=lambda d: abs(signed_sum(float(d)))))

    rho_hat, delta_hat = _gauss_newton_polish(
        resid_vec, rho_hat, delta_hat, (lo_r, hi_r), (lo_d, hi_d)
    )

    rows_delta = []
    rows_dev = []
    final_resid = []
    for q, n in grids:
        try:
            pt = _implied_delta(prob, q, n, rho_hat, deltas)
        except Exception:
            rows_delta.append(SurfaceRow(q.moneyness, q.expiry, None, None, "failed"))
            rows_dev.append(SurfaceRow(q.moneyness, q.expiry, None, None, "failed"))
            continue
        status = "boundary" if pt.boundary else "ok"
        rows_delta.append(SurfaceRow(q.moneyness, q.expiry, pt.value, pt.residual, status))
        rows_dev.append(SurfaceRow(q.moneyness, q.expiry,
                                   dev_from_delta(m, pt.value), pt.residual, status))
        final_resid.append(pt.residual)
    if all(r.status == "failed" for r in rows_delta):
        raise CalibrationError("every quote failed in the delta stage")
    order = lambda rows: tuple(sorted(rows, key=lambda r: (r.maturity, r.moneyness)))
    return FitResult(
        rho_opt=rho_hat,
        delta_surface=Surface(rows=order(rows_delta)),
        dev_surface=Surface(rows=order(rows_dev)),
        objective=math.fsum(final_resid),
    )


def _gauss_newton_polish(resid_vec, rho: float, delta: float,
                         rho_box: Tuple[float, float],
                         delta_box: Tuple[float, float],
                         iters: int = 12) -> Tuple[float, float]:
    """Damped Gauss-Newton on the stacked per-quote relative errors.

    Finite-difference Jacobian, least-squares step, halving line search
    accepting only non-increasing residual norms, iterates clamped to the
    boxes. Returns the start point if no step improves on it.
    """
    h_rho, h_delta = 1e-5, 1e-4
    lo_r, hi_r = rho_box
    lo_d, hi_d = delta_box

    def clamp(x: float, lo: float, hi: float) -> float:
        return min(max(x, lo), hi)

    def norm_sq(v: np.ndarray) -> float:
        return float(np.dot(v, v))

    best = (rho, delta)
    r0 = resid_vec(rho, delta)
    best_norm = norm_sq(r0)
    for _ in range(iters):
        rc = clamp(rho, lo_r + h_rho, hi_r - h_rho)
        dc = clamp(delta, lo_d + h_delta, hi_d - h_delta)
        j_rho = (resid_vec(rc + h_rho, dc) - resid_vec(rc - h_rho, dc)) / (2.0 * h_rho)
        j_delta = (resid_vec(rc, dc + h_delta) - resid_vec(rc, dc - h_delta)) / (2.0 * h_delta)
        jac = np.stack([j_rho, j_delta], axis=1)
        step, *_ = np.linalg.lstsq(jac, -r0, rcond=None)
        lam = 1.0
        accepted = False
        for _ in range(10):
            cand = (clamp(rho + lam * step[0], lo_r, hi_r),
                    clamp(delta + lam * step[1], lo_d, hi_d))
            r_cand = resid_vec(*cand)
            if norm_sq(r_cand) <= best_norm:
                rho, delta = cand
                r0 = r_cand
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
        if norm_sq(r0) < best_norm:
            best, best_norm = (rho, delta), norm_sq(r0)
        if best_norm < 1e-22:
            break
    return best


def _implied_delta(prob: CalibrationProblem, quote: QuoteRow, n: int,
                   rho: float, deltas: np.ndarray) -> ImpliedPoint:
    """Stage-two scalar solve: the quote's own delta at the fitted rho,
    scanning the grid then bracketing."""
    m = prob.fixed

    def err_grid(ds: np.ndarray) -> np.ndarray:
        prices = _price_call_grid(m, rho, ds, quote.spot, quote.strike,
                                  quote.expiry, n)
        return (prices - quote.market_price) / quote.market_price

    def err(d: float) -> float:
        return float(err_grid(np.array([d]))[0])

    es = err_grid(deltas)
    i0 = int(np.argmin(np.abs(es)))
    value: Optional[float] = None
    if es[i0] == 0.0:
        value = float(deltas[i0])
    if value is None:
        for a, b in ((i0 - 1, i0), (i0, i0 + 1)):
            if 0 <= a and b < deltas.size and es[a] * es[b] < 0.0:
                value = float(brentq(err, float(deltas[a]), float(deltas[b]),
                                     xtol=1e-12))
                break
    boundary = False
    if value is None:
        value = float(deltas[i0])
        boundary = i0 in (0, deltas.size - 1)
    residual = err(value) ** 2
    return ImpliedPoint(value=value, residual=residual, boundary=boundary)
