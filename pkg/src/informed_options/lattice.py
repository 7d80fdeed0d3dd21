"""Binomial trees that keep the natural upturn probability.

Three one-step parameterizations are provided. ``crr_step`` and ``jr_step``
are the classical constant-spread constructions. ``ksrf_step`` puts the drift
and the natural upturn probability p into the move sizes themselves, so the
tree's physical law matches the market being modeled; switching to the
pricing measure then only reweights the branches. All three price identically
in the fine-step limit, but only the third remembers p, which is what the
calibration module inverts for.

``StepParams.up`` and ``.down`` are log returns. Gross factors are
``exp(up)`` and ``exp(down)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core_model import MarketParams, OptionSpec, as_step_sequence, payoff_eval
from .errors import (
    DomainError,
    NoArbitrageError,
    ParameterRegimeError,
    PositivityError,
)

MODE_CRR = "CRR"
MODE_JR = "JR"
MODE_KSRF = "KSRF"
MODE_KSRF_FIRST_ORDER = "KSRF_first_order"

_RECOMBINE_TOL = 1e-12
_MATURITY_TOL = 1e-9


@dataclass(frozen=True)
class StepParams:
    """One lattice step: log returns of the two moves, the natural upturn
    probability p and the risk-neutral upturn weight q."""

    up: float
    down: float
    p: float
    q: float

    def __post_init__(self) -> None:
        if not self.up > self.down:
            raise DomainError(
                f"up log return ({self.up}) must exceed down log return ({self.down})"
            )

    @property
    def spread(self) -> float:
        return self.up - self.down


def first_order_q(mu: float, sigma: float, r: float, p: float, dt: float) -> float:
    """Risk-neutral upturn weight p - theta * sqrt(p (1-p) dt).

    No range check: boundary studies evaluate this outside (0, 1) on
    purpose. Step constructors validate before building a tree.
    """
    theta = (mu - r) / sigma
    return p - theta * math.sqrt(p * (1.0 - p) * dt)


def _first_order_factors(mu: float, sigma: float, p: float, dt: float):
    """Gross factors 1 + mu dt +/- sigma sqrt(((1-p)/p or p/(1-p)) dt),
    returned as log returns. Raises if the down factor is not positive."""
    up_g = 1.0 + mu * dt + sigma * math.sqrt((1.0 - p) / p * dt)
    dn_g = 1.0 + mu * dt - sigma * math.sqrt(p / (1.0 - p) * dt)
    if dn_g <= 0.0:
        raise PositivityError(
            f"down factor {dn_g} is not positive; reduce dt or sigma, or move p "
            "toward 1/2"
        )
    return math.log(up_g), math.log(dn_g)


def _check_q(q: float, p: float, dt: float, label: str) -> float:
    if not 0.0 < q < 1.0:
        lo = -math.sqrt((1.0 - p) / p)
        hi = math.sqrt(p / (1.0 - p))
        raise ParameterRegimeError(
            f"{label} risk-neutral weight q={q} lies outside (0, 1); "
            f"theta * sqrt(dt) must lie in ({lo:.6g}, {hi:.6g}) for p={p}, "
            f"got {(p - q) / math.sqrt(p * (1.0 - p)):.6g} at dt={dt}"
        )
    return q


def _check_p_domain(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"upturn probability must lie in (0, 1), got {p}")
    return p


def crr_step(m: MarketParams) -> StepParams:
    """Constant-volatility step: moves +/- sigma sqrt(dt) in log space.

    The natural probability is implied from the drift; it is the exact
    value matching the one-step expected gross return exp(mu dt).
    """
    s = m.sigma * math.sqrt(m.dt)
    e_up, e_dn = math.exp(s), math.exp(-s)
    p = (math.exp(m.mu * m.dt) - e_dn) / (e_up - e_dn)
    q = (math.exp(m.r * m.dt) - e_dn) / (e_up - e_dn)
    if not 0.0 < p < 1.0:
        raise ParameterRegimeError(
            f"implied natural probability {p} outside (0, 1); "
            "|mu| dt is too large for sigma sqrt(dt)"
        )
    _check_q(q, p, m.dt, "CRR")
    return StepParams(up=s, down=-s, p=p, q=q)


def jr_step(m: MarketParams) -> StepParams:
    """Equal-probability step: both moves drift by (mu - sigma^2/2) dt and
    the natural weight is 1/2; the pricing weight absorbs the whole excess
    drift, q = 1/2 - theta sqrt(dt) / 2."""
    drift = (m.mu - 0.5 * m.sigma * m.sigma) * m.dt
    s = m.sigma * math.sqrt(m.dt)
    theta = (m.mu - m.r) / m.sigma
    q = 0.5 - 0.5 * theta * math.sqrt(m.dt)
    _check_q(q, 0.5, m.dt, "JR")
    return StepParams(up=drift + s, down=drift - s, p=0.5, q=q)


def ksrf_step(m: MarketParams, p: float, first_order: bool = True) -> StepParams:
    """Drift-retaining step at natural upturn probability p.

    first_order=True uses the gross factors
        u = 1 + mu dt + sigma sqrt((1-p)/p dt)
        d = 1 + mu dt - sigma sqrt(p/(1-p) dt)
    with q = p - theta sqrt(p (1-p) dt). first_order=False uses the exact
    log factors whose one-step mean and variance match mu dt and sigma^2 dt
    with no O(dt^2) error, and the exact martingale weight
    q = (exp(r dt) - exp(down)) / (exp(up) - exp(down)). The two agree to
    first order in dt and both converge to the same diffusion limit.
    """
    _check_p_domain(p)
    if first_order:
        up, down = _first_order_factors(m.mu, m.sigma, p, m.dt)
        q = first_order_q(m.mu, m.sigma, m.r, p, m.dt)
        _check_q(q, p, m.dt, "KSRF")
        return StepParams(up=up, down=down, p=p, q=q)
    var = m.sigma * m.sigma
    up = (m.mu - var * (1.0 - p) / (2.0 * p)) * m.dt + m.sigma * math.sqrt(
        (1.0 - p) / p * m.dt
    )
    down = (m.mu - var * p / (2.0 * (1.0 - p))) * m.dt - m.sigma * math.sqrt(
        p / (1.0 - p) * m.dt
    )
    e_up, e_dn = math.exp(up), math.exp(down)
    e_r = math.exp(m.r * m.dt)
    if not e_dn < e_r < e_up:
        raise NoArbitrageError(
            f"riskless gross return {e_r} not inside ({e_dn}, {e_up})"
        )
    q = (e_r - e_dn) / (e_up - e_dn)
    _check_q(q, p, m.dt, "KSRF")
    return StepParams(up=up, down=down, p=p, q=q)


@dataclass(frozen=True)
class Lattice:
    """A built tree: node prices level by level, the per-step parameters,
    and how the levels index into each other.

    For a recombining tree, level k holds k+1 prices ordered from the
    all-down node upward. For a non-recombining tree, level k holds 2^k
    prices and the children of node j sit at 2j (down) and 2j+1 (up).
    """

    n_steps: int
    node_prices: tuple
    steps: tuple
    mode: str
    recombining: bool = True
    dt: Optional[float] = None


def build_lattice(spot: float, steps, n: int, mode: str = MODE_KSRF_FIRST_ORDER,
                  dt: Optional[float] = None) -> Lattice:
    """Materialize a recombining tree from one step parameterization or a
    per-step sequence of them.

    Raises DomainError if the per-step spreads differ (such a tree does not
    recombine; the time-varying engine in the diffusion module handles that
    layout), and PositivityError if any node underflows to zero.
    """
    if spot <= 0.0 or not math.isfinite(spot):
        raise PositivityError(f"spot must be positive and finite, got {spot}")
    if n < 1:
        raise DomainError(f"need at least one step, got n={n}")
    seq = as_step_sequence(steps, n)
    spread0 = seq[0].spread
    for k, sp in enumerate(seq):
        if abs(sp.spread - spread0) > _RECOMBINE_TOL:
            raise DomainError(
                f"step {k} spread {sp.spread} differs from step 0 spread "
                f"{spread0}; the tree does not recombine"
            )
    log_spot = math.log(spot)
    levels = []
    cum_down = 0.0
    for k in range(n + 1):
        base = log_spot + cum_down
        prices = np.exp(base + spread0 * np.arange(k + 1))
        if prices[0] <= 0.0:
            raise PositivityError(f"node price underflowed to zero at level {k}")
        levels.append(prices)
        if k < n:
            cum_down += seq[k].down
    return Lattice(
        n_steps=n,
        node_prices=tuple(levels),
        steps=seq,
        mode=mode,
        recombining=True,
        dt=dt,
    )


def crr_lattice(m: MarketParams, spot: float, n: int) -> Lattice:
    return build_lattice(spot, crr_step(m), n, mode=MODE_CRR, dt=m.dt)


def jr_lattice(m: MarketParams, spot: float, n: int) -> Lattice:
    return build_lattice(spot, jr_step(m), n, mode=MODE_JR, dt=m.dt)


def ksrf_lattice(m: MarketParams, p: float, spot: float, n: int,
                 first_order: bool = True) -> Lattice:
    mode = MODE_KSRF_FIRST_ORDER if first_order else MODE_KSRF
    return build_lattice(spot, ksrf_step(m, p, first_order), n, mode=mode, dt=m.dt)


def _terminal_values(spec: OptionSpec, prices: np.ndarray) -> np.ndarray:
    if spec.kind == "call":
        return np.maximum(prices - spec.strike, 0.0)
    if spec.kind == "put":
        return np.maximum(spec.strike - prices, 0.0)
    return np.array([payoff_eval(spec, float(s)) for s in prices])


def backward_induction(lattice: Lattice, spec: OptionSpec, r: float) -> float:
    """Discounted risk-neutral expectation of the terminal payoff.

    The step length is taken from the lattice when it carries one (and then
    n_steps * dt must equal the option maturity), otherwise maturity / n.
    """
    n = lattice.n_steps
    if lattice.dt is not None:
        if abs(n * lattice.dt - spec.maturity) > _MATURITY_TOL:
            raise DomainError(
                f"lattice spans {n * lattice.dt} years but the option matures "
                f"at {spec.maturity}; rebuild with dt = maturity / n"
            )
        dt = lattice.dt
    else:
        dt = spec.maturity / n
    disc = math.exp(-r * dt)
    values = _terminal_values(spec, lattice.node_prices[n])
    if lattice.recombining:
        for k in range(n - 1, -1, -1):
            q = lattice.steps[k].q
            values = disc * (q * values[1:] + (1.0 - q) * values[:-1])
    else:
        for k in range(n - 1, -1, -1):
            q = lattice.steps[k].q
            values = disc * (q * values[1::2] + (1.0 - q) * values[0::2])
    return float(values[0])


def lattice_price(step: StepParams, spot: float, spec: OptionSpec, n: int,
                  r: float, dt: float, strike_smoothing: bool = False) -> float:
    """European price under constant step parameters without materializing
    the whole tree; memory stays O(n).

    strike_smoothing replaces the terminal payoff in the single node cell
    that straddles the strike by its average over that cell. Node payoffs
    sampled at a point make the price a sawtooth in any parameter that
    slides the terminal grid past the strike; averaging the one straddled
    cell removes the sawtooth while changing the price only at O(spread^2),
    so inverse problems over drift or probability become single-rooted.
    Only call and put payoffs support smoothing.
    """
    if n < 1:
        raise DomainError(f"need at least one step, got n={n}")
    if spot <= 0.0:
        raise PositivityError(f"spot must be positive, got {spot}")
    log_nodes = math.log(spot) + n * step.down + step.spread * np.arange(n + 1)
    values = _terminal_values(spec, np.exp(log_nodes))
    if strike_smoothing:
        if spec.kind not in ("call", "put"):
            raise DomainError("strike smoothing requires a call or put payoff")
        values = _smooth_strike_cell(values, log_nodes, spec, step.spread)
    disc = math.exp(-r * dt)
    q = step.q
    for _ in range(n):
        values = disc * (q * values[1:] + (1.0 - q) * values[:-1])
    return float(values[0])


def _smooth_strike_cell(values: np.ndarray, log_nodes: np.ndarray,
                        spec: OptionSpec, spread: float) -> np.ndarray:
    """Average the payoff over the one cell [y - spread/2, y + spread/2]
    that contains log(strike); all other nodes keep their point payoff."""
    y_k = math.log(spec.strike)
    idx = np.searchsorted(log_nodes + 0.5 * spread, y_k)
    if idx >= len(log_nodes):
        return values
    y = log_nodes[idx]
    a, b = y - 0.5 * spread, y + 0.5 * spread
    if not a <= y_k < b:
        return values
    values = values.copy()
    # integral of (e^x - K)^+ over [a, b], divided by the cell width
    call_avg = ((math.exp(b) - math.exp(y_k)) - spec.strike * (b - y_k)) / spread
    if spec.kind == "call":
        values[idx] = call_avg
    else:
        # (K - e^x)^+ = (e^x - K)^+ - e^x + K, averaged term by term
        exp_avg = (math.exp(b) - math.exp(a)) / spread
        values[idx] = call_avg - exp_avg + spec.strike
    return values


def one_period_informed_price(spot: float, p0: float, mu_t: float, sigma_t: float,
                              r_t: float, maturity: float, spec: OptionSpec) -> float:
    """Single-period valuation with simple (non-compounded) rates over the
    whole horizon: gross factors 1 + mu_t T +/- sigma_t sqrt(((1-p)/p or
    p/(1-p)) T), weight q = p0 - theta sqrt(p0 (1-p0) T), discounting by
    1 / (1 + r_t T)."""
    _check_p_domain(p0)
    if maturity <= 0.0:
        raise DomainError(f"maturity must be positive, got {maturity}")
    u = 1.0 + mu_t * maturity + sigma_t * math.sqrt((1.0 - p0) / p0 * maturity)
    d = 1.0 + mu_t * maturity - sigma_t * math.sqrt(p0 / (1.0 - p0) * maturity)
    gross_r = 1.0 + r_t * maturity
    if not d < gross_r < u:
        raise NoArbitrageError(
            f"riskless gross return {gross_r} not inside ({d}, {u})"
        )
    if d <= 0.0:
        raise PositivityError(f"down factor {d} is not positive")
    theta = (mu_t - r_t) / sigma_t
    q = p0 - theta * math.sqrt(p0 * (1.0 - p0) * maturity)
    _check_q(q, p0, maturity, "one-period")
    f_up = payoff_eval(spec, spot * u)
    f_dn = payoff_eval(spec, spot * d)
    return (q * f_up + (1.0 - q) * f_dn) / gross_r
