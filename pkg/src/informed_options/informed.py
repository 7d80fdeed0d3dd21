"""Information measures and the forward-overlay enhancement.

A trader who can guess the direction of the next move with probability
better than 1/2 holds an information edge. This module quantifies that edge
(entropy deficit, divergence from a fair coin, a signed information
level), prices the forward strategy that monetizes it, and folds the
optimal overlay into an enhanced price process whose closed-form limit is a
dividend-yield-corrected lognormal model: the yield is the rent the market
implicitly pays the informed trader.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core_model import MarketParams, market_price_of_risk
from .errors import DomainError, ParameterRegimeError
from .lattice import StepParams, _check_q, _first_order_factors

LN2 = math.log(2.0)


def _sign(x: float) -> float:
    return (x > 0.0) - (x < 0.0)


def shannon_entropy(p: float) -> float:
    """Entropy of a {p, 1-p} coin in nats; defined on the closed interval
    [0, 1] with value 0 at both endpoints."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log(1.0 - p)


def kl_to_fair(p: float) -> float:
    """Divergence of a {p, 1-p} coin from the fair coin, ln 2 - H(p).

    Strict open-interval domain: the divergence is finite at the endpoints
    but a guess probability of exactly 0 or 1 is outside the model.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    return p * math.log(2.0 * p) + (1.0 - p) * math.log(2.0 - 2.0 * p)


def information_level(p: float) -> float:
    """Signed edge: 0 for a fair coin, odd about 1/2, monotone increasing,
    diverging as the guess becomes certain."""
    d = kl_to_fair(p)
    return _sign(p - 0.5) * d / (LN2 - d)


@dataclass(frozen=True)
class InformedTraderSpec:
    """Edge of the informed trader, given in exactly one of two units.

    lambda_info scales the per-step guess probability as
        p_guess = 1/2 (1 + lambda / sqrt(p (1-p)) sqrt(dt)),
    so its effect is invariant to the step probability p. psi_info is the
    same edge quoted per unit of sqrt(p (1-p)): lambda = psi sqrt(p (1-p)).
    """

    lambda_info: Optional[float] = None
    psi_info: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.lambda_info is None) == (self.psi_info is None):
            raise DomainError("give exactly one of lambda_info, psi_info")
        value = self.lambda_info if self.lambda_info is not None else self.psi_info
        if not math.isfinite(value):
            raise DomainError(f"information intensity must be finite, got {value}")

    def intensity(self, p: float) -> float:
        """The edge in lambda units, resolved at step probability p."""
        if self.lambda_info is not None:
            return self.lambda_info
        return self.psi_info * math.sqrt(p * (1.0 - p))

    def guess_probability(self, p: float, dt: float) -> float:
        """Per-step probability of calling the move direction correctly."""
        g = 0.5 * (1.0 + self.intensity(p) / math.sqrt(p * (1.0 - p)) * math.sqrt(dt))
        if not 0.0 < g < 1.0:
            raise ParameterRegimeError(
                f"guess probability {g} outside (0, 1); intensity too large "
                f"for dt={dt}"
            )
        return g


def forward_strategy_moments(m: MarketParams, p: float, p_guess: float,
                             n_fwd: float) -> Tuple[float, float]:
    """One-step mean and variance of the excess return earned by holding
    n_fwd forwards and guessing the move direction with probability p_guess.

    mean = n (2 p_guess - 1) sigma (theta (2p - 1) dt + 2 sqrt(p (1-p) dt))
    var  = n^2 sigma^2 (1 - 4 (2 p_guess - 1)^2 p (1-p)) dt

    The mean is exact for the four-branch step at any theta. The variance
    is the leading-order form: exact when theta = 0, off by O(dt^(3/2))
    otherwise (see forward_strategy_branches for the exact enumeration).
    """
    if not 0.0 < p < 1.0 or not 0.0 <= p_guess <= 1.0:
        raise DomainError("probabilities out of range")
    theta = market_price_of_risk(m)
    edge = 2.0 * p_guess - 1.0
    dt = m.dt
    mean = n_fwd * edge * m.sigma * (
        theta * (2.0 * p - 1.0) * dt + 2.0 * math.sqrt(p * (1.0 - p) * dt)
    )
    var = n_fwd ** 2 * m.sigma ** 2 * (1.0 - 4.0 * edge ** 2 * p * (1.0 - p)) * dt
    return mean, var


def forward_strategy_branches(m: MarketParams, p: float, p_guess: float,
                              n_fwd: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact four-branch distribution of the one-step forward strategy
    return: (values, probabilities), ordered (up & long, down & short,
    up & short, down & long).

    The per-forward payoff is the stock move minus the riskless leg,
    carry c = (mu - r) dt, with move sizes sigma sqrt(((1-p)/p) dt) up and
    sigma sqrt((p/(1-p)) dt) down.
    """
    dt = m.dt
    c = (m.mu - m.r) * dt
    s_up = m.sigma * math.sqrt((1.0 - p) / p * dt)
    s_dn = m.sigma * math.sqrt(p / (1.0 - p) * dt)
    values = n_fwd * np.array([c + s_up, -c + s_dn, -(c + s_up), -(-c + s_dn)])
    probs = np.array([
        p * p_guess,
        (1.0 - p) * p_guess,
        p * (1.0 - p_guess),
        (1.0 - p) * (1.0 - p_guess),
    ])
    return values, probs


def information_ratio(intensity: float) -> float:
    """Annualized mean-to-deviation ratio of the optimal forward strategy,
    2 lambda."""
    return 2.0 * intensity


def enhanced_theta(theta: float, intensity: float, n_fwd: float) -> float:
    """Market price of risk of the stock plus n_fwd information-driven
    forwards: (theta + 2 n lambda) / sqrt(1 + n^2). Maximized over n at
    n = 2 lambda / theta."""
    return (theta + 2.0 * n_fwd * intensity) / math.sqrt(1.0 + n_fwd ** 2)


@dataclass(frozen=True)
class EnhancedProcess:
    """Drift, volatility and derived quantities of the stock-plus-overlay
    portfolio at the optimal forward count."""

    mu_enh: float
    sigma_enh: float
    n_opt: float
    theta_opt: float
    d_y: float


def enhance(m: MarketParams, trader: InformedTraderSpec) -> EnhancedProcess:
    """Enhanced process at the optimal overlay size n = 2 lambda / theta.

    Requires mu > r: the optimal count divides by theta, and the pricing
    interpretation (a positive information rent) needs a positive market
    price of risk. The dividend yield d_y = sign(lambda) sigma
    (sqrt(theta^2 + 4 lambda^2) - theta) is the continuous rent that the
    option market charges for the informed edge; it enters the closed-form
    model exactly where a dividend yield would.
    """
    theta = market_price_of_risk(m)
    if theta <= 0.0:
        raise ParameterRegimeError(
            f"enhancement requires mu > r (theta = {theta:.6g})"
        )
    lam = trader.intensity(m.p0)
    n_opt = 2.0 * lam / theta
    mu_enh = m.mu + 4.0 * m.sigma * lam * lam / theta
    sigma_enh = m.sigma * math.sqrt(1.0 + 4.0 * lam * lam / (theta * theta))
    theta_opt = math.sqrt(theta * theta + 4.0 * lam * lam)
    d_y = _sign(lam) * m.sigma * (theta_opt - theta)
    return EnhancedProcess(
        mu_enh=mu_enh,
        sigma_enh=sigma_enh,
        n_opt=n_opt,
        theta_opt=theta_opt,
        d_y=d_y,
    )


def enhanced_lattice_step(m: MarketParams, trader: InformedTraderSpec,
                          p: float) -> StepParams:
    """Lattice step that prices against the informed trader.

    The move sizes stay those of the traded asset itself (first-order
    factors at (mu, sigma)): the overlay is costless, so it changes no node
    price. Only the pricing weight moves, by the enhanced market price of
    risk: q = p - theta_opt sqrt(p (1-p) dt). As dt -> 0 the tree price
    converges to the closed-form model with dividend yield d_y.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"upturn probability must lie in (0, 1), got {p}")
    enh = enhance(m, trader)
    up, down = _first_order_factors(m.mu, m.sigma, p, m.dt)
    q = p - enh.theta_opt * math.sqrt(p * (1.0 - p) * m.dt)
    _check_q(q, p, m.dt, "enhanced")
    return StepParams(up=up, down=down, p=p, q=q)


def dividend_yield_from_psi(m: MarketParams, psi: float, p: float) -> float:
    """Information rent when the edge is quoted in psi units:
    sign(psi) sigma (sqrt(theta^2 + 4 p (1-p) psi^2) - theta)."""
    theta = market_price_of_risk(m)
    if theta <= 0.0:
        raise ParameterRegimeError(
            f"information rent requires mu > r (theta = {theta:.6g})"
        )
    root = math.sqrt(theta * theta + 4.0 * p * (1.0 - p) * psi * psi)
    return _sign(psi) * m.sigma * (root - theta)
