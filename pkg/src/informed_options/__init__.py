"""Option valuation and calibration for markets with informed traders.

The lattice keeps the natural drift and upturn probability instead of
erasing them, an informed trader's edge prices like a dividend yield in the
closed form, and the calibration routines read drift, probability, and
information intensity back out of quoted option chains.
"""

from .core_model import (
    MarketParams,
    OptionSpec,
    Surface,
    SurfaceRow,
    market_price_of_risk,
    payoff_eval,
)
from .errors import (
    CalibrationError,
    DataError,
    DomainError,
    InformedOptionsError,
    NoArbitrageError,
    ParameterRegimeError,
    PositivityError,
    UsageError,
)
from .lattice import (
    Lattice,
    StepParams,
    backward_induction,
    build_lattice,
    crr_lattice,
    crr_step,
    first_order_q,
    jr_lattice,
    jr_step,
    ksrf_lattice,
    ksrf_step,
    lattice_price,
    one_period_informed_price,
)
from .informed import (
    EnhancedProcess,
    InformedTraderSpec,
    dividend_yield_from_psi,
    enhance,
    enhanced_lattice_step,
    enhanced_theta,
    forward_strategy_branches,
    forward_strategy_moments,
    information_level,
    information_ratio,
    kl_to_fair,
    shannon_entropy,
)
from .closed_form import (
    AS_PRINTED,
    PDE_CONSISTENT,
    BsmInputs,
    bsm_call,
    bsm_put,
    bsm_value_fn,
    norm_cdf,
    pde_residual,
)
from .mean_info import (
    MeanInfoSpec,
    dev_from_delta,
    info_drift,
    info_vol,
    mean_info_lattice,
    mean_info_price,
    mean_info_q,
    mean_info_step,
)
from .diffusion import (
    ParamCurves,
    feynman_kac_price,
    tv_forward_moments,
    tv_lattice,
    tv_optimal_n,
    tv_optimal_theta,
    tv_risk_neutral_q,
    tv_step,
    tv_yield,
)
from .calibration import (
    CalibrationProblem,
    FitResult,
    QuoteRow,
    fit_rho_then_dev,
    implied_p_from_lambda,
    implied_scalar,
    implied_surface,
)
from .chain_cli import (
    EstimatedParams,
    PriceHistory,
    cli_dispatch,
    estimate_params,
    export_surface,
    load_chain,
    load_curves,
    load_history,
    load_params,
    price_from_options,
    read_surface,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
