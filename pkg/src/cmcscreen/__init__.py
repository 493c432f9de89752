"""Kernel conditional martingale difference correlation and S-CMC screening."""

from cmcscreen.errors import ConfigError, DegenerateDataError
from cmcscreen.estimators import (
    MeasureValue,
    cmc_hat,
    cmdd_sq_hat,
    double_center,
    mdc_hat,
    mdd_sq_hat,
    s_n_stat,
)
from cmcscreen.kernels import BandwidthPolicy, KernelFamily, KernelSpec, gram_matrix
from cmcscreen.screening import (
    ScreeningConfig,
    ScreeningResult,
    mdc_screen,
    quantile_screen,
    quantile_transform,
    scmc_screen,
)

__version__ = "0.1.0"

__all__ = [
    "BandwidthPolicy",
    "ConfigError",
    "DegenerateDataError",
    "KernelFamily",
    "KernelSpec",
    "MeasureValue",
    "ScreeningConfig",
    "ScreeningResult",
    "cmc_hat",
    "cmdd_sq_hat",
    "double_center",
    "gram_matrix",
    "mdc_hat",
    "mdc_screen",
    "mdd_sq_hat",
    "quantile_screen",
    "quantile_transform",
    "s_n_stat",
    "scmc_screen",
]
