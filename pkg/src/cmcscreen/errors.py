class ConfigError(ValueError):
    """Invalid screening or simulation configuration (d1/d2, tau, indices)."""


class DegenerateDataError(ValueError):
    """Data too small or too degenerate for the U-statistic estimators."""
