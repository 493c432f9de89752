"""Translation-invariant kernels, bandwidth policies and Gram matrices.

Three families are supported, all functions of the difference ``x - y``:

* Gaussian:  ``exp(-||x - y||_2^2 / h)``
* Laplacian: ``exp(-||x - y||_1 / h)``
* Cauchy:    ``1 / (1 + ||x - y||_2^2 / h)``

Every kernel value lies in (0, 1] and the diagonal of a Gram matrix is exactly 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"
    CAUCHY = "cauchy"


@dataclass(frozen=True)
class BandwidthPolicy:
    """How the bandwidth ``h`` is obtained for a column.

    ``mode="fixed"`` uses ``scale`` verbatim. ``mode="variance"`` uses
    ``scale * var(column)`` with the n-1 denominator, so ``variance(2)`` and
    ``variance(6)`` are the 2*sigma^2 and 6*sigma^2 rules.
    """

    mode: str
    scale: float

    def __post_init__(self):
        if self.mode not in ("fixed", "variance"):
            raise ValueError(f"unknown bandwidth mode {self.mode!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"bandwidth scale must be positive and finite, got {self.scale}")

    @classmethod
    def fixed(cls, h: float) -> "BandwidthPolicy":
        return cls("fixed", float(h))

    @classmethod
    def variance(cls, factor: float) -> "BandwidthPolicy":
        return cls("variance", float(factor))

    @classmethod
    def parse(cls, text: str) -> "BandwidthPolicy":
        """Parse ``"2"`` (fixed h=2) or ``"2var"`` / ``"6var"`` (variance scaled)."""
        s = text.strip().lower()
        try:
            if s.endswith("var"):
                return cls.variance(float(s[:-3]))
            return cls.fixed(float(s))
        except ValueError:
            raise ValueError(f"cannot parse bandwidth {text!r}; use e.g. '2' or '6var'") from None

    def __str__(self):
        return f"{self.scale:g}" if self.mode == "fixed" else f"{self.scale:g}var"


TWO_SAMPLE_VAR = BandwidthPolicy.variance(2.0)
SIX_SAMPLE_VAR = BandwidthPolicy.variance(6.0)


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily = KernelFamily.GAUSSIAN
    bandwidth: BandwidthPolicy = field(default_factory=lambda: BandwidthPolicy.fixed(2.0))

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))


def _check_h(h):
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"bandwidth must be positive and finite, got {h}")


def kernel_from_sq(family: KernelFamily, sq: np.ndarray, h: float) -> np.ndarray:
    """Kernel values from squared Euclidean distances (Gaussian, Cauchy)."""
    if family is KernelFamily.GAUSSIAN:
        return np.exp(sq * (-1.0 / h))
    if family is KernelFamily.CAUCHY:
        return 1.0 / (1.0 + sq / h)
    raise ValueError(f"{family} needs L1 distances")


def kernel_from_diff(family: KernelFamily, d: np.ndarray, h: float) -> np.ndarray:
    """Kernel values for scalar differences ``d = x_i - x_j``."""
    if family is KernelFamily.LAPLACIAN:
        return np.exp(np.abs(d) * (-1.0 / h))
    return kernel_from_sq(family, d * d, h)


def eval_kernel(spec: KernelSpec, x, y, h: float) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite kernel input")
    _check_h(h)
    d = x - y
    if spec.family is KernelFamily.LAPLACIAN:
        return float(np.exp(-np.sum(np.abs(d)) / h))
    return float(kernel_from_sq(spec.family, np.sum(d * d), h))


def sample_variance(column) -> float:
    column = np.asarray(column, dtype=float)
    return float(np.var(column, ddof=1))


def resolve_bandwidth(policy: BandwidthPolicy, column) -> Optional[float]:
    """Bandwidth for ``column`` under ``policy``.

    Returns None for a zero-variance column under a variance-scaled policy;
    callers treat that column as carrying no information.
    """
    if policy.mode == "fixed":
        return policy.scale
    column = np.asarray(column, dtype=float)
    if column.ndim != 1 or column.size < 2:
        raise ValueError("variance-scaled bandwidth needs a column of length >= 2")
    var = sample_variance(column)
    if not np.isfinite(var):
        raise ValueError("non-finite column")
    if var <= 0.0:
        return None
    return policy.scale * var


def gram_matrix(spec: KernelSpec, rows, h: float) -> np.ndarray:
    """Dense n x n Gram matrix of ``rows`` (n x d, or a length-n vector)."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError(f"rows must be an n x d matrix, got shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("non-finite entries in Gram input")
    _check_h(h)
    n = rows.shape[0]
    iu, ju = np.triu_indices(n, 1)
    diff = rows[iu] - rows[ju]
    if spec.family is KernelFamily.LAPLACIAN:
        vals = np.exp(np.abs(diff).sum(axis=1) * (-1.0 / h))
    else:
        vals = kernel_from_sq(spec.family, (diff * diff).sum(axis=1), h)
    g = np.empty((n, n))
    g[iu, ju] = vals
    g[ju, iu] = vals
    np.fill_diagonal(g, 1.0)
    return g
