"""Seeded generators for the four synthetic screening designs.

Every replicate draws from its own counter-based stream (Philox keyed by
``(seed, replicate)``), so a replicate's data never depends on how many
replicates run or in which order. Normal variates are produced by inversion
of uniforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from cmcscreen.errors import ConfigError

ACTIVE_SETS = {
    1: (0, 1, 2, 3, 4, 5),
    2: (0, 4, 9, 14, 19, 24),
    3: (0, 4, 9, 14, 34, 39),
    4: (0, 1, 2, 3, 4),
}


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return np.random.Generator(np.random.Philox(ss))


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    u = rng.random(size)
    u[u == 0.0] = 2.0**-54
    return ndtri(u)


def mvn_sample(n: int, p: int, structure: str, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. N(0, Sigma), unit variances.

    ``structure="compound"``: sigma_ij = rho for i != j.
    ``structure="ar1"``: sigma_ij = rho^|i - j|.
    """
    if not -1.0 < rho < 1.0:
        raise ConfigError(f"rho must lie in (-1, 1), got {rho}")
    z = standard_normal(rng, (n, p))
    if structure == "compound":
        if p > 1 and rho <= -1.0 / (p - 1):
            raise ConfigError(f"compound symmetry needs rho > -1/(p-1), got {rho}")
        t = np.sqrt(1.0 - rho)
        s = np.sqrt(1.0 - rho + p * rho)
        # (t I + c 11^T) z has covariance (1 - rho) I + rho 11^T
        return t * z + ((s - t) / p) * z.sum(axis=1, keepdims=True)
    if structure == "ar1":
        x = np.empty_like(z)
        x[:, 0] = z[:, 0]
        w = np.sqrt(1.0 - rho * rho)
        for j in range(1, p):
            x[:, j] = rho * x[:, j - 1] + w * z[:, j]
        return x
    raise ConfigError(f"unknown covariance structure {structure!r}")


@dataclass(frozen=True)
class SimDesign:
    """One of the four designs. ``tau`` only matters for quantile screening (example 3)."""

    example: int
    n: int
    p: int
    rho: float = 0.0
    tau: Optional[float] = None
    z_dist: str = "normal"
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        if self.example not in ACTIVE_SETS:
            raise ConfigError(f"example must be one of 1-4, got {self.example}")
        if self.p <= max(ACTIVE_SETS[self.example]):
            raise ConfigError(f"p = {self.p} too small for the active set of example {self.example}")
        if self.n < 4:
            raise ConfigError("n must be at least 4")
        if self.z_dist not in ("normal", "chisq1"):
            raise ConfigError(f"z_dist must be 'normal' or 'chisq1', got {self.z_dist!r}")
        if self.tau is not None and not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}")

    @property
    def active(self) -> tuple[int, ...]:
        return ACTIVE_SETS[self.example]

    @property
    def c(self) -> float:
        """Example 1 coefficient on X6 that makes cov(X6, Y) = 0."""
        return 5.0 * self.rho


def gen_design(d: SimDesign) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Draw (y, x, active) for design ``d``; active indices are 0-based."""
    rng = replicate_rng(d.seed, d.replicate)
    n, p = d.n, d.p
    if d.example == 1:
        x = mvn_sample(n, p, "compound", d.rho, rng)
        eps = standard_normal(rng, n)
        y = x[:, :5].sum(axis=1) - d.c * x[:, 5] + eps
    elif d.example == 2:
        x = mvn_sample(n, p, "ar1", d.rho, rng)
        eps = standard_normal(rng, n)
        x1, x5, x10, x15, x20, x25 = (x[:, k - 1] for k in (1, 5, 10, 15, 20, 25))
        y = x1 + x5 + x10 + x1 * x15 + 1.5 * x5 * x20 + 2.0 * x10 * x25 + eps
    elif d.example == 3:
        x = mvn_sample(n, p, "ar1", d.rho, rng)
        eps = standard_normal(rng, n)
        x1, x5, x10, x15, x35, x40 = (x[:, k - 1] for k in (1, 5, 10, 15, 35, 40))
        y = x1 + x5 + x1 * x10 + 1.5 * x5 * x15 + eps * np.exp(x35 + x40)
    else:
        u1 = rng.random(n)
        u2 = rng.random(n)
        z = standard_normal(rng, (n, p - 1))
        if d.z_dist == "chisq1":
            z = z * z
        eps = standard_normal(rng, n)
        x = np.empty((n, p))
        x[:, 0] = (u1 + u2) / 2.0
        x[:, 1:] = (z + 2.0 * u1[:, None]) / 4.0
        x1, x2, x3, x4, x5 = (x[:, k] for k in range(5))
        y = (
            3.0 * (x1 > 0.5) * x2
            + 3.0 * np.sin(2.0 * np.pi * x1) ** 2 * x3
            + 3.0 * (x1 * x1 - 1.0) * x4
            + np.exp(x1) * x5
            + eps
        )
    return y, x, d.active
