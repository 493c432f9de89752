"""U-centering and the unbiased U-statistic estimators.

For a symmetric n x n matrix ``t`` with zeroed diagonal, the U-centred matrix is

    t*_ij = t_ij - r_i/(n-2) - r_j/(n-2) + s/((n-1)(n-2)),   i != j,
    t*_ii = 0,

with ``r`` the row sums and ``s`` the grand sum. For response side
``a_ij = v_i v_j k1(u1_i, u1_j)`` and candidate side ``b_ij = k2(u2_i, u2_j)``,

    cmdd_sq_hat = sum_{i != j} a*_ij b*_ij / (n (n - 3))

is unbiased for

    E[V V' k1 k2] + E[V V' k1] E[k2'] - 2 E[V V' k1(U1, U1') k2(U2, U2'')].

The marginal divergence is the special case ``k1 == 1``.

The correlations (``cmc_hat``, ``mdc_hat``) are computed on the mean-centred
response, which makes them exactly invariant under ``v -> alpha + beta * v``.
With ``k1 == 1`` centring changes nothing (U-centring already removes it);
with a non-trivial conditional kernel it removes the ``alpha^2 k1`` term that
would otherwise leak the dependence between the conditional block and the
candidate into the score.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cmcscreen.errors import DegenerateDataError

# Centred entries below this fraction of the input scale are rounding noise
# (constant or numerically constant inputs) and are snapped to exact zero.
NULL_RTOL = 1e-12


def _fsum_rows(m: np.ndarray) -> float:
    # pairwise row partials, compensated across rows
    return math.fsum(m.sum(axis=1))


@dataclass(frozen=True, eq=False)
class CenteredMatrix:
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @functools.cached_property
    def sumsq(self) -> float:
        v = self.values
        return _fsum_rows(v * v)

    def inner(self, other: "CenteredMatrix") -> float:
        """Off-diagonal inner product sum_{i != j} self_ij * other_ij."""
        if other.n != self.n:
            raise ValueError(f"size mismatch: {self.n} vs {other.n}")
        return _fsum_rows(self.values * other.values)


def _as_square(t, name="matrix") -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"{name} must be square, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError(f"{name} has non-finite entries")
    return t


def double_center(t) -> CenteredMatrix:
    """U-centre a symmetric matrix; its diagonal is ignored (treated as zero)."""
    t = _as_square(t)
    n = t.shape[0]
    if n < 4:
        raise DegenerateDataError(f"U-centring needs n >= 4, got n = {n}")
    if not np.array_equal(t, t.T):
        if not np.allclose(t, t.T, rtol=1e-12, atol=0.0):
            raise ValueError("matrix is not symmetric")
        t = 0.5 * (t + t.T)
    t = t.copy()
    np.fill_diagonal(t, 0.0)
    r = t.sum(axis=1)
    s = math.fsum(r)
    out = t - r[:, None] / (n - 2) - r[None, :] / (n - 2) + s / ((n - 1) * (n - 2))
    np.fill_diagonal(out, 0.0)
    scale = np.max(np.abs(t))
    if np.max(np.abs(out)) <= NULL_RTOL * scale:
        out[:] = 0.0
    out.flags.writeable = False
    return CenteredMatrix(out)


def _as_response(v, n: Optional[int] = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"response must be a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("response has non-finite values")
    if n is not None and v.size != n:
        raise ValueError(f"size mismatch: response has {v.size} values, Gram is {n} x {n}")
    if v.size < 4:
        raise DegenerateDataError(f"estimators need n >= 4, got n = {v.size}")
    return v


def response_matrix(v, g1=None) -> np.ndarray:
    """Raw response-side matrix ``a_ij = v_i v_j g1_ij`` (``g1 = 1`` if omitted)."""
    v = np.asarray(v, dtype=float)
    a = np.outer(v, v)
    if g1 is not None:
        a *= g1
    return a


def center_response(v, g1=None) -> CenteredMatrix:
    """The reusable response side a* for one response and conditional Gram."""
    g1 = None if g1 is None else _as_square(g1, "g1")
    v = _as_response(v, None if g1 is None else g1.shape[0])
    return double_center(response_matrix(v, g1))


def _demean(v: np.ndarray) -> np.ndarray:
    # a constant response must centre to exact zeros, not mean-rounding residue
    if np.all(v == v[0]):
        return np.zeros_like(v)
    return v - v.mean()


def _ratio(num: float, ss_a: float, ss_b: float) -> float:
    if ss_a <= 0.0 or ss_b <= 0.0:
        return 0.0
    r = num / math.sqrt(ss_a * ss_b)
    # |r| <= 1 by Cauchy-Schwarz; clip last-ulp excursions
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True, eq=False)
class CenteredPair:
    """Response side a* and candidate side b* for one estimator evaluation."""

    a_star: CenteredMatrix
    b_star: CenteredMatrix

    def __post_init__(self):
        if self.a_star.n != self.b_star.n:
            raise ValueError(f"size mismatch: {self.a_star.n} vs {self.b_star.n}")

    @property
    def n(self) -> int:
        return self.a_star.n

    def divergence_sq(self) -> float:
        n = self.n
        return self.a_star.inner(self.b_star) / (n * (n - 3))

    def correlation(self) -> float:
        return _ratio(self.a_star.inner(self.b_star), self.a_star.sumsq, self.b_star.sumsq)


def _check_gram(g, n, name):
    g = _as_square(g, name)
    if g.shape[0] != n:
        raise ValueError(f"size mismatch: {name} is {g.shape[0]} x {g.shape[0]}, expected {n}")
    return g


def cmdd_sq_hat(v, g1, g2) -> float:
    """Unbiased estimate of the squared conditional divergence (may be < 0)."""
    v = _as_response(v)
    g1 = _check_gram(g1, v.size, "g1")
    g2 = _check_gram(g2, v.size, "g2")
    return CenteredPair(double_center(response_matrix(v, g1)), double_center(g2)).divergence_sq()


def cmc_hat(v, g1, g2) -> float:
    """Sample conditional correlation, in [-1, 1]; 0 when either side is null."""
    v = _as_response(v)
    g1 = _check_gram(g1, v.size, "g1")
    g2 = _check_gram(g2, v.size, "g2")
    vc = _demean(v)
    return CenteredPair(double_center(response_matrix(vc, g1)), double_center(g2)).correlation()


def mdd_sq_hat(v, g) -> float:
    v = _as_response(v)
    g = _check_gram(g, v.size, "g")
    return CenteredPair(double_center(response_matrix(v)), double_center(g)).divergence_sq()


def mdc_hat(v, g) -> float:
    v = _as_response(v)
    g = _check_gram(g, v.size, "g")
    vc = _demean(v)
    return CenteredPair(double_center(response_matrix(vc)), double_center(g)).correlation()


def s_n_stat(v, a, b) -> float:
    """Normaliser (mean v^2 - offdiag mean of a) * (1 - offdiag mean of b)."""
    v = np.asarray(v, dtype=float)
    a = _as_square(a, "a")
    b = _as_square(b, "b")
    n = v.size
    if n < 2:
        raise DegenerateDataError("s_n needs n >= 2")
    if a.shape[0] != n or b.shape[0] != n:
        raise ValueError(f"size mismatch: v has {n} values, a is {a.shape}, b is {b.shape}")
    m = n * (n - 1)
    a_off = math.fsum(a.sum(axis=1)) - math.fsum(np.diag(a))
    b_off = math.fsum(b.sum(axis=1)) - math.fsum(np.diag(b))
    return (math.fsum(v * v) / n - a_off / m) * (1.0 - b_off / m)


def signed_root(x: float) -> float:
    """Divergence-scale value sign(x) * sqrt(|x|) of a squared estimate."""
    return math.copysign(math.sqrt(abs(x)), x)


@dataclass(frozen=True)
class MeasureValue:
    divergence_sq: float
    correlation: float
    s_n: float

    @property
    def divergence(self) -> float:
        return signed_root(self.divergence_sq)


def measure(v, g2, g1=None) -> MeasureValue:
    """All three reported quantities for one candidate Gram ``g2``.

    Without ``g1`` this is the marginal (MDD/MDC) version.
    """
    v = _as_response(v)
    g2 = _check_gram(g2, v.size, "g2")
    if g1 is None:
        div = mdd_sq_hat(v, g2)
        corr = mdc_hat(v, g2)
    else:
        g1 = _check_gram(g1, v.size, "g1")
        div = cmdd_sq_hat(v, g1, g2)
        corr = cmc_hat(v, g1, g2)
    return MeasureValue(div, corr, s_n_stat(v, response_matrix(v, g1), g2))


# --- packed fast path ------------------------------------------------------
#
# Screening evaluates thousands of candidates against one response side. The
# packed form keeps a* as its strict upper triangle and works on candidate
# kernel values for the n(n-1)/2 distinct pairs only.


@functools.lru_cache(maxsize=8)
def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n, 1)
    iu.flags.writeable = False
    ju.flags.writeable = False
    return iu, ju


class PackedResponse:
    """Shared response side for scoring many candidates against one a*.

    ``correlation(b_pairs)`` takes raw candidate kernel values for the pairs
    ``pair_indices(n)`` and returns the same ratio as :func:`cmc_hat`.
    """

    def __init__(self, a_star: CenteredMatrix):
        self.n = a_star.n
        iu, ju = pair_indices(self.n)
        self.a_pairs = np.ascontiguousarray(a_star.values[iu, ju])
        self.sumsq = a_star.sumsq

    @classmethod
    def from_response(cls, v, g1=None) -> "PackedResponse":
        v = _as_response(v)
        return cls(center_response(_demean(v), g1))

    def center_pairs(self, b_pairs: np.ndarray) -> np.ndarray:
        n = self.n
        iu, ju = pair_indices(n)
        r = np.bincount(iu, b_pairs, minlength=n) + np.bincount(ju, b_pairs, minlength=n)
        s = math.fsum(r)
        bc = b_pairs - (r[iu] + r[ju]) / (n - 2) + s / ((n - 1) * (n - 2))
        if np.max(np.abs(bc)) <= NULL_RTOL * np.max(np.abs(b_pairs)):
            bc[:] = 0.0
        return bc

    def correlation(self, b_pairs: np.ndarray) -> float:
        bc = self.center_pairs(b_pairs)
        # factor 2 for the lower triangle cancels in the ratio
        return _ratio(float(np.sum(self.a_pairs * bc)), 0.5 * self.sumsq, float(np.sum(bc * bc)))
