"""Exact population values of the divergences on small discrete distributions.

Expectations over independent copies are enumerated over atom pairs and
triples, so these values are independent of the sample-side U-centring code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from cmcscreen.kernels import KernelFamily, KernelSpec

MAX_ATOMS = 64


def _as_block(u, m) -> np.ndarray:
    if u is None:
        return np.zeros((m, 0))
    u = np.asarray(u, dtype=float)
    return u.reshape(m, -1)


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """Atoms ``(v, u1, u2)`` with probabilities; ``u1`` may be empty (no conditioning)."""

    v: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        m = self.v.shape[0]
        if self.u1.shape[0] != m or self.u2.shape[0] != m or self.probs.shape != (m,):
            raise ValueError("atom arrays disagree in length")
        if np.any(self.probs < 0) or abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    @classmethod
    def from_atoms(cls, v, u1, u2, probs) -> "DiscreteJoint":
        v = np.asarray(v, dtype=float).reshape(-1)
        m = v.size
        return cls(v, _as_block(u1, m), _as_block(u2, m), np.asarray(probs, dtype=float))

    @classmethod
    def product(cls, *factors: Sequence[tuple]) -> "DiscreteJoint":
        """Joint of independent components; each factor is ``(values, probs)``.

        Three factors give (V, U1, U2); two give (V, U2) with empty U1.
        """
        if len(factors) == 2:
            factors = (factors[0], ((), [1.0]), factors[1])
        (vv, vp), (u1v, u1p), (u2v, u2p) = factors
        u1v = [None] if len(u1v) == 0 else list(u1v)
        rows_v, rows_1, rows_2, pr = [], [], [], []
        for a, pa in zip(vv, vp):
            for b, pb in zip(u1v, u1p):
                for c, pc in zip(u2v, u2p):
                    rows_v.append(a)
                    rows_1.append(() if b is None else np.atleast_1d(b))
                    rows_2.append(np.atleast_1d(c))
                    pr.append(pa * pb * pc)
        m = len(rows_v)
        u1 = np.array(rows_1, dtype=float).reshape(m, -1)
        return cls(np.array(rows_v, float), u1, np.array(rows_2, float).reshape(m, -1), np.array(pr))

    @property
    def size(self) -> int:
        return self.v.shape[0]

    def mean_v(self) -> float:
        return float(self.probs @ self.v)

    def shifted(self, alpha: float = 0.0, beta: float = 1.0) -> "DiscreteJoint":
        return DiscreteJoint(alpha + beta * self.v, self.u1, self.u2, self.probs)

    def centered(self) -> "DiscreteJoint":
        return self.shifted(-self.mean_v())

    def sample(self, n: int, rng: np.random.Generator):
        """``n`` i.i.d. draws as ``(v, u1, u2)`` arrays."""
        idx = rng.choice(self.size, size=n, p=self.probs)
        return self.v[idx], self.u1[idx], self.u2[idx]


def pair_kernel(spec: KernelSpec, h: float, u: np.ndarray) -> np.ndarray:
    """Kernel values between all atom pairs; all ones for an empty block."""
    m = u.shape[0]
    if u.shape[1] == 0:
        return np.ones((m, m))
    out = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            d = u[i] - u[j]
            if spec.family is KernelFamily.LAPLACIAN:
                out[i, j] = math.exp(-np.sum(np.abs(d)) / h)
            elif spec.family is KernelFamily.CAUCHY:
                out[i, j] = 1.0 / (1.0 + np.sum(d * d) / h)
            else:
                out[i, j] = math.exp(-np.sum(d * d) / h)
    return out


def _fixed_h(spec: KernelSpec) -> float:
    if spec.bandwidth.mode != "fixed":
        raise ValueError("population values need a fixed bandwidth")
    return spec.bandwidth.scale


def _u_functional(p, a, b) -> float:
    """E[a12 b12] + E[a12] E[b34] - 2 E[a12 b13] over independent copies 1..4."""
    t1 = np.einsum("i,j,ij,ij->", p, p, a, b)
    ea = np.einsum("i,j,ij->", p, p, a)
    eb = np.einsum("i,j,ij->", p, p, b)
    t3 = np.einsum("i,j,k,ij,ik->", p, p, p, a, b)
    return float(t1 + ea * eb - 2.0 * t3)


def kernel_variance(p, k) -> float:
    """E[k^2(U,U')] + E^2[k(U,U')] - 2 E[k(U,U') k(U,U'')]."""
    return _u_functional(p, k, k)


def population_measure(
    oracle: DiscreteJoint,
    spec: KernelSpec,
    which: str,
    cond_spec: Optional[KernelSpec] = None,
) -> float:
    """One of ``"CMDDsq"``, ``"CMC"``, ``"MDDsq"``, ``"MDC"`` for the joint ``oracle``.

    ``spec`` is the candidate kernel k2, ``cond_spec`` the conditional kernel k1
    (defaults to ``spec``). The correlations are the divergence divided by
    ``sqrt(v(k2, U2) v(k1_V, U1))`` with ``k1_V = V V' k1``, and 0 when that
    product vanishes. The marginal versions ignore ``u1``.
    """
    if oracle.size > MAX_ATOMS:
        raise ValueError(f"atom budget exceeded: {oracle.size} > {MAX_ATOMS}")
    if which not in ("CMDDsq", "CMC", "MDDsq", "MDC"):
        raise ValueError(f"unknown measure {which!r}")
    cond_spec = cond_spec or spec
    p = oracle.probs
    b = pair_kernel(spec, _fixed_h(spec), oracle.u2)
    a = np.outer(oracle.v, oracle.v)
    if which in ("CMDDsq", "CMC"):
        a = a * pair_kernel(cond_spec, _fixed_h(cond_spec), oracle.u1)
    div = _u_functional(p, a, b)
    if which.endswith("sq"):
        return div
    norm = kernel_variance(p, b) * kernel_variance(p, a)
    if norm <= 0.0:
        return 0.0
    return div / math.sqrt(norm)


def mdd_sq_centered_form(oracle: DiscreteJoint, spec: KernelSpec) -> float:
    """E[(V - EV)(V' - EV') k(U2, U2')], the marginal divergence written directly."""
    p = oracle.probs
    k = pair_kernel(spec, _fixed_h(spec), oracle.u2)
    vc = oracle.v - oracle.mean_v()
    return float(np.einsum("i,j,i,j,ij->", p, p, vc, vc, k))
