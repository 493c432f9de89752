"""Two-stage S-CMC screening and its marginal and quantile variants.

Stage one ranks every predictor by its marginal correlation score
``psi_j = max_h mdc(y, x_j; h)^2`` over two variance-scaled bandwidths and takes
the top ``d1`` as the conditional set (unless one is supplied). Stage two
residualises each remaining candidate on ``[1 | X_S]`` and scores it with
``c_j = cmc(y, x_j_resid | X_S)^2``. Candidates are ranked by

    A_j = max(psi_j / max psi, c_j / max c)

and the top ``d2 - d1`` are kept next to the conditional set.

All top-k selections break ties by the lower column index. Indices are 0-based.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from cmcscreen.errors import ConfigError, DegenerateDataError
from cmcscreen.estimators import PackedResponse, cmc_hat, pair_indices
from cmcscreen.kernels import (
    SIX_SAMPLE_VAR,
    TWO_SAMPLE_VAR,
    BandwidthPolicy,
    KernelFamily,
    KernelSpec,
    gram_matrix,
    kernel_from_diff,
    resolve_bandwidth,
)
from cmcscreen.projection import build_basis


@dataclass(frozen=True)
class ScreeningConfig:
    conditional_set: Optional[tuple[int, ...]] = None
    d1: Optional[int] = None
    d2: Optional[int] = None
    mdc_bandwidths: tuple[BandwidthPolicy, ...] = (TWO_SAMPLE_VAR, SIX_SAMPLE_VAR)
    cmc_bandwidth: BandwidthPolicy = field(default_factory=lambda: BandwidthPolicy.fixed(2.0))
    kernel: KernelFamily = KernelFamily.GAUSSIAN
    quantile: Optional[float] = None
    seed: int = 0
    workers: int = 1
    # diagnostic: rebuild the response side for every candidate (slow path)
    rebuild_response: bool = False

    def __post_init__(self):
        if self.conditional_set is not None:
            object.__setattr__(self, "conditional_set", tuple(int(i) for i in self.conditional_set))
        object.__setattr__(self, "mdc_bandwidths", tuple(self.mdc_bandwidths))
        object.__setattr__(self, "kernel", KernelFamily(self.kernel))
        if self.quantile is not None and not 0.0 < self.quantile < 1.0:
            raise ConfigError(f"quantile level must lie in (0, 1), got {self.quantile}")
        for name in ("d1", "d2"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ConfigError(f"{name} must be a positive integer, got {val}")
        if self.d1 is not None and self.d2 is not None and self.d2 <= self.d1:
            raise ConfigError(f"d2 must exceed d1 (d1 = {self.d1}, d2 = {self.d2})")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.mdc_bandwidths:
            raise ConfigError("at least one marginal bandwidth is required")

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = asdict(self)
        d["conditional_set"] = None if self.conditional_set is None else list(self.conditional_set)
        d["mdc_bandwidths"] = [str(b) for b in self.mdc_bandwidths]
        d["cmc_bandwidth"] = str(self.cmc_bandwidth)
        d["kernel"] = self.kernel.value
        if not include_runtime:
            del d["workers"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScreeningConfig":
        d = dict(d)
        d["mdc_bandwidths"] = tuple(BandwidthPolicy.parse(b) for b in d["mdc_bandwidths"])
        d["cmc_bandwidth"] = BandwidthPolicy.parse(d["cmc_bandwidth"])
        if d.get("conditional_set") is not None:
            d["conditional_set"] = tuple(d["conditional_set"])
        return cls(**d)


def default_d1(n: int) -> int:
    return int(math.floor(math.sqrt(n / math.log(n))))


def default_d2(n: int) -> int:
    return int(math.floor(n / math.log(n)))


def resolve_sizes(cfg: ScreeningConfig, n: int, p: int) -> tuple[int, int]:
    """(d1, d2) after defaults. Defaults are clipped to fit p; explicit values are checked."""
    if cfg.d2 is not None:
        d2 = cfg.d2
        if d2 > p or d2 > n:
            raise ConfigError(f"d2 = {d2} exceeds p = {p} or n = {n}")
    else:
        d2 = min(default_d2(n), p)
    if cfg.conditional_set is not None:
        d1 = len(set(cfg.conditional_set))
        if cfg.d1 is not None and cfg.d1 != d1:
            raise ConfigError(f"d1 = {cfg.d1} disagrees with conditional set of size {d1}")
    elif cfg.d1 is not None:
        d1 = cfg.d1
    else:
        d1 = max(1, min(default_d1(n), d2 - 1))
    if d1 >= d2:
        raise ConfigError(f"d2 must exceed d1 (d1 = {d1}, d2 = {d2})")
    return d1, d2


def _check_data(y, x) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError(f"expected y of length n and x of shape (n, p); got {y.shape}, {x.shape}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
        raise ValueError("data contain non-finite values")
    if y.size < 4:
        raise DegenerateDataError(f"screening needs n >= 4, got n = {y.size}")
    return y, x


def _chunked(fn, p: int, workers: int) -> np.ndarray:
    """Apply ``fn(list_of_columns) -> scores`` over 0..p-1, optionally threaded.

    Each column is scored independently, so the result does not depend on
    ``workers``.
    """
    cols = np.arange(p)
    if workers <= 1 or p < 2:
        return fn(cols)
    chunks = np.array_split(cols, min(p, 4 * workers))
    with ThreadPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(fn, chunks))
    return np.concatenate(parts)


def _column_scorer(resp: PackedResponse, family: KernelFamily, policies, x: np.ndarray):
    iu, ju = pair_indices(resp.n)

    def score(cols) -> np.ndarray:
        out = np.zeros(len(cols))
        for k, j in enumerate(cols):
            col = x[:, j]
            d = col[iu] - col[ju]
            best = 0.0
            for policy in policies:
                h = resolve_bandwidth(policy, col)
                if h is None:
                    continue
                r = resp.correlation(kernel_from_diff(family, d, h))
                best = max(best, r * r)
            out[k] = best
        return out

    return score


def rank_marginal_mdc(
    y,
    x,
    policies: Sequence[BandwidthPolicy] = (TWO_SAMPLE_VAR, SIX_SAMPLE_VAR),
    family: KernelFamily = KernelFamily.GAUSSIAN,
    workers: int = 1,
) -> np.ndarray:
    """Squared marginal correlation of every column, maximised over ``policies``.

    Constant columns score 0.
    """
    y, x = _check_data(y, x)
    resp = PackedResponse.from_response(y)
    return _chunked(_column_scorer(resp, KernelFamily(family), tuple(policies), x), x.shape[1], workers)


def select_conditional_set(scores, d1: int) -> np.ndarray:
    """Indices of the ``d1`` largest scores, in descending score order."""
    scores = np.asarray(scores, dtype=float)
    if d1 > scores.size:
        raise ConfigError(f"d1 = {d1} exceeds the number of predictors {scores.size}")
    return top_k(scores, d1)


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    # stable sort keeps lower indices first among ties
    return np.argsort(-scores, kind="stable")[:k]


def standardize_columns(block: np.ndarray) -> np.ndarray:
    block = block - block.mean(axis=0)
    sd = block.std(axis=0, ddof=1)
    sd[sd == 0] = 1.0
    return block / sd


def _block_bandwidth(policy: BandwidthPolicy) -> float:
    # the conditional block is standardised, so per-column variance is 1
    return policy.scale


def _ratio_to_max(s: np.ndarray) -> np.ndarray:
    m = s.max() if s.size else 0.0
    if m <= 0.0:
        return np.zeros_like(s)
    return s / m


@dataclass(eq=False)
class ScreeningResult:
    """Outcome of one screening run (all indices 0-based).

    ``candidates``, ``psi``, ``cmc`` and ``combined`` are aligned arrays over the
    predictors outside the conditional set. ``full_ranking`` lists the
    conditional set (by ``psi`` descending) followed by the candidates by
    combined score.
    """

    method: str
    conditional_set: np.ndarray
    candidates: np.ndarray
    psi: np.ndarray
    cmc: np.ndarray
    combined: np.ndarray
    selected: np.ndarray
    full_ranking: np.ndarray
    marginal_scores: np.ndarray

    _ARRAYS = ("conditional_set", "candidates", "psi", "cmc", "combined", "selected",
               "full_ranking", "marginal_scores")

    def __eq__(self, other):
        if not isinstance(other, ScreeningResult):
            return NotImplemented
        return self.method == other.method and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in self._ARRAYS
        )

    @property
    def p(self) -> int:
        return self.full_ranking.size

    def rank_of(self, index: int) -> int:
        """1-based position of predictor ``index`` in ``full_ranking``."""
        return int(np.flatnonzero(self.full_ranking == index)[0]) + 1

    def minimal_model_size(self, active) -> int:
        pos = np.empty(self.p, dtype=int)
        pos[self.full_ranking] = np.arange(1, self.p + 1)
        return int(pos[np.asarray(list(active), dtype=int)].max())

    def to_dict(self) -> dict:
        d = {"method": self.method}
        for k in self._ARRAYS:
            d[k] = getattr(self, k).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScreeningResult":
        ints = ("conditional_set", "candidates", "selected", "full_ranking")
        kw = {k: np.asarray(d[k], dtype=int if k in ints else float) for k in cls._ARRAYS}
        return cls(method=d["method"], **kw)


def _response(y, cfg: ScreeningConfig) -> np.ndarray:
    if cfg.quantile is not None:
        return quantile_transform(y, cfg.quantile)
    return y


def mdc_screen(y, x, cfg: ScreeningConfig = ScreeningConfig()) -> ScreeningResult:
    """Marginal-only screening: keep the top ``d2`` predictors by ``psi``."""
    y, x = _check_data(y, x)
    y = _response(y, cfg)
    n, p = x.shape
    d2 = cfg.d2 if cfg.d2 is not None else min(default_d2(n), p)
    if d2 > p:
        raise ConfigError(f"d2 = {d2} exceeds p = {p}")
    psi = rank_marginal_mdc(y, x, cfg.mdc_bandwidths, cfg.kernel, cfg.workers)
    order = top_k(psi, p)
    return ScreeningResult(
        method="mdc",
        conditional_set=np.zeros(0, dtype=int),
        candidates=np.arange(p),
        psi=psi,
        cmc=np.zeros(p),
        combined=_ratio_to_max(psi),
        selected=order[:d2].copy(),
        full_ranking=order,
        marginal_scores=psi,
    )


def scmc_screen(y, x, cfg: ScreeningConfig = ScreeningConfig()) -> ScreeningResult:
    y, x = _check_data(y, x)
    y = _response(y, cfg)
    n, p = x.shape
    if p < 2:
        raise ConfigError("screening needs at least two predictors")
    d1, d2 = resolve_sizes(cfg, n, p)

    psi_all = rank_marginal_mdc(y, x, cfg.mdc_bandwidths, cfg.kernel, cfg.workers)

    if cfg.conditional_set is not None:
        s = np.unique(np.asarray(cfg.conditional_set, dtype=int))
        if s.size and (s[0] < 0 or s[-1] >= p):
            raise ConfigError(f"conditional set indices must lie in [0, {p})")
    else:
        s = np.sort(select_conditional_set(psi_all, d1))
    cand, c_scores = score_candidates(y, x, s, cfg)

    psi = psi_all[cand]
    combined = np.maximum(_ratio_to_max(psi), _ratio_to_max(c_scores))
    cand_order = cand[top_k(combined, cand.size)]
    s_order = s[top_k(psi_all[s], s.size)]
    ranking = np.concatenate([s_order, cand_order])
    return ScreeningResult(
        method="scmc",
        conditional_set=s_order,
        candidates=cand,
        psi=psi,
        cmc=c_scores,
        combined=combined,
        selected=ranking[:d2].copy(),
        full_ranking=ranking,
        marginal_scores=psi_all,
    )


def score_candidates(y, x, conditional_set, cfg: ScreeningConfig) -> tuple[np.ndarray, np.ndarray]:
    """Stage two: squared conditional correlation of every column outside the set.

    ``y`` is used as given (no quantile transform). Returns the candidate
    indices in ascending order and their scores.
    """
    s = np.sort(np.asarray(conditional_set, dtype=int))
    p = x.shape[1]
    cand = np.setdiff1d(np.arange(p), s)
    block = standardize_columns(x[:, s])
    spec = KernelSpec(cfg.kernel, cfg.cmc_bandwidth)
    basis = build_basis(x[:, s])
    xc = x[:, cand]
    resid = xc - basis.q @ (basis.q.T @ xc)

    if cfg.rebuild_response:
        scorer = _rebuild_scorer(y, block, spec, resid)
    else:
        g1 = gram_matrix(spec, block, _block_bandwidth(cfg.cmc_bandwidth))
        resp = PackedResponse.from_response(y, g1)
        scorer = _column_scorer(resp, cfg.kernel, (cfg.cmc_bandwidth,), resid)
    return cand, _chunked(scorer, cand.size, cfg.workers)


def _rebuild_scorer(y, block, spec: KernelSpec, resid):
    def score(cols) -> np.ndarray:
        out = np.zeros(len(cols))
        for k, j in enumerate(cols):
            g1 = gram_matrix(spec, block, _block_bandwidth(spec.bandwidth))
            h = resolve_bandwidth(spec.bandwidth, resid[:, j])
            if h is None:
                continue
            r = cmc_hat(y, g1, gram_matrix(spec, resid[:, j], h))
            out[k] = r * r
        return out

    return score


def quantile_transform(y, tau: float) -> np.ndarray:
    """Two-valued recoding ``tau - 1(y <= q)``.

    ``q`` is the inverse-ECDF sample quantile: the smallest order statistic
    whose ECDF value is at least ``tau``.
    """
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"quantile level must lie in (0, 1), got {tau}")
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 2:
        raise DegenerateDataError("quantile transform needs n >= 2")
    # round first so tau * n that is integral up to rounding is not bumped up
    k = max(1, int(math.ceil(round(tau * n, 9))))
    q = np.sort(y)[k - 1]
    return tau - (y <= q).astype(float)


def quantile_screen(y, x, cfg: ScreeningConfig) -> ScreeningResult:
    if cfg.quantile is None:
        raise ConfigError("quantile screening needs cfg.quantile")
    return scmc_screen(y, x, cfg)
