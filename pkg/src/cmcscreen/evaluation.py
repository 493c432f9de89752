"""Selection proportions and minimal-model-size quantiles over replicates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class EvalReport:
    active: tuple[int, ...]
    p_i: dict  # active index -> selection proportion
    p_all: float
    s_q: dict  # quantile level -> quantile of minimal model size
    reps: int
    min_sizes: np.ndarray

    def row(self) -> list:
        return [self.p_i[i] for i in self.active] + [self.p_all] + [self.s_q[q] for q in sorted(self.s_q)]


def evaluate_selections(
    selections: Sequence[Iterable[int]],
    min_sizes: Sequence[int],
    active,
    q_levels=(0.5,),
) -> EvalReport:
    """Core aggregation on raw per-replicate records.

    Quantiles of the minimal model size use midpoint interpolation, so two
    replicates with sizes 6 and 10 give a median of 8.
    """
    if len(selections) == 0:
        raise ValueError("no runs to evaluate")
    if len(selections) != len(min_sizes):
        raise ValueError("selections and min_sizes differ in length")
    active = tuple(int(i) for i in active)
    sets = [set(int(i) for i in s) for s in selections]
    reps = len(sets)
    p_i = {i: sum(i in s for s in sets) / reps for i in active}
    p_all = sum(set(active) <= s for s in sets) / reps
    sizes = np.asarray(min_sizes, dtype=int)
    s_q = {float(q): float(np.quantile(sizes, q, method="midpoint")) for q in q_levels}
    return EvalReport(active, p_i, p_all, s_q, reps, sizes)


def evaluate(runs, active, q_levels=(0.5,)) -> EvalReport:
    """Aggregate a list of :class:`ScreeningResult` sharing ``p`` and ``active``."""
    runs = list(runs)
    if not runs:
        raise ValueError("no runs to evaluate")
    p = runs[0].p
    if any(r.p != p for r in runs):
        raise ValueError("runs disagree on the number of predictors")
    return evaluate_selections(
        [r.selected for r in runs], [r.minimal_model_size(active) for r in runs], active, q_levels
    )
