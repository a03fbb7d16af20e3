"""Closed-form r-update: the nu-quantile of the scores minimises the hinge/offset objective.

f(r) = (1/(N*nu)) * sum_n max(0, r - y_n) - r is piecewise linear with breakpoints
at the scores. Its right slope just above the k-th smallest score is k/(N*nu) - 1,
so the minimum sits at the nearest-rank quantile sorted[ceil(nu*N)] (1-indexed);
when nu*N is an integer the whole segment up to the next score is optimal and
the left end is returned.
"""
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from shared.errors import ConfigError


@dataclass(frozen=True)
class QuantileSolution:
    r: float
    objective_value: float
    fraction_below: float


def _check(scores, nu: float) -> np.ndarray:
    arr = np.asarray(list(scores) if not isinstance(scores, np.ndarray) else scores, dtype=np.float64).ravel()
    errors = []
    if arr.size == 0:
        errors.append("scores must be non-empty")
    elif not np.all(np.isfinite(arr)):
        errors.append("scores must be finite")
    if not (0.0 < nu < 1.0):
        errors.append(f"nu must lie in (0, 1), got {nu}")
    if errors:
        raise ConfigError(errors)
    return arr


def _objective_sorted(sorted_scores: np.ndarray, nu: float, r: float) -> float:
    n = sorted_scores.size
    active = sorted_scores[sorted_scores < r]
    hinge = math.fsum(float(r - y) for y in active)  # exactly rounded
    return hinge / (n * nu) - r


def _solution(sorted_scores: np.ndarray, nu: float, r: float) -> QuantileSolution:
    below = int(np.searchsorted(sorted_scores, r, side="left"))
    return QuantileSolution(
        r=float(r),
        objective_value=_objective_sorted(sorted_scores, nu, r),
        fraction_below=below / sorted_scores.size,
    )


def quantile_rank(n: int, nu: float) -> int:
    """1-based nearest rank ceil(nu*n), immune to 0.1*30 == 3.0000000000000004."""
    k = math.ceil(round(nu * n, 9))
    return min(max(k, 1), n)


def r_objective(scores: Iterable[float], nu: float, r: float) -> float:
    arr = _check(scores, nu)
    return _objective_sorted(np.sort(arr), nu, float(r))


def nu_quantile(scores: Iterable[float], nu: float) -> QuantileSolution:
    arr = np.sort(_check(scores, nu))
    k = quantile_rank(arr.size, nu)
    return _solution(arr, nu, arr[k - 1])


def brute_force_r(scores: Iterable[float], nu: float) -> QuantileSolution:
    """Evaluate f at every score, every midpoint and one unit past each end; keep the best.

    f only bends at the scores, so its minimum over the reals is attained in this set.
    Ties keep the smallest r, matching nu_quantile's left-endpoint convention.
    """
    arr = np.sort(_check(scores, nu))
    uniq = np.unique(arr)
    candidates = np.concatenate([
        uniq,
        (uniq[:-1] + uniq[1:]) / 2.0,
        [uniq[0] - 1.0, uniq[-1] + 1.0],
    ])
    candidates.sort()
    best_r = float(candidates[0])
    best_f = _objective_sorted(arr, nu, best_r)
    for c in candidates[1:]:
        f = _objective_sorted(arr, nu, float(c))
        if f < best_f:
            best_r, best_f = float(c), f
    return _solution(arr, nu, best_r)
