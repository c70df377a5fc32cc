"""
Goodness-of-fit statistics used to compare simulations with theory and with
exact small-instance laws.
"""
import math
from typing import Hashable, List, Mapping, Sequence, Tuple

import numpy as np
from scipy import stats

from app.errors import DomainError
from app.models import ChiSquareResult

MIN_EXPECTED = 5.0
KS_CRITICAL_1PCT = 1.63


def ks_statistic(samples: Sequence[float], variance: float) -> float:
    """Sup distance between the empirical CDF and the N(0, variance) CDF"""
    if variance is None or variance <= 0:
        raise DomainError(f"Gaussian variance must be positive, got {variance}")
    if len(samples) == 0:
        raise DomainError("KS statistic needs at least one sample")
    return float(stats.kstest(np.asarray(samples, dtype=float), "norm", args=(0.0, math.sqrt(variance))).statistic)


def ks_critical_value(count: int) -> float:
    """Asymptotic 1% null quantile of the one-sample KS distance"""
    return KS_CRITICAL_1PCT / math.sqrt(count)


def _merged_cells(observed: Mapping[Hashable, float], expected: Mapping[Hashable, float]) -> List[Tuple[float, float]]:
    outside = [k for k, c in observed.items() if c > 0 and expected.get(k, 0.0) <= 0.0]
    if outside:
        raise DomainError(f"Observed outcomes {outside} have zero expected probability")
    total = float(sum(observed.values()))
    cells: List[Tuple[float, float]] = []
    obs_acc = exp_acc = 0.0
    for key in sorted(expected):
        obs_acc += observed.get(key, 0.0)
        exp_acc += total * expected[key]
        if exp_acc >= MIN_EXPECTED:
            cells.append((obs_acc, exp_acc))
            obs_acc = exp_acc = 0.0
    if exp_acc > 0.0 or obs_acc > 0.0:
        if cells:
            last_obs, last_exp = cells.pop()
            cells.append((last_obs + obs_acc, last_exp + exp_acc))
        else:
            cells.append((obs_acc, exp_acc))
    return cells


def chi_square(observed: Mapping[Hashable, float], expected: Mapping[Hashable, float]) -> float:
    """Pearson statistic of observed counts against an expected pmf.

    Cells are taken in outcome order and merged with their neighbors until the
    expected count reaches MIN_EXPECTED.
    """
    return chi_square_test(observed, expected).statistic


def chi_square_test(observed: Mapping[Hashable, float], expected: Mapping[Hashable, float]) -> ChiSquareResult:
    if not observed or sum(observed.values()) <= 0:
        raise DomainError("Chi-square test needs a positive number of observations")
    cells = _merged_cells(observed, expected)
    statistic = float(sum((o - e) ** 2 / e for o, e in cells))
    dof = len(cells) - 1
    p_value = float(stats.chi2.sf(statistic, dof)) if dof > 0 else 1.0
    return ChiSquareResult(statistic=statistic, dof=dof, p_value=p_value)


def chi_square_two_sample(counts_a: Mapping[Hashable, int], counts_b: Mapping[Hashable, int]) -> ChiSquareResult:
    """Homogeneity test of two samples of a discrete outcome"""
    keys = sorted(set(counts_a) | set(counts_b))
    columns: List[List[float]] = []
    acc = [0.0, 0.0]
    for key in keys:
        acc[0] += counts_a.get(key, 0)
        acc[1] += counts_b.get(key, 0)
        if min(acc) >= MIN_EXPECTED:
            columns.append(acc)
            acc = [0.0, 0.0]
    if acc[0] or acc[1]:
        if columns:
            columns[-1] = [columns[-1][0] + acc[0], columns[-1][1] + acc[1]]
        else:
            columns.append(acc)
    if len(columns) < 2:
        return ChiSquareResult(statistic=0.0, dof=0, p_value=1.0)
    table = np.array(columns, dtype=float).T
    result = stats.chi2_contingency(table, correction=False)
    return ChiSquareResult(statistic=float(result[0]), dof=int(result[2]), p_value=float(result[1]))


def mean_and_stderr(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if len(arr) == 0:
        raise DomainError("Mean of an empty sample")
    if len(arr) == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))
