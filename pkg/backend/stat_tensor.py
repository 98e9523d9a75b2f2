"""
Phase 1: statistical characterization of every measured scenario (the Sstat tensor).

Rows of each 9 x l frontal slice:
    1 mean, 2 median, 3 q-th percentile (nearest rank), 4 sample std deviation,
    5 relative deviation, 6 standard error, 7 max - min range,
    8 absolute slowdown of row 3 vs the single test, 9 relative slowdown.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from exceptions import InputValidationError
from measurement_store import MeasurementDataset, slice_for_workload
from settings import DEFAULT_PERCENTILE

logger = logging.getLogger(__name__)

STAT_ROWS = 9
MEAN, MEDIAN, PERC, STD, REL_DEV, STD_ERR, RANGE, SLOWDOWN, REL_SLOWDOWN = range(STAT_ROWS)
ROW_NAMES = ('mean', 'median', 'percentile', 'std_dev', 'relative_dev',
             'std_error', 'range', 'slowdown', 'relative_slowdown')


@dataclass(frozen=True, eq=False)
class StatTensor:
    stats: np.ndarray              # 9 x l x m
    percentile_q: float
    zero_mean: np.ndarray          # l x m, row 5 guarded (row 1 == 0)
    zero_base: np.ndarray          # l x m, row 9 guarded (single-test row 3 == 0)

    @property
    def m(self) -> int:
        return self.stats.shape[2]

    def slice(self, scenario: int) -> np.ndarray:
        """Sstat(:,:,j) for a 1-based scenario index"""
        return self.stats[:, :, scenario - 1]

    def row(self, row: int, scenario: int) -> np.ndarray:
        """Sstat(row,:,j), row 1-based as in the tensor documentation"""
        return self.stats[row - 1, :, scenario - 1]

    @property
    def flagged(self) -> bool:
        return bool(self.zero_mean.any() or self.zero_base.any())


def percentile(sample: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the ceil(q*k)-th smallest element"""
    values = np.sort(np.asarray(sample, dtype=float).ravel())
    if values.size == 0:
        raise InputValidationError('percentile of an empty sample')
    if not 0.0 < q < 1.0:
        raise InputValidationError(f"percentile level must lie in (0, 1), got {q}")
    # round away representation noise such as 0.95 * 100 = 95.00000000000001
    rank = max(1, math.ceil(round(q * values.size, 9)))
    return float(values[rank - 1])


def scenario_stats(samples: np.ndarray, q: float = DEFAULT_PERCENTILE) -> np.ndarray:
    """Rows 1-7 of Sstat for one k x l scenario slice"""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    k, l = samples.shape  # noqa: E741
    if k < 2:
        raise InputValidationError(f"need at least 2 repeats for a standard deviation, got {k}")

    out = np.zeros((7, l))
    out[MEAN] = samples.mean(axis=0)
    out[MEDIAN] = np.median(samples, axis=0)
    out[PERC] = [percentile(samples[:, j], q) for j in range(l)]
    out[STD] = samples.std(axis=0, ddof=1)
    nonzero = out[MEAN] != 0
    out[REL_DEV] = np.divide(out[STD], out[MEAN], out=np.zeros(l), where=nonzero)
    out[STD_ERR] = out[STD] / math.sqrt(k)
    out[RANGE] = samples.max(axis=0) - samples.min(axis=0)
    return out


def build_sstat(ds: MeasurementDataset, q: float = DEFAULT_PERCENTILE) -> StatTensor:
    """Compute the full 9 x l x m Sstat tensor of a dataset"""
    stats = np.zeros((STAT_ROWS, ds.l, ds.m))
    for j in range(1, ds.m + 1):
        stats[:7, :, j - 1] = scenario_stats(ds.slice(j), q)
    zero_mean = stats[MEAN] == 0

    zero_base = np.zeros((ds.l, ds.m), dtype=bool)
    for i in range(1, ds.n + 1):
        scenarios, single = slice_for_workload(ds, i)
        base = stats[PERC, :, single - 1]
        for r in scenarios:
            if r == single:
                continue
            slowdown = stats[PERC, :, r - 1] - base
            stats[SLOWDOWN, :, r - 1] = slowdown
            guarded = base == 0
            stats[REL_SLOWDOWN, :, r - 1] = np.divide(slowdown, base, out=np.zeros(ds.l), where=~guarded)
            zero_base[:, r - 1] = guarded

    if zero_mean.any():
        logger.warning(f"⚠️ [Stats] Zero mean in {int(zero_mean.sum())} cells, relative deviation set to 0")
    if zero_base.any():
        logger.warning(f"⚠️ [Stats] Zero single-test percentile in {int(zero_base.sum())} cells, relative slowdown set to 0")
    logger.info(f"📊 [Stats] Built Sstat for {ds.m} scenarios at q={q}")

    for arr in (stats, zero_mean, zero_base):
        arr.setflags(write=False)
    return StatTensor(stats=stats, percentile_q=q, zero_mean=zero_mean, zero_base=zero_base)


def single_test_slice(sstat: StatTensor, ds: MeasurementDataset, workload) -> np.ndarray:
    _, single = slice_for_workload(ds, workload)
    return sstat.slice(single)


def stats_for_samples(samples: np.ndarray, q: float = DEFAULT_PERCENTILE) -> np.ndarray:
    """Sstatnew for a lone single test: rows 1-7 computed, slowdown rows 0"""
    out = np.zeros((STAT_ROWS, np.asarray(samples).shape[1]))
    out[:7] = scenario_stats(samples, q)
    return out
