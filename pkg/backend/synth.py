"""
Synthetic workload harness: a parametric interference model that produces
measurement datasets and the oracle percentiles predictions are judged against.

Response time of a target colocated with a background multiset B:

    location = base * (1 + cpu_s * max(0, cpu(target + B) - 1)
                         + io_s * max(0, io(target + B) - 1))
                    * (1 + mem_s * (1 - exp(-llc(B) / llc_limit)))

Memory interference saturates as the background approaches the LLC limit.

Samples are location times multiplicative log-normal noise with median 1.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy.stats import lognorm

from boundary_guard import check_scenario, profiles_for_encoding
from exceptions import InputValidationError
from measurement_store import MeasurementDataset, build_dataset
from models import BoundaryConfig, SyntheticWorkload, WorkloadSpecFile

logger = logging.getLogger(__name__)

PARAM_NAMES = ('response_time', 'llc_misses')
PARAM_UNITS = ('ms', 'count')

Scenario = Tuple[int, Tuple[int, ...]]   # (1-based owner, encoding)
SeedLike = Union[int, Sequence[int]]


@dataclass(frozen=True)
class GroundTruth:
    location: float    # median response time, ms
    scale: float       # relative noise of the workload

    @property
    def sigma(self) -> float:
        """Log-space standard deviation matching the relative noise"""
        return math.sqrt(math.log1p(self.scale ** 2))


def ground_truth_response(target: SyntheticWorkload, background: Sequence[SyntheticWorkload],
                          cfg: Optional[BoundaryConfig] = None) -> GroundTruth:
    cfg = cfg or BoundaryConfig()
    everyone = [target, *background]
    cpu = math.fsum(w.profile.cpu_utilization for w in everyone)
    io = math.fsum(w.profile.io_utilization for w in everyone)
    llc = math.fsum(w.profile.llc_miss_rate for w in background)

    s = target.sensitivity
    linear = 1.0 + s.cpu_s * max(0.0, cpu - 1.0) + s.io_s * max(0.0, io - 1.0)
    memory = 1.0 + s.mem_s * -math.expm1(-llc / cfg.llc_limit)
    location = target.base_response_ms * linear * memory
    return GroundTruth(location=location, scale=target.noise)


def oracle_percentile(truth: GroundTruth, q: float) -> float:
    """Analytic q-quantile of the ground-truth response-time distribution"""
    if not 0.0 < q < 1.0:
        raise InputValidationError(f"percentile level must lie in (0, 1), got {q}")
    if truth.sigma == 0:
        return truth.location
    return float(lognorm(s=truth.sigma, scale=truth.location).ppf(q))


def sample_responses(target: SyntheticWorkload, background: Sequence[SyntheticWorkload], k: int,
                     rng: np.random.Generator, cfg: Optional[BoundaryConfig] = None) -> np.ndarray:
    """k x 2 samples: response time and LLC misses per request"""
    truth = ground_truth_response(target, background, cfg)
    if truth.sigma == 0:
        response = np.full(k, truth.location)
    else:
        response = truth.location * np.exp(truth.sigma * rng.standard_normal(k))
    return np.column_stack([response, target.profile.llc_miss_rate * response])


def _members(workloads: Sequence[SyntheticWorkload], owner: int, encoding: Sequence[int]) -> List[SyntheticWorkload]:
    """Background of a scenario: every instance in the encoding except one of the owner"""
    background = []
    for index, count in enumerate(encoding, start=1):
        count = int(count) - (1 if index == owner else 0)
        background.extend([workloads[index - 1]] * count)
    return background


def generate_dataset(workloads: Sequence[SyntheticWorkload], scenarios: Sequence[Scenario], k: int,
                     seed: SeedLike, cfg: Optional[BoundaryConfig] = None) -> MeasurementDataset:
    """Draw k samples per scenario; a workload's single test is added when the list lacks it"""
    n = len(workloads)
    if k < 2:
        raise InputValidationError(f"need at least 2 repeats, got k={k}")
    names = [w.name for w in workloads]
    if len(set(names)) != n:
        raise InputValidationError('workload names must be unique')

    blocks = {i: [] for i in range(1, n + 1)}
    for owner, encoding in scenarios:
        encoding = tuple(int(c) for c in encoding)
        if not 1 <= owner <= n or len(encoding) != n or min(encoding) < 0 or encoding[owner - 1] < 1:
            raise InputValidationError(f"invalid scenario encoding {list(encoding)} for owner {owner}")
        if encoding not in blocks[owner]:
            blocks[owner].append(encoding)
    for owner, block in blocks.items():
        single = tuple(1 if i == owner else 0 for i in range(1, n + 1))
        if single in block:
            block.remove(single)
        block.insert(0, single)

    ordered = [(owner, encoding) for owner in range(1, n + 1) for encoding in blocks[owner]]
    children = np.random.SeedSequence(seed).spawn(len(ordered))
    measured = {name: [] for name in names}
    for (owner, encoding), child in zip(ordered, children):
        rng = np.random.default_rng(child)
        samples = sample_responses(workloads[owner - 1], _members(workloads, owner, encoding), k, rng, cfg)
        measured[names[owner - 1]].append((encoding, samples))

    ds = build_dataset(names, measured, PARAM_UNITS, PARAM_NAMES)
    logger.info(f"🧪 [Synth] Generated {ds.m} scenarios for {n} workloads, k={k}")
    return ds


def scenario_grid(workloads: Sequence[SyntheticWorkload], max_background: int,
                  cfg: Optional[BoundaryConfig] = None) -> List[Scenario]:
    """Every owner with every background multiset up to max_background, inside the boundaries"""
    cfg = cfg or BoundaryConfig()
    n = len(workloads)
    names = [w.name for w in workloads]
    profiles_by_name = {w.name: w.profile for w in workloads}
    grid, skipped = [], 0
    for owner in range(1, n + 1):
        for size in range(0, max_background + 1):
            for combo in itertools.combinations_with_replacement(range(1, n + 1), size):
                encoding = [0] * n
                encoding[owner - 1] += 1
                for index in combo:
                    encoding[index - 1] += 1
                if not check_scenario(profiles_for_encoding(profiles_by_name, names, encoding), cfg).passed:
                    skipped += 1
                    continue
                grid.append((owner, tuple(encoding)))
    if skipped:
        logger.info(f"🚧 [Synth] Skipped {skipped} scenarios outside the operational boundary")
    return grid


def load_workload_spec(path: Union[str, Path]) -> WorkloadSpecFile:
    try:
        return WorkloadSpecFile.model_validate(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as e:
        raise InputValidationError(f"cannot read workload spec {path}: {e}") from e
    except ValidationError as e:
        raise InputValidationError(f"invalid workload spec {path}: {e.errors()[0]['msg']}") from e
