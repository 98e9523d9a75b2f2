"""
Operational boundaries of the predictor: CPU utilization, IO throughput and
LLC miss rate, summed over every colocated workload on a node.
"""

import logging
import math
from typing import List, Mapping, Optional, Sequence

from models import BoundaryConfig, BoundaryReport, DimensionCheck, ResourceProfile

logger = logging.getLogger(__name__)

DIMENSIONS = (
    ('cpu', 'cpu_utilization', 'cpu_limit'),
    ('io', 'io_utilization', 'io_limit'),
    ('memory', 'llc_miss_rate', 'llc_limit'),
)


def check_scenario(profiles: Sequence[ResourceProfile], cfg: Optional[BoundaryConfig] = None) -> BoundaryReport:
    """Aggregate each dimension over the colocated profiles and compare against the limits"""
    cfg = cfg or BoundaryConfig()
    checks = []
    for dimension, field, limit_field in DIMENSIONS:
        aggregate = math.fsum(getattr(p, field) for p in profiles)
        limit = getattr(cfg, limit_field)
        checks.append(DimensionCheck(dimension=dimension, aggregate=aggregate, limit=limit, passed=aggregate <= limit))
    report = BoundaryReport(dimensions=checks, passed=all(c.passed for c in checks))
    if not report.passed:
        logger.debug(f"🚧 [Boundary] {len(profiles)} profiles exceed limits on {report.violations}")
    return report


def profiles_for_encoding(profiles_by_name: Mapping[str, ResourceProfile], names: Sequence[str],
                          encoding: Sequence[int]) -> List[ResourceProfile]:
    """Expand a scenario encoding into the profiles it colocates, one per running instance"""
    expanded = []
    for name, count in zip(names, encoding):
        expanded.extend([profiles_by_name[name]] * int(count))
    return expanded


