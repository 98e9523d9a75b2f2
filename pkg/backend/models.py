"""
Pydantic models shared by the predictor, the admission controller and the CLI.
Everything here crosses a file boundary (JSON config, cluster files, reports).
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, model_validator

from settings import BOUNDARY_DEFAULTS, DEFAULT_GAMMA

# ================== RESOURCES AND BOUNDARIES ==================


class ResourceProfile(BaseModel):
    cpu_utilization: float = Field(0.0, ge=0, allow_inf_nan=False)   # fraction of node CPU
    io_utilization: float = Field(0.0, ge=0, allow_inf_nan=False)    # fraction of node IO bandwidth
    llc_miss_rate: float = Field(0.0, ge=0, allow_inf_nan=False)     # LLC misses per ms


class BoundaryConfig(BaseModel):
    cpu_limit: float = Field(BOUNDARY_DEFAULTS['cpu_limit'], gt=0)
    io_limit: float = Field(BOUNDARY_DEFAULTS['io_limit'], gt=0)
    llc_limit: float = Field(BOUNDARY_DEFAULTS['llc_limit'], gt=0)

    @classmethod
    def load(cls, path: Union[str, Path]):
        """Read limits from a JSON config file, unknown keys ignored"""
        return cls.model_validate(json.loads(Path(path).read_text()))


class AdmissionConfig(BoundaryConfig):
    gamma: float = Field(DEFAULT_GAMMA, ge=0)
    allow_fallback: bool = False

    def boundaries(self) -> BoundaryConfig:
        return BoundaryConfig(cpu_limit=self.cpu_limit, io_limit=self.io_limit, llc_limit=self.llc_limit)


class DimensionCheck(BaseModel):
    dimension: str
    aggregate: float
    limit: float
    passed: bool


class BoundaryReport(BaseModel):
    dimensions: List[DimensionCheck]
    passed: bool

    def dimension(self, name: str) -> DimensionCheck:
        return next(d for d in self.dimensions if d.dimension == name)

    @property
    def violations(self) -> List[str]:
        return [d.dimension for d in self.dimensions if not d.passed]


# ================== SERVICES AND CLUSTER ==================


class TimingRequirement(BaseModel):
    probe_name: str
    probability: float = Field(gt=0, lt=1)
    time_ms: float = Field(gt=0, allow_inf_nan=False)
    name: Optional[str] = None


class ServiceSpec(BaseModel):
    name: str
    container: str = ""
    image: str = ""
    probes: List[str] = []
    requirements: List[TimingRequirement] = []
    profile: ResourceProfile = ResourceProfile()
    measured_workload: Optional[str] = None
    extra: Dict[str, Any] = {}

    @model_validator(mode='after')
    def check_requirements(self):
        for req in self.requirements:
            if req.probe_name not in self.probes:
                raise ValueError(f"requirement on undeclared probe '{req.probe_name}'")
        for probe in self.probes:
            limits = sorted((r.probability, r.time_ms) for r in self.requirements if r.probe_name == probe)
            for (p_low, t_low), (p_high, t_high) in zip(limits, limits[1:]):
                if p_high > p_low and t_high < t_low:
                    raise ValueError(
                        f"probe '{probe}': probability {p_high} bounded by {t_high} ms "
                        f"is tighter than probability {p_low} bounded by {t_low} ms"
                    )
        return self


class NodeRecord(BaseModel):
    name: str
    limits: Optional[BoundaryConfig] = None
    services: List[ServiceSpec] = []


class ClusterState(BaseModel):
    nodes: List[NodeRecord] = []

    @model_validator(mode='after')
    def check_unique_placement(self):
        names = [s.name for node in self.nodes for s in node.services]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"services deployed more than once: {duplicates}")
        node_names = [node.name for node in self.nodes]
        if len(set(node_names)) != len(node_names):
            raise ValueError('node names must be unique')
        return self


# ================== ADMISSION REPORTS ==================


class RequirementCheck(BaseModel):
    name: Optional[str] = None
    probe: str
    probability: float
    time_ms: float
    predicted_ms: Optional[float] = None
    passed: bool


class NodeReport(BaseModel):
    node: str
    background: List[str] = []
    boundary: BoundaryReport
    prediction: Optional[Dict[str, Any]] = None
    requirements: List[RequirementCheck] = []
    failure: Optional[str] = None           # "boundary" | "insufficient measurements" | "timing"
    missing: List[str] = []
    remedy: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.failure is None


class Verdict(BaseModel):
    admit: bool
    node: Optional[str] = None
    reason: Optional[str] = None


class AdmissionDecision(BaseModel):
    candidate: str
    verdict: Verdict
    per_node_reports: List[NodeReport]


# ================== SYNTHETIC WORKLOADS ==================


class Sensitivity(BaseModel):
    cpu_s: float = Field(0.0, ge=0)
    io_s: float = Field(0.0, ge=0)
    mem_s: float = Field(0.0, ge=0)


class SyntheticWorkload(BaseModel):
    name: str
    base_response_ms: float = Field(gt=0)
    profile: ResourceProfile = ResourceProfile()
    sensitivity: Sensitivity = Sensitivity()
    noise: float = Field(0.0, ge=0)


class WorkloadSpecFile(BaseModel):
    workloads: List[SyntheticWorkload]
    boundaries: BoundaryConfig = BoundaryConfig()


# ================== EXPERIMENT REPORTS ==================


class ExperimentRow(BaseModel):
    label: str
    target: str
    background: List[str]
    measured: float
    predicted: float
    oracle: float
    relative_error: float
    conservative: bool

    @classmethod
    def build(cls, label, target, background, measured, predicted, oracle):
        return cls(
            label=label, target=target, background=list(background),
            measured=measured, predicted=predicted, oracle=oracle,
            relative_error=(predicted - measured) / measured,
            conservative=predicted >= measured,
        )


class ExcludedCombination(BaseModel):
    label: str
    violations: List[str]


class ExperimentSummary(BaseModel):
    count: int
    mean_relative_error: float
    min_relative_error: float
    max_relative_error: float
    conservative_fraction: float


class ExperimentReport(BaseModel):
    kind: str
    seed: int
    rows: List[ExperimentRow]
    summary: ExperimentSummary
    excluded: List[ExcludedCombination] = []
    unpredictable: List[str] = []
