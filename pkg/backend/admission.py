"""
Admission gating: what-if evaluation of a candidate service on every node of the
cluster, checking operational boundaries first and timing requirements second.
"""

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import ValidationError

from boundary_guard import check_scenario
from descriptor import requirement_levels
from exceptions import ZERO_SOLUTION_REMEDIES, InputValidationError, NoCombinedScenariosError, ZeroSolutionError
from measurement_store import RESPONSE_TIME, MeasurementDataset
from models import (AdmissionConfig, AdmissionDecision, ClusterState, NodeRecord, NodeReport,
                    RequirementCheck, ServiceSpec, Verdict)
from predictor import Prediction, QuestionVector, predict_q1, predict_q2, predict_q2_fallback
from settings import ADMISSION_WORKERS
from stat_tensor import StatTensor, build_sstat

logger = logging.getLogger(__name__)

BOUNDARY = 'boundary'
INSUFFICIENT = 'insufficient measurements'
TIMING = 'timing'
FALLBACK_REMEDY = 'q2 fallback'


def load_cluster(path: Union[str, Path]) -> ClusterState:
    """Read and validate a cluster JSON file"""
    try:
        data = json.loads(Path(path).read_text())
        return ClusterState.model_validate(data)
    except (OSError, json.JSONDecodeError) as e:
        raise InputValidationError(f"cannot read cluster file {path}: {e}") from e
    except ValidationError as e:
        raise InputValidationError(f"invalid cluster file {path}: {e.errors()[0]['msg']}") from e


def node_order(cluster: ClusterState) -> List[NodeRecord]:
    """Placement order: fewest deployed services first, then by name"""
    return sorted(cluster.nodes, key=lambda node: (len(node.services), node.name))


def probe_parameter(ds: MeasurementDataset, probe: str) -> int:
    """Dataset parameter a probe is checked on, response time unless a parameter carries its name"""
    return ds.param_names.index(probe) if probe in ds.param_names else RESPONSE_TIME


class AdmissionController:
    """Evaluates candidates against one dataset, caching Sstat per percentile level"""

    def __init__(self, ds: MeasurementDataset, cfg: Optional[AdmissionConfig] = None,
                 sstat_cache: Optional[Dict[float, StatTensor]] = None, workers: int = ADMISSION_WORKERS):
        self.ds = ds
        self.cfg = cfg or AdmissionConfig()
        self.sstat_cache = sstat_cache if sstat_cache is not None else {}
        self.workers = max(1, workers)

    def sstat(self, q: float) -> StatTensor:
        if q not in self.sstat_cache:
            self.sstat_cache[q] = build_sstat(self.ds, q)
        return self.sstat_cache[q]

    # ================== PER-NODE WHAT-IF ==================

    def _predict(self, candidate: ServiceSpec, background: List[str], q: float,
                 new_single_test: Optional[np.ndarray]) -> Prediction:
        sstat = self.sstat(q)
        names = list(self.ds.workload_names)
        if candidate.measured_workload is not None:
            question = QuestionVector.from_background(names, candidate.measured_workload, Counter(background))
            try:
                prediction = predict_q1(self.ds, sstat, question, gamma=self.cfg.gamma)
                if not (prediction.fidelity.uncovered_background and self.cfg.allow_fallback):
                    return prediction
            except ZeroSolutionError:
                if not self.cfg.allow_fallback:
                    raise
            logger.info(f"↩️ [Admission] '{candidate.name}': background not covered, trying the Q2 fallback")
            return predict_q2_fallback(self.ds, sstat, question, gamma=self.cfg.gamma)
        question = QuestionVector.from_background(names + [candidate.name], candidate.name, Counter(background))
        prediction, _, _ = predict_q2(self.ds, sstat, new_single_test, question,
                                      name=candidate.name, gamma=self.cfg.gamma)
        return prediction

    def evaluate_node(self, node: NodeRecord, candidate: ServiceSpec,
                      new_single_test: Optional[np.ndarray] = None) -> NodeReport:
        """Boundary check, then one prediction per requirement level"""
        limits = node.limits or self.cfg.boundaries()
        profiles = [s.profile for s in node.services] + [candidate.profile]
        boundary = check_scenario(profiles, limits)
        background = [s.measured_workload or s.name for s in node.services]
        report = NodeReport(node=node.name, background=background, boundary=boundary)
        if not boundary.passed:
            logger.info(f"🚧 [Admission] '{candidate.name}' on '{node.name}': outside boundary on {boundary.violations}")
            return report.model_copy(update={'failure': BOUNDARY})

        unmeasured = [s.name for s in node.services if s.measured_workload not in self.ds.workload_names]
        if candidate.requirements and unmeasured:
            return report.model_copy(update={'failure': INSUFFICIENT, 'missing': unmeasured,
                                             'remedy': 'measure the deployed services and link them via measuredWorkload'})

        checks, predictions, remedy = [], {}, None
        for q in requirement_levels(candidate):
            try:
                prediction = self._predict(candidate, background, q, new_single_test)
            except ZeroSolutionError as e:
                logger.info(f"❌ [Admission] '{candidate.name}' on '{node.name}': {e.message}")
                return report.model_copy(update={'failure': INSUFFICIENT, 'missing': e.missing,
                                                 'remedy': '; or '.join(e.remedies)})
            except NoCombinedScenariosError as e:
                return report.model_copy(update={'failure': INSUFFICIENT, 'missing': [e.workload],
                                                 'remedy': 'measure the workload in combined scenarios'})
            if prediction.fidelity.uncovered_background:
                missing = list(prediction.fidelity.uncovered_background)
                logger.info(f"❌ [Admission] '{candidate.name}' on '{node.name}': never measured with {missing}")
                return report.model_copy(update={'failure': INSUFFICIENT, 'missing': missing,
                                                 'remedy': '; or '.join(ZERO_SOLUTION_REMEDIES)})
            if prediction.fidelity.zero_solution_fallback:
                remedy = FALLBACK_REMEDY
            predictions[f"{q:g}"] = prediction.to_dict(self.ds.param_names)
            for req in (r for r in candidate.requirements if r.probability == q):
                predicted = float(prediction.percentile_estimate[probe_parameter(self.ds, req.probe_name)])
                checks.append(RequirementCheck(
                    name=req.name, probe=req.probe_name, probability=req.probability,
                    time_ms=req.time_ms, predicted_ms=predicted, passed=predicted <= req.time_ms,
                ))

        failure = TIMING if any(not c.passed for c in checks) else None
        logger.debug(f"🔎 [Admission] '{candidate.name}' on '{node.name}': {failure or 'passes'}")
        return report.model_copy(update={'prediction': predictions or None, 'requirements': checks,
                                         'failure': failure, 'remedy': remedy})

    # ================== DECISIONS ==================

    def evaluate(self, cluster: ClusterState, candidate: ServiceSpec,
                 new_single_test: Optional[np.ndarray] = None) -> AdmissionDecision:
        """Admit on the first fully passing node in placement order, otherwise reject"""
        if candidate.measured_workload is None and new_single_test is None and candidate.requirements:
            raise InputValidationError(
                f"candidate '{candidate.name}' needs a measuredWorkload or a single-test sample for Q2")
        if candidate.measured_workload is not None and candidate.measured_workload not in self.ds.workload_names:
            raise InputValidationError(f"measured workload '{candidate.measured_workload}' is not in the dataset")
        q2_candidate = candidate.measured_workload is None and new_single_test is not None
        if q2_candidate and candidate.name in self.ds.workload_names:
            raise InputValidationError(
                f"candidate '{candidate.name}' shares its name with a dataset workload; "
                f"set measuredWorkload or rename it for Q2")
        if new_single_test is not None:
            new_single_test = np.asarray(new_single_test, dtype=float)

        ordered = node_order(cluster)
        # Sstat levels are filled before the pool starts
        for q in requirement_levels(candidate):
            self.sstat(q)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            reports = list(pool.map(lambda node: self.evaluate_node(node, candidate, new_single_test), ordered))

        chosen = next((r for r in reports if r.passed), None)
        if chosen is not None:
            verdict = Verdict(admit=True, node=chosen.node)
            logger.info(f"✅ [Admission] Admit '{candidate.name}' on '{chosen.node}'")
        else:
            verdict = Verdict(admit=False, reason=rejection_reason(reports))
            logger.info(f"❌ [Admission] Reject '{candidate.name}': {verdict.reason}")
        return AdmissionDecision(candidate=candidate.name, verdict=verdict, per_node_reports=reports)

    def reevaluate(self, cluster: ClusterState) -> Dict[str, NodeReport]:
        """Every deployed service re-checked on its node with the other occupants as background"""
        results = {}
        for node in node_order(cluster):
            for service in node.services:
                others = NodeRecord(name=node.name, limits=node.limits,
                                    services=[s for s in node.services if s.name != service.name])
                if service.requirements and service.measured_workload not in self.ds.workload_names:
                    boundary = check_scenario([s.profile for s in node.services], node.limits or self.cfg.boundaries())
                    results[service.name] = NodeReport(
                        node=node.name, background=[s.measured_workload or s.name for s in others.services],
                        boundary=boundary, failure=INSUFFICIENT, missing=[service.name],
                        remedy='measure the service and link it via measuredWorkload',
                    )
                    continue
                for q in requirement_levels(service):
                    self.sstat(q)
                results[service.name] = self.evaluate_node(others, service)
        failing = sorted(name for name, r in results.items() if not r.passed)
        logger.info(f"🔁 [Admission] Re-evaluated {len(results)} services, {len(failing)} failing {failing}")
        return results


def rejection_reason(reports: List[NodeReport]) -> str:
    if not reports:
        return 'no nodes in cluster'
    counts = Counter(r.failure for r in reports)
    dominant = counts.most_common(1)[0][0]
    if dominant == INSUFFICIENT:
        missing = sorted({m for r in reports if r.failure == INSUFFICIENT for m in r.missing})
        return f"{INSUFFICIENT} (never measured with the target: {', '.join(missing) or 'none'})"
    return dominant


def evaluate_admission(cluster: ClusterState, candidate: ServiceSpec, ds: MeasurementDataset,
                       cfg: Optional[AdmissionConfig] = None, sstat_cache: Optional[Dict[float, StatTensor]] = None,
                       new_single_test: Optional[np.ndarray] = None, workers: int = ADMISSION_WORKERS) -> AdmissionDecision:
    return AdmissionController(ds, cfg, sstat_cache, workers).evaluate(cluster, candidate, new_single_test)


def reevaluate_deployment(cluster: ClusterState, ds: MeasurementDataset, cfg: Optional[AdmissionConfig] = None,
                          sstat_cache: Optional[Dict[float, StatTensor]] = None) -> Dict[str, NodeReport]:
    return AdmissionController(ds, cfg, sstat_cache).reevaluate(cluster)
