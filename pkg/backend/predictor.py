"""
Phases 2 and 3 of the colocation predictor.

Q1 predicts an already measured workload under a questioned colocation b:
the background part of b (the target's own instance removed) is fitted by NNLS
against the backgrounds of the workload's combined scenarios M1, and the single-test
percentile is shifted by the penalized, weighted slowdowns of the selected scenarios.
A question equal to a measured scenario is answered by that scenario alone.
Q2 matches a new workload's single test to the most similar measured workload and
returns that workload's Q1 prediction.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from exceptions import InputValidationError, NoCombinedScenariosError, ZeroSolutionError
from measurement_store import (RESPONSE_TIME, MeasurementDataset, WorkloadRef, add_workload, encoding_label,
                               slice_for_workload)
from models import BoundaryReport
from nnls import NnlsSolution, solve_nnls
from settings import DEFAULT_GAMMA, EPSILON
from stat_tensor import (MEAN, MEDIAN, PERC, RANGE, SLOWDOWN, STD, StatTensor, build_sstat,
                         single_test_slice, stats_for_samples)

logger = logging.getLogger(__name__)

SIMILARITY_ROWS = (MEAN, MEDIAN, STD)


# ================== QUESTIONS AND PREDICTIONS ==================

@dataclass(frozen=True)
class QuestionVector:
    """Integer encoding b of a colocation scenario; target is 1-based"""

    multiplicities: Tuple[int, ...]
    target: int

    def __post_init__(self):
        values = tuple(int(c) for c in self.multiplicities)
        if any(c < 0 for c in values) or any(c != raw for c, raw in zip(values, self.multiplicities)):
            raise InputValidationError(f"question entries must be nonnegative integers, got {list(self.multiplicities)}")
        if not 1 <= self.target <= len(values):
            raise InputValidationError(f"target {self.target} out of range 1..{len(values)}")
        if values[self.target - 1] < 1:
            raise InputValidationError('question does not include its target workload')
        object.__setattr__(self, 'multiplicities', values)

    def as_array(self) -> np.ndarray:
        return np.array(self.multiplicities, dtype=float)

    @property
    def is_single_test(self) -> bool:
        return sum(self.multiplicities) == 1

    def background(self) -> Dict[int, int]:
        """1-based workload -> number of background instances"""
        counts = {}
        for index, count in enumerate(self.multiplicities, start=1):
            count -= 1 if index == self.target else 0
            if count:
                counts[index] = count
        return counts

    @classmethod
    def from_background(cls, names: Sequence[str], target: str, background: Mapping[str, int]):
        """b for target running once with the given background multiset"""
        names = list(names)
        if target not in names:
            raise InputValidationError(f"unknown target workload '{target}'")
        counts = [0] * len(names)
        counts[names.index(target)] = 1
        for name, count in background.items():
            if name not in names:
                raise InputValidationError(f"unknown background workload '{name}'")
            counts[names.index(name)] += int(count)
        return cls(tuple(counts), names.index(target) + 1)


@dataclass(frozen=True)
class Fidelity:
    residual_norm: float = 0.0
    zero_solution_fallback: bool = False
    boundary_warnings: Tuple[str, ...] = ()
    uncovered_background: Tuple[str, ...] = ()     # never measured with the target


@dataclass(frozen=True, eq=False)
class Prediction:
    target: str
    percentile_q: float
    percentile_estimate: np.ndarray
    base: np.ndarray
    weights: Optional[NnlsSolution]
    scenarios: Tuple[int, ...] = ()          # 1-based scenario index of each M1 column
    penalties: np.ndarray = field(default_factory=lambda: np.zeros(0))
    slowdowns: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    matched_workload: Optional[str] = None
    fidelity: Fidelity = Fidelity()

    def response_time(self) -> float:
        return float(self.percentile_estimate[RESPONSE_TIME])

    def to_dict(self, param_names: Optional[Sequence[str]] = None) -> Dict:
        names = list(param_names or [f"param_{j}" for j in range(len(self.base))])
        weights = self.weights.weights.tolist() if self.weights is not None else []
        return {
            'target': self.target,
            'percentile_q': self.percentile_q,
            'percentile_estimate': dict(zip(names, self.percentile_estimate.tolist())),
            'base': dict(zip(names, self.base.tolist())),
            'weights': weights,
            'scenarios': list(self.scenarios),
            'active_scenarios': [s for s, w in zip(self.scenarios, weights) if w > 0],
            'penalties': self.penalties.tolist(),
            'matched_workload': self.matched_workload,
            'fidelity': {
                'residual_norm': self.fidelity.residual_norm,
                'zero_solution_fallback': self.fidelity.zero_solution_fallback,
                'boundary_warnings': list(self.fidelity.boundary_warnings),
                'uncovered_background': list(self.fidelity.uncovered_background),
            },
        }


def combine_slowdowns(base: np.ndarray, penalties: np.ndarray, weights: np.ndarray, slowdowns: np.ndarray) -> np.ndarray:
    """base + sum_j alpha_j * x_j * Sstat(8,:,j), accumulated in column order"""
    estimate = np.array(base, dtype=float)
    for j in range(len(weights)):
        estimate = estimate + penalties[j] * weights[j] * slowdowns[j]
    return estimate


# ================== PHASE 2: FIT MODEL ==================

def build_fit_model(ds: MeasurementDataset, target: WorkloadRef) -> Tuple[np.ndarray, List[int]]:
    """M1 = M(:, v(i)+1 : v(i+1)-1) and the scenario index of each of its columns"""
    i = ds.workload_index(target)
    scenarios, single = slice_for_workload(ds, i)
    columns = [j for j in scenarios if j != single]
    if not columns:
        raise NoCombinedScenariosError(ds.workload_names[i - 1])
    matrix = ds.scenario_matrix[:, [j - 1 for j in columns]].astype(float)
    return matrix, columns


def penalization(sstat: StatTensor, scenario: int, gamma: float = DEFAULT_GAMMA) -> float:
    """alpha_j = 1 + gamma * range / percentile of the response time in scenario j"""
    spread = sstat.stats[RANGE, 0, scenario - 1]
    level = sstat.stats[PERC, 0, scenario - 1]
    return 1.0 + gamma * float(spread) / max(float(level), EPSILON)


def background_fit_model(matrix: np.ndarray, question: QuestionVector) -> Tuple[np.ndarray, np.ndarray]:
    """M1 and b with the target's own instance removed; only the background is fitted"""
    design = np.array(matrix, dtype=float)
    rhs = question.as_array()
    design[question.target - 1] -= 1.0
    rhs[question.target - 1] -= 1.0
    return design, rhs


def _exact_column(design: np.ndarray, rhs: np.ndarray) -> Optional[int]:
    """First fitted column that equals the questioned background"""
    matches = np.flatnonzero(np.all(design == rhs[:, None], axis=0))
    return int(matches[0]) if len(matches) else None


def _missing_background(ds: MeasurementDataset, design: np.ndarray, question: QuestionVector) -> List[str]:
    """Background workloads that never ran with the target in its measured scenarios"""
    return [ds.workload_names[index - 1] for index in question.background() if not np.any(design[index - 1] > 0)]


# ================== PHASE 3: PREDICTION ==================

def predict_q1(ds: MeasurementDataset, sstat: StatTensor, question: QuestionVector,
               gamma: float = DEFAULT_GAMMA, row_weights: Optional[Sequence[float]] = None) -> Prediction:
    """Q1: percentile prediction for an already measured workload"""
    if len(question.multiplicities) != ds.n:
        raise InputValidationError(f"question has {len(question.multiplicities)} entries, dataset has {ds.n} workloads")
    target = ds.workload_names[question.target - 1]
    _, single = slice_for_workload(ds, question.target)
    base = np.array(sstat.stats[PERC, :, single - 1])

    if question.is_single_test:
        logger.info(f"🔮 [Predictor] '{target}' alone: returning single-test percentile")
        return Prediction(target=target, percentile_q=sstat.percentile_q, percentile_estimate=base.copy(),
                          base=base, weights=None)

    matrix, columns = build_fit_model(ds, question.target)
    design, rhs = background_fit_model(matrix, question)
    exact = _exact_column(design, rhs)
    if exact is not None:
        weights = np.zeros(len(columns))
        weights[exact] = 1.0
        solution = NnlsSolution(weights=weights, residual_norm=0.0)
    else:
        solution = solve_nnls(design, rhs, row_weights=row_weights)
    missing = _missing_background(ds, design, question)
    if solution.is_zero:
        logger.warning(f"❌ [Predictor] Measured scenarios of '{target}' do not match {list(question.multiplicities)}")
        raise ZeroSolutionError(target, question.multiplicities, missing)
    if missing:
        logger.warning(f"⚠️ [Predictor] '{target}' was never measured with {missing}, estimate leans on the rest")

    penalties = np.array([penalization(sstat, j, gamma) for j in columns])
    slowdowns = np.array([sstat.stats[SLOWDOWN, :, j - 1] for j in columns])
    estimate = combine_slowdowns(base, penalties, solution.weights, slowdowns)

    label = encoding_label(ds.workload_names, question.multiplicities, question.target)
    logger.info(f"🔮 [Predictor] {label}: q={sstat.percentile_q} estimate {estimate[0]:.3f} "
                f"(base {base[0]:.3f}, {len(solution.active_set)} active scenarios, residual {solution.residual_norm:.3g})")
    return Prediction(
        target=target,
        percentile_q=sstat.percentile_q,
        percentile_estimate=estimate,
        base=base,
        weights=solution,
        scenarios=tuple(columns),
        penalties=penalties,
        slowdowns=slowdowns,
        fidelity=Fidelity(residual_norm=solution.residual_norm, uncovered_background=tuple(missing)),
    )


def similarity(stats_a: np.ndarray, stats_b: np.ndarray, weights: Sequence[float] = (1.0, 1.0, 1.0),
               units_a: Optional[Sequence[str]] = None, units_b: Optional[Sequence[str]] = None) -> float:
    """Weighted relative difference of mean, median and std deviation; 0 for identical slices"""
    a = np.asarray(stats_a, dtype=float)
    b = np.asarray(stats_b, dtype=float)
    if a.shape[1:] != b.shape[1:]:
        raise InputValidationError(f"stat slices differ in parameters: {a.shape} vs {b.shape}")
    if units_a is not None and units_b is not None and list(units_a) != list(units_b):
        raise InputValidationError(f"unit mismatch: {list(units_a)} vs {list(units_b)}")
    score = 0.0
    for weight, row in zip(weights, SIMILARITY_ROWS):
        scale = np.maximum(np.maximum(np.abs(a[row]), np.abs(b[row])), EPSILON)
        score += weight * float(np.sum(np.abs(a[row] - b[row]) / scale))
    return score


def most_similar(ds: MeasurementDataset, sstat: StatTensor, stats_new: np.ndarray,
                 exclude: Sequence[int] = ()) -> Tuple[int, List[float]]:
    """argmin_j f(A_j, A_new) over measured single tests, lowest index on ties"""
    scores = []
    for j in range(1, ds.n + 1):
        if j in exclude:
            scores.append(np.inf)
            continue
        scores.append(similarity(stats_new, single_test_slice(sstat, ds, j)))
    if not np.isfinite(scores).any():
        raise InputValidationError('no measured workload available for matching')
    return int(np.argmin(scores)) + 1, scores


def attach_boundary_report(prediction: Prediction, report: BoundaryReport) -> Prediction:
    """Record the violated dimensions of the questioned colocation on the prediction"""
    if report.passed:
        return prediction
    logger.warning(f"🚧 [Predictor] '{prediction.target}' questioned outside the boundaries on {report.violations}")
    return replace(prediction, fidelity=replace(prediction.fidelity, boundary_warnings=tuple(report.violations)))


def _answered_by(prediction: Prediction, target: str, matched: str, fallback: bool) -> Prediction:
    """The matched workload's Q1 prediction, reported for the questioned workload"""
    return replace(
        prediction,
        target=target,
        matched_workload=matched,
        fidelity=replace(prediction.fidelity, zero_solution_fallback=fallback),
    )


def predict_q2(ds: MeasurementDataset, sstat: StatTensor, new_single_test: np.ndarray, question: QuestionVector,
               name: str = 'new', gamma: float = DEFAULT_GAMMA,
               param_names: Optional[Sequence[str]] = None) -> Tuple[Prediction, MeasurementDataset, StatTensor]:
    """Q2: prediction for a new workload A_{n+1} with only a single test available"""
    samples = np.asarray(new_single_test, dtype=float)
    if ds.n == 0:
        raise InputValidationError('no measured workloads to match against')
    if samples.shape != (ds.k, ds.l):
        raise InputValidationError(f"new single test must be {ds.k} x {ds.l}, got {samples.shape}")
    if param_names is not None and list(param_names) != list(ds.param_names):
        raise InputValidationError(f"unit mismatch: parameters {list(param_names)} vs dataset {list(ds.param_names)}")
    if len(question.multiplicities) != ds.n + 1 or question.target != ds.n + 1:
        raise InputValidationError('a Q2 question has n + 1 entries and targets the new workload n + 1')

    stats_new = stats_for_samples(samples, sstat.percentile_q)
    matched, scores = most_similar(ds, sstat, stats_new)
    logger.info(f"🔍 [Predictor] '{name}' resembles '{ds.workload_names[matched - 1]}' (f = {scores[matched - 1]:.4g})")

    counts = list(question.multiplicities[:ds.n])
    counts[matched - 1] += question.multiplicities[ds.n]
    matched_prediction = predict_q1(ds, sstat, QuestionVector(tuple(counts), matched), gamma=gamma)
    prediction = _answered_by(matched_prediction, name, ds.workload_names[matched - 1], fallback=False)

    extended = add_workload(ds, name, samples)
    return prediction, extended, build_sstat(extended, sstat.percentile_q)


def predict_q2_fallback(ds: MeasurementDataset, sstat: StatTensor, question: QuestionVector,
                        gamma: float = DEFAULT_GAMMA) -> Prediction:
    """ZeroSolution remedy: drop the target's own scenarios and answer Q1 on its closest peer"""
    target = question.target
    _, single = slice_for_workload(ds, target)
    stats_own = sstat.slice(single)
    matched, scores = most_similar(ds, sstat, stats_own, exclude=(target,))

    counts = list(question.multiplicities)
    counts[matched - 1] += counts[target - 1]
    counts[target - 1] = 0
    logger.info(f"↩️ [Predictor] Fallback: '{ds.workload_names[target - 1]}' answered via "
                f"'{ds.workload_names[matched - 1]}' (f = {scores[matched - 1]:.4g})")
    matched_prediction = predict_q1(ds, sstat, QuestionVector(tuple(counts), matched), gamma=gamma)
    return _answered_by(matched_prediction, ds.workload_names[target - 1], ds.workload_names[matched - 1], fallback=True)
