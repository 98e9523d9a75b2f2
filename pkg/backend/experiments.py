"""
Triplet and quadruplet experiments on synthetic workloads: measure a dataset,
predict every in-boundary placement one level above what was measured, then
measure those placements and compare.
"""

import csv
import itertools
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from boundary_guard import check_scenario, profiles_for_encoding
from exceptions import InputValidationError, NoCombinedScenariosError, ZeroSolutionError
from measurement_store import encoding_label, save_dataset
from models import ExcludedCombination, ExperimentReport, ExperimentRow, ExperimentSummary, WorkloadSpecFile
from predictor import QuestionVector, predict_q1
from settings import DEFAULT_GAMMA, DEFAULT_PERCENTILE
from stat_tensor import build_sstat, percentile
from synth import generate_dataset, ground_truth_response, oracle_percentile, sample_responses, scenario_grid

logger = logging.getLogger(__name__)

# background size of the predicted placements
KINDS = {'triplet': 2, 'quadruplet': 3}
MIN_WORKLOADS = 4
CSV_COLUMNS = ['label', 'target', 'background', 'measured', 'predicted', 'oracle', 'relative_error', 'conservative']


def reproduce(kind: str, spec: WorkloadSpecFile, seed: int, k: int = 100, gamma: float = DEFAULT_GAMMA,
              q: float = DEFAULT_PERCENTILE, out_dir: Union[str, Path, None] = None) -> ExperimentReport:
    """Run one experiment and optionally write report.csv, summary.json and the dataset under out_dir"""
    if kind not in KINDS:
        raise InputValidationError(f"unknown experiment kind '{kind}', expected one of {sorted(KINDS)}")
    workloads = spec.workloads
    n = len(workloads)
    if n < MIN_WORKLOADS:
        raise InputValidationError(f"experiment needs at least {MIN_WORKLOADS} workloads, spec has {n}")
    size = KINDS[kind]
    names = [w.name for w in workloads]
    profiles_by_name = {w.name: w.profile for w in workloads}
    cfg = spec.boundaries

    ds = generate_dataset(workloads, scenario_grid(workloads, size - 1, cfg), k, seed, cfg)
    sstat = build_sstat(ds, q)
    measure_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))

    rows, excluded, unpredictable = [], [], []
    for target in range(1, n + 1):
        for combo in itertools.combinations_with_replacement(range(1, n + 1), size):
            background = [workloads[i - 1] for i in combo]
            encoding = [0] * n
            encoding[target - 1] += 1
            for i in combo:
                encoding[i - 1] += 1
            label = encoding_label(names, encoding, target)

            boundary = check_scenario(profiles_for_encoding(profiles_by_name, names, encoding), cfg)
            if not boundary.passed:
                excluded.append(ExcludedCombination(label=label, violations=boundary.violations))
                continue
            try:
                prediction = predict_q1(ds, sstat, QuestionVector(tuple(encoding), target), gamma=gamma)
            except (ZeroSolutionError, NoCombinedScenariosError) as e:
                logger.warning(f"⚠️ [Experiment] {label} not predictable: {e.message}")
                unpredictable.append(label)
                continue

            samples = sample_responses(workloads[target - 1], background, k, measure_rng, cfg)
            measured = percentile(samples[:, 0], q)
            oracle = oracle_percentile(ground_truth_response(workloads[target - 1], background, cfg), q)
            rows.append(ExperimentRow.build(label, names[target - 1], [w.name for w in background],
                                            measured, prediction.response_time(), oracle))

    if not rows:
        raise InputValidationError(f"no {kind} placement is both inside the boundaries and predictable")

    errors = np.array([r.relative_error for r in rows])
    summary = ExperimentSummary(
        count=len(rows),
        mean_relative_error=float(errors.mean()),
        min_relative_error=float(errors.min()),
        max_relative_error=float(errors.max()),
        conservative_fraction=sum(r.conservative for r in rows) / len(rows),
    )
    report = ExperimentReport(kind=kind, seed=seed, rows=rows, summary=summary,
                              excluded=excluded, unpredictable=unpredictable)
    logger.info(f"📈 [Experiment] {kind}: {summary.count} placements, mean error {summary.mean_relative_error:+.1%}, "
                f"conservative {summary.conservative_fraction:.0%}, {len(excluded)} excluded")

    if out_dir is not None:
        write_report(report, out_dir)
        save_dataset(ds, Path(out_dir) / 'dataset')
    return report


def write_report(report: ExperimentReport, out_dir: Union[str, Path]) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / 'report.csv', 'w', newline='') as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in report.rows:
            record = row.model_dump()
            record['background'] = '+'.join(row.background)
            record['conservative'] = int(row.conservative)
            writer.writerow(record)
    summary = report.model_dump(exclude={'rows'})
    (out / 'summary.json').write_text(json.dumps(summary, indent=2))
    logger.info(f"💾 [Experiment] Report written to {out}")
    return out
