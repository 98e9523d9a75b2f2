import csv
import itertools
import json
from collections import Counter

import pytest

from boundary_guard import check_scenario
from exceptions import InputValidationError
from experiments import CSV_COLUMNS, reproduce
from measurement_store import encoding_label
from models import Sensitivity, WorkloadSpecFile
from predictor import QuestionVector, predict_q1
from stat_tensor import build_sstat
from synth import generate_dataset, scenario_grid


def placements(spec, size):
    n = len(spec.workloads)
    for target in range(1, n + 1):
        for combo in itertools.combinations_with_replacement(range(1, n + 1), size):
            yield target, combo


def test_triplets_from_pairs(workload_spec):
    report = reproduce('triplet', workload_spec, seed=7, k=100)
    assert report.kind == 'triplet'
    assert report.unpredictable == []
    assert len(report.rows) + len(report.excluded) == 4 * 10
    assert abs(report.summary.mean_relative_error) <= 0.10
    assert report.summary.min_relative_error <= report.summary.mean_relative_error <= report.summary.max_relative_error
    for row in report.rows:
        assert row.conservative == (row.predicted >= row.measured)
        assert row.oracle > 0


def test_excluded_placements_are_the_boundary_violations(workload_spec):
    report = reproduce('triplet', workload_spec, seed=7, k=20)
    names = [w.name for w in workload_spec.workloads]
    expected = set()
    for target, combo in placements(workload_spec, 2):
        profiles = [workload_spec.workloads[target - 1].profile] + [workload_spec.workloads[i - 1].profile for i in combo]
        if not check_scenario(profiles, workload_spec.boundaries).passed:
            encoding = [0] * len(names)
            for i in (target, *combo):
                encoding[i - 1] += 1
            expected.add(encoding_label(names, encoding, target))
    assert {e.label for e in report.excluded} == expected
    assert expected
    assert not expected & {r.label for r in report.rows}


def test_rows_are_recomputable_from_the_dataset(workload_spec):
    report = reproduce('triplet', workload_spec, seed=3, k=50, gamma=0.1)
    grid = scenario_grid(workload_spec.workloads, 1, workload_spec.boundaries)
    ds = generate_dataset(workload_spec.workloads, grid, 50, 3, workload_spec.boundaries)
    sstat = build_sstat(ds, 0.9)
    for row in report.rows[:10]:
        question = QuestionVector.from_background(list(ds.workload_names), row.target, Counter(row.background))
        prediction = predict_q1(ds, sstat, question, gamma=0.1)
        assert prediction.response_time() == pytest.approx(row.predicted, rel=1e-12)


def test_quadruplets_from_triplets(workload_spec):
    report = reproduce('quadruplet', workload_spec, seed=7, k=50)
    assert len(report.rows) + len(report.excluded) + len(report.unpredictable) == 4 * 20
    assert report.summary.count == len(report.rows) > 0
    assert all(len(r.background) == 3 for r in report.rows)
    assert abs(report.summary.mean_relative_error) <= 0.10


def test_triplets_under_saturating_contention_are_mostly_conservative(contention_spec):
    report = reproduce('triplet', contention_spec, seed=7, k=100)
    assert report.excluded == [] and report.unpredictable == []
    assert report.summary.count == 4 * 10
    assert abs(report.summary.mean_relative_error) <= 0.10
    assert report.summary.conservative_fraction >= 0.6


def test_quadruplets_under_saturating_contention_are_mostly_conservative(contention_spec):
    report = reproduce('quadruplet', contention_spec, seed=7, k=50)
    assert report.excluded == [] and report.unpredictable == []
    assert report.summary.count == 4 * 20
    assert abs(report.summary.mean_relative_error) <= 0.10
    assert report.summary.conservative_fraction >= 0.6


def test_insensitive_workloads_are_predicted_exactly(workload_spec):
    data = workload_spec.model_dump()
    for w in data['workloads']:
        w['noise'] = 0.0
        w['sensitivity'] = Sensitivity().model_dump()
    report = reproduce('triplet', WorkloadSpecFile.model_validate(data), seed=1, k=10)
    assert all(r.relative_error == 0.0 for r in report.rows)
    assert report.summary.conservative_fraction == 1.0


def test_same_seed_same_report(workload_spec):
    first = reproduce('triplet', workload_spec, seed=4, k=20)
    second = reproduce('triplet', workload_spec, seed=4, k=20)
    assert first.model_dump() == second.model_dump()


def test_invalid_experiments(workload_spec):
    with pytest.raises(InputValidationError):
        reproduce('pair', workload_spec, seed=0)
    small = WorkloadSpecFile(workloads=workload_spec.workloads[:3], boundaries=workload_spec.boundaries)
    with pytest.raises(InputValidationError):
        reproduce('triplet', small, seed=0)


def test_report_files(workload_spec, tmp_path):
    report = reproduce('triplet', workload_spec, seed=7, k=20, out_dir=tmp_path)
    with open(tmp_path / 'report.csv', newline='') as fh:
        records = list(csv.DictReader(fh))
    assert list(records[0]) == CSV_COLUMNS
    assert len(records) == len(report.rows)
    assert records[0]['background'] == '+'.join(report.rows[0].background)
    summary = json.loads((tmp_path / 'summary.json').read_text())
    assert summary['summary']['count'] == report.summary.count
    assert 'rows' not in summary
    assert (tmp_path / 'dataset' / 'meta.json').exists()
