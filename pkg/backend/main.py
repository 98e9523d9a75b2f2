import csv
import functools
import io
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import List, Optional, Sequence

import click
from pydantic import ValidationError

from admission import evaluate_admission, load_cluster, reevaluate_deployment
from boundary_guard import check_scenario, profiles_for_encoding
from descriptor import load_descriptor
from exceptions import (EXIT_INTERNAL, EXIT_REJECTED, EXIT_VALIDATION, InputValidationError, PredictorError,
                        ZeroSolutionError)
from experiments import KINDS, reproduce as run_experiment
from measurement_store import ingest_dataset, parse_encoding_label, read_sample_file, save_dataset, scenario_label
from models import AdmissionConfig, BoundaryReport
from predictor import QuestionVector, attach_boundary_report, predict_q1, predict_q2, predict_q2_fallback
from settings import DATASET_ENV, DEFAULT_GAMMA, DEFAULT_PERCENTILE, LOG_LEVEL, configure_logging
from stat_tensor import PERC, ROW_NAMES, build_sstat, single_test_slice
from synth import Scenario, generate_dataset, load_workload_spec, scenario_grid

logger = logging.getLogger('predictor')
SCENARIO_SETS = {'singles': 0, 'pairs': 1, 'triplets': 2}

dataset_option = click.option('--dataset', 'dataset_dir', envvar=DATASET_ENV, required=True,
                              type=click.Path(file_okay=False), help='Dataset directory')


# ================== HELPERS ==================

def reports_errors(command):
    """Turn library errors into the documented exit codes"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except PredictorError as e:
            logger.error(f"❌ [CLI] {e.message}")
            sys.exit(e.exit_code)
        except ValidationError as e:
            logger.error(f"❌ [CLI] Invalid input: {e.errors()[0]['msg']}")
            sys.exit(EXIT_VALIDATION)
        except Exception:
            logger.exception('❌ [CLI] Internal error')
            sys.exit(EXIT_INTERNAL)
    return wrapper


def emit(payload, out: Optional[str]):
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + '\n')
        logger.info(f"💾 [CLI] Wrote {out}")
    else:
        click.echo(text)


def parse_background(text: str) -> Counter:
    """'B,B,C' or 'B=2,C=1' -> Counter({'B': 2, 'C': 1}); empty string for a single test"""
    counts = Counter()
    for item in (part.strip() for part in text.split(',')):
        if not item:
            continue
        name, sep, count = (s.strip() for s in item.partition('='))
        if not sep:
            counts[name] += 1
            continue
        if not name or not count.isdigit():
            raise InputValidationError(f"invalid background entry '{item}', expected NAME or NAME=COUNT")
        if int(count):
            counts[name] += int(count)
    return counts


def parse_scenario_set(text: str, names: Sequence[str]) -> Optional[List[Scenario]]:
    """Explicit ';'-separated scenario labels such as 'A;A+(B);A+(B,C)', or None for a preset name"""
    if text in SCENARIO_SETS:
        return None
    labels = [label.strip() for label in text.split(';') if label.strip()]
    if not labels:
        raise InputValidationError(f"--scenarios must be one of {sorted(SCENARIO_SETS)} or a list of labels")
    return [parse_encoding_label(names, label) for label in labels]


def boundary_for_question(spec_path: str, question: QuestionVector, names: Sequence[str]) -> BoundaryReport:
    """Boundary check of a question using the profiles of a workload spec"""
    spec = load_workload_spec(spec_path)
    profiles = {w.name: w.profile for w in spec.workloads}
    names = list(names)
    unknown = [n for n, c in zip(names, question.multiplicities) if c and n not in profiles]
    if unknown:
        raise InputValidationError(f"no resource profile for {unknown} in {spec_path}")
    return check_scenario(profiles_for_encoding(profiles, names, question.multiplicities), spec.boundaries)


def load_config(path: Optional[str], allow_fallback: bool = False) -> AdmissionConfig:
    cfg = AdmissionConfig.load(path) if path else AdmissionConfig()
    return cfg.model_copy(update={'allow_fallback': True}) if allow_fallback else cfg


# ================== COMMANDS ==================

@click.group()
@click.option('--log-level', default=LOG_LEVEL, show_default=True,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False))
def cli(log_level):
    """Statistical response-time prediction for colocated workloads"""
    configure_logging(log_level)


@cli.command()
@dataset_option
@reports_errors
def ingest(dataset_dir):
    """Validate a dataset directory and print its summary"""
    ds = ingest_dataset(dataset_dir)
    emit({
        'n': ds.n, 'k': ds.k, 'l': ds.l, 'm': ds.m,
        'workloads': list(ds.workload_names),
        'block_sizes': ds.block_sizes(),
        'parameters': dict(zip(ds.param_names, ds.param_units)),
    }, None)


@cli.command()
@dataset_option
@click.option('--q', 'q', default=DEFAULT_PERCENTILE, show_default=True, type=float, help='Percentile level')
@click.option('--out', type=click.Path(file_okay=False),
              help='Directory for one <scenario>.csv per scenario plus summary.json; combined CSV on stdout when omitted')
@reports_errors
def stats(dataset_dir, q, out):
    """Compute the Sstat tensor of a dataset"""
    ds = ingest_dataset(dataset_dir)
    sstat = build_sstat(ds, q)
    if not out:
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(['scenario', 'label', 'parameter', *ROW_NAMES])
        for j in range(1, ds.m + 1):
            for p, name in enumerate(ds.param_names):
                writer.writerow([j, scenario_label(ds, j), name, *[repr(float(v)) for v in sstat.slice(j)[:, p]]])
        click.echo(buffer.getvalue(), nl=False)
        return

    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    for j in range(1, ds.m + 1):
        with open(root / f"{j}.csv", 'w', newline='') as fh:
            writer = csv.writer(fh)
            writer.writerow(['statistic', *ds.param_names])
            for row_name, values in zip(ROW_NAMES, sstat.slice(j)):
                writer.writerow([row_name, *[repr(float(v)) for v in values]])
    summary = {
        'percentile_q': q,
        'flagged': sstat.flagged,
        'labels': {j: scenario_label(ds, j) for j in range(1, ds.m + 1)},
        'single_test_percentiles': {
            name: dict(zip(ds.param_names, single_test_slice(sstat, ds, name)[PERC].tolist()))
            for name in ds.workload_names
        },
    }
    (root / 'summary.json').write_text(json.dumps(summary, indent=2) + '\n')
    logger.info(f"💾 [CLI] Wrote Sstat of {ds.m} scenarios to {root}")


@cli.command()
@dataset_option
@click.option('--target', help='Workload whose response time is predicted; defaults to the --new-single file name')
@click.option('--scenario', 'background', default='',
              help='Background workloads, e.g. "B,B,C" or "B=2,C=1"')
@click.option('--percentile', '--q', 'q', default=DEFAULT_PERCENTILE, show_default=True, type=float)
@click.option('--gamma', default=DEFAULT_GAMMA, show_default=True, type=float)
@click.option('--new-single', '--new-sample', 'new_sample', type=click.Path(exists=True, dir_okay=False),
              help='Single-test samples of a new workload (Q2)')
@click.option('--extend', type=click.Path(file_okay=False), help='Save the dataset extended by the new workload (Q2)')
@click.option('--fallback', is_flag=True, help='Answer a zero solution through the Q2 fallback')
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False),
              help='Workload spec whose profiles flag questions outside the boundaries')
@click.option('--out', type=click.Path(dir_okay=False))
@reports_errors
def predict(dataset_dir, target, background, q, gamma, new_sample, extend, fallback, spec_path, out):
    """Predict the q-th response-time percentile of TARGET under a colocation"""
    if target is None:
        if not new_sample:
            raise InputValidationError('either --target or --new-single is required')
        target = Path(new_sample).stem
    ds = ingest_dataset(dataset_dir)
    sstat = build_sstat(ds, q)
    counts = parse_background(background)
    names = list(ds.workload_names) + ([target] if new_sample else [])
    if new_sample:
        samples = read_sample_file(new_sample, ds.param_names, ds.k)
        question = QuestionVector.from_background(names, target, counts)
        prediction, extended, _ = predict_q2(ds, sstat, samples, question, name=target, gamma=gamma)
        if extend:
            save_dataset(extended, extend)
    else:
        question = QuestionVector.from_background(ds.workload_names, target, counts)
        if fallback:
            try:
                prediction = predict_q1(ds, sstat, question, gamma=gamma)
            except ZeroSolutionError:
                prediction = predict_q2_fallback(ds, sstat, question, gamma=gamma)
        else:
            prediction = predict_q1(ds, sstat, question, gamma=gamma)
    if spec_path:
        prediction = attach_boundary_report(prediction, boundary_for_question(spec_path, question, names))
    emit(prediction.to_dict(ds.param_names), out)


@cli.command()
@click.option('--cluster', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--descriptor', required=True, type=click.Path(exists=True, dir_okay=False))
@dataset_option
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), help='Admission config JSON')
@click.option('--new-sample', type=click.Path(exists=True, dir_okay=False),
              help='Single-test samples when the candidate is not in the dataset (Q2)')
@click.option('--fallback', is_flag=True, help='Allow the Q2 fallback on zero solutions')
@click.option('--out', type=click.Path(dir_okay=False))
@reports_errors
def admit(cluster, descriptor, dataset_dir, config_path, new_sample, fallback, out):
    """Decide whether the described service can be placed on the cluster (exit 3 on reject)"""
    ds = ingest_dataset(dataset_dir)
    cfg = load_config(config_path, allow_fallback=fallback)
    candidate = load_descriptor(descriptor)
    samples = read_sample_file(new_sample, ds.param_names, ds.k) if new_sample else None
    decision = evaluate_admission(load_cluster(cluster), candidate, ds, cfg, new_single_test=samples)
    emit(decision.model_dump(), out)
    if not decision.verdict.admit:
        sys.exit(EXIT_REJECTED)


@cli.command()
@click.option('--cluster', required=True, type=click.Path(exists=True, dir_okay=False))
@dataset_option
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', type=click.Path(dir_okay=False))
@reports_errors
def redeploy(cluster, dataset_dir, config_path, out):
    """Re-check every deployed service on its current node (exit 3 if any fails)"""
    ds = ingest_dataset(dataset_dir)
    reports = reevaluate_deployment(load_cluster(cluster), ds, load_config(config_path))
    emit({name: report.model_dump() for name, report in reports.items()}, out)
    if any(not report.passed for report in reports.values()):
        sys.exit(EXIT_REJECTED)


@cli.command()
@click.option('--spec', 'spec_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--scenarios', default='pairs', show_default=True,
              help=f"One of {', '.join(sorted(SCENARIO_SETS))} or scenario labels such as 'A;A+(B);A+(B,C)'")
@click.option('--k', 'k', default=100, show_default=True, type=int)
@click.option('--seed', default=0, show_default=True, type=int)
@click.option('--out', required=True, type=click.Path(file_okay=False))
@reports_errors
def simulate(spec_path, scenarios, k, seed, out):
    """Generate a synthetic dataset directory from a workload spec"""
    spec = load_workload_spec(spec_path)
    grid = parse_scenario_set(scenarios, [w.name for w in spec.workloads])
    if grid is None:
        grid = scenario_grid(spec.workloads, SCENARIO_SETS[scenarios], spec.boundaries)
    ds = generate_dataset(spec.workloads, grid, k, seed, spec.boundaries)
    save_dataset(ds, out)


@cli.command()
@click.option('--kind', type=click.Choice(sorted(KINDS)), required=True)
@click.option('--spec', 'spec_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--seed', default=0, show_default=True, type=int)
@click.option('--k', 'k', default=100, show_default=True, type=int)
@click.option('--gamma', default=DEFAULT_GAMMA, show_default=True, type=float)
@click.option('--q', 'q', default=DEFAULT_PERCENTILE, show_default=True, type=float)
@click.option('--out', required=True, type=click.Path(file_okay=False))
@reports_errors
def reproduce(kind, spec_path, seed, k, gamma, q, out):
    """Triplet or quadruplet experiment: report.csv, summary.json and the measured dataset"""
    if k < 2:
        raise InputValidationError('--k must be at least 2')
    report = run_experiment(kind, load_workload_spec(spec_path), seed, k=k, gamma=gamma, q=q, out_dir=out)
    emit(report.summary.model_dump(), None)


if __name__ == '__main__':
    cli()
