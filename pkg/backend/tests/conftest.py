from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from measurement_store import build_dataset
from models import ResourceProfile, Sensitivity, SyntheticWorkload
from synth import load_workload_spec

settings.register_profile('predictor', max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile('predictor')

FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def listing_descriptor():
    return (FIXTURES / 'recognizer-deployment.yaml').read_text()


@pytest.fixture
def workload_spec():
    return load_workload_spec(FIXTURES / 'workloads.json')


@pytest.fixture
def contention_spec():
    """Four workloads inside every boundary up to quadruplets, memory-bound with saturating interference"""
    return load_workload_spec(FIXTURES / 'contention.json')


@pytest.fixture
def fig3_dataset():
    """Three workloads, each with a single test and one pair test (k=100, l=2)"""
    rng = np.random.default_rng(3)
    names = ['A1', 'A2', 'A3']
    encodings = {
        'A1': [(1, 0, 0), (1, 1, 0)],
        'A2': [(0, 1, 0), (0, 1, 1)],
        'A3': [(0, 0, 1), (1, 0, 1)],
    }
    blocks = {}
    for base, name in zip((20.0, 35.0, 50.0), names):
        blocks[name] = []
        for shift, encoding in zip((1.0, 1.2), encodings[name]):
            response = base * shift * rng.lognormal(0.0, 0.05, 100)
            blocks[name].append((encoding, np.column_stack([response, 1000.0 * response])))
    return build_dataset(names, blocks, ('ms', 'count'), ('response_time', 'llc_misses'))


@pytest.fixture
def linear_workloads():
    """Workloads whose own CPU demand saturates the node, so slowdown is linear in background CPU"""
    return [
        SyntheticWorkload(name=f"W{i}", base_response_ms=base,
                          profile=ResourceProfile(cpu_utilization=cpu),
                          sensitivity=Sensitivity(cpu_s=sens))
        for i, (base, cpu, sens) in enumerate([(10.0, 1.0, 1.0), (25.0, 1.1, 0.5), (40.0, 1.2, 2.0), (15.0, 1.05, 1.5)], 1)
    ]
