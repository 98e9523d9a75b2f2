import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exceptions import DatasetParseError, DatasetValidationError, InputValidationError
from measurement_store import (DatasetStore, MeasurementDataset, add_scenario, add_workload, build_dataset,
                               ingest_dataset, parse_encoding_label, read_sample_file, save_dataset, scenario_label,
                               slice_for_workload)


def singles_only(n=1, k=4):
    samples = np.arange(k * n, dtype=float).reshape(k, 1, n) + 1.0
    return MeasurementDataset(samples=samples, scenario_matrix=np.eye(n, dtype=np.int64),
                              block_index=np.arange(1, n + 2), workload_names=[f"W{i}" for i in range(1, n + 1)],
                              param_units=['ms'])


def test_fig3_layout(fig3_dataset):
    assert (fig3_dataset.n, fig3_dataset.k, fig3_dataset.l, fig3_dataset.m) == (3, 100, 2, 6)
    assert fig3_dataset.block_index.tolist() == [1, 3, 5, 7]
    assert fig3_dataset.block_sizes() == [2, 2, 2]


def test_minimal_dataset():
    ds = singles_only()
    assert (ds.n, ds.m) == (1, 1)
    assert ds.block_index.tolist() == [1, 2]
    assert slice_for_workload(ds, 1) == (range(1, 2), 1)


def test_single_test_with_two_nonzeros_rejected():
    samples = np.ones((3, 1, 2))
    matrix = np.array([[1, 1], [1, 1]])
    with pytest.raises(DatasetValidationError) as err:
        MeasurementDataset(samples=samples, scenario_matrix=matrix, block_index=[1, 2, 3],
                           workload_names=['A', 'B'], param_units=['ms'])
    assert err.value.invariant == 'single test is a unit column'


@pytest.mark.parametrize('block_index, invariant', [
    ([0, 2, 3], 'block_index(1) = 1'),
    ([1, 1, 3], 'block_index strictly increasing'),
    ([1, 2, 4], 'block_index(n+1) - 1 = m'),
])
def test_block_index_invariants(block_index, invariant):
    with pytest.raises(DatasetValidationError) as err:
        MeasurementDataset(samples=np.ones((3, 1, 2)), scenario_matrix=np.eye(2, dtype=int),
                           block_index=block_index, workload_names=['A', 'B'], param_units=['ms'])
    assert err.value.invariant == invariant


def test_arrays_are_read_only(fig3_dataset):
    with pytest.raises(ValueError):
        fig3_dataset.samples[0, 0, 0] = 1.0


def test_slice_for_workload(fig3_dataset):
    assert slice_for_workload(fig3_dataset, 2) == (range(3, 5), 3)
    assert slice_for_workload(fig3_dataset, 'A3') == (range(5, 7), 5)
    with pytest.raises(InputValidationError):
        slice_for_workload(fig3_dataset, 4)


def test_add_scenario_to_singles_only_block():
    ds = singles_only(n=2)
    grown = add_scenario(ds, 1, [1, 1], np.full((4, 1), 9.0))
    assert grown.m == ds.m + 1
    assert grown.block_sizes() == [2, 1]
    assert grown.encoding(2).tolist() == [1, 1]
    assert ds.m == 2


def test_add_scenario_to_last_block_and_reslice(fig3_dataset):
    samples = np.full((100, 2), 7.0)
    grown = add_scenario(fig3_dataset, 3, [0, 1, 1], samples)
    assert grown.block_index.tolist() == [1, 3, 5, 8]
    scenarios, _ = slice_for_workload(grown, 3)
    assert np.array_equal(grown.slice(scenarios[-1]), samples)


def test_add_scenario_then_first_block_range(fig3_dataset):
    grown = add_scenario(fig3_dataset, 1, [1, 0, 1], np.ones((100, 2)))
    assert slice_for_workload(grown, 1) == (range(1, 4), 1)
    assert grown.block_index.tolist() == [1, 4, 6, 8]


@pytest.mark.parametrize('encoding, samples', [
    ([0, 1, 0], np.ones((100, 2))),      # owner missing
    ([1, -1, 0], np.ones((100, 2))),
    ([1, 1], np.ones((100, 2))),
    ([1, 1, 0], np.ones((99, 2))),
])
def test_add_scenario_rejects_bad_input(fig3_dataset, encoding, samples):
    with pytest.raises(InputValidationError):
        add_scenario(fig3_dataset, 1, encoding, samples)


def test_add_workload_appends_single_test_block(fig3_dataset):
    single = np.ones((100, 2))
    grown = add_workload(fig3_dataset, 'NEW', single)
    assert grown.n == 4
    assert grown.workload_names[-1] == 'NEW'
    assert grown.encoding(grown.m).tolist() == [0, 0, 0, 1]
    assert grown.scenario_matrix[3, :-1].tolist() == [0] * 6
    assert slice_for_workload(grown, 'NEW') == (range(7, 8), 7)


def test_scenario_label(fig3_dataset):
    assert scenario_label(fig3_dataset, 1) == 'A1'
    assert scenario_label(fig3_dataset, 2) == 'A1+(A2)'
    assert scenario_label(fig3_dataset, 6) == 'A3+(A1)'


def test_scenario_labels_parse_back(fig3_dataset):
    names = fig3_dataset.workload_names
    for j in range(1, fig3_dataset.m + 1):
        owner, encoding = parse_encoding_label(names, scenario_label(fig3_dataset, j))
        assert owner == fig3_dataset.owner_of(j)
        assert encoding == tuple(int(c) for c in fig3_dataset.encoding(j))
    assert parse_encoding_label(names, 'A2+(A2, A3)') == (2, (0, 2, 1))


@pytest.mark.parametrize('label', ['', 'A4', 'A1+A2', 'A1+(A9)'])
def test_malformed_scenario_labels(fig3_dataset, label):
    with pytest.raises(InputValidationError):
        parse_encoding_label(fig3_dataset.workload_names, label)


def test_save_load_roundtrip(tmp_path, fig3_dataset):
    save_dataset(fig3_dataset, tmp_path / 'ds')
    loaded = ingest_dataset(tmp_path / 'ds')
    assert np.array_equal(loaded.samples, fig3_dataset.samples)
    assert np.array_equal(loaded.scenario_matrix, fig3_dataset.scenario_matrix)
    assert loaded.block_index.tolist() == fig3_dataset.block_index.tolist()
    assert loaded.workload_names == fig3_dataset.workload_names
    assert loaded.param_units == fig3_dataset.param_units
    assert loaded.param_names == fig3_dataset.param_names


def test_missing_directory_is_a_parse_error(tmp_path):
    with pytest.raises(DatasetParseError):
        ingest_dataset(tmp_path / 'nowhere')


def test_parse_error_names_file_and_line(tmp_path, fig3_dataset):
    root = save_dataset(fig3_dataset, tmp_path / 'ds')
    path = root / 'samples' / '2.csv'
    lines = path.read_text().splitlines()
    lines[3] = 'oops,1.0'
    path.write_text('\n'.join(lines) + '\n')
    with pytest.raises(DatasetParseError) as err:
        DatasetStore(root).load()
    assert err.value.file.endswith('2.csv')
    assert err.value.line == 4


def test_mixed_repeat_counts_rejected(tmp_path, fig3_dataset):
    root = save_dataset(fig3_dataset, tmp_path / 'ds')
    path = root / 'samples' / '3.csv'
    lines = path.read_text().splitlines()
    path.write_text('\n'.join(lines[:-1]) + '\n')
    with pytest.raises(DatasetValidationError) as err:
        ingest_dataset(root)
    assert err.value.invariant == 'fixed k'


def test_meta_mismatch_rejected(tmp_path, fig3_dataset):
    root = save_dataset(fig3_dataset, tmp_path / 'ds')
    meta = json.loads((root / 'meta.json').read_text())
    meta['m'] = 5
    (root / 'meta.json').write_text(json.dumps(meta))
    with pytest.raises(DatasetValidationError):
        ingest_dataset(root)


def test_read_sample_file_checks_header(tmp_path):
    path = tmp_path / 'new.csv'
    path.write_text('response_time\n1.0\n2.0\n')
    assert read_sample_file(path, ['response_time']).tolist() == [[1.0], [2.0]]
    with pytest.raises(DatasetParseError):
        read_sample_file(path, ['response_time', 'llc_misses'])


def test_build_dataset_requires_scenarios():
    with pytest.raises(InputValidationError):
        build_dataset(['A'], {}, ['ms'])


additions = st.lists(
    st.tuples(st.integers(1, 3), st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2))
              .filter(lambda extra: sum(extra) > 0)),
    max_size=8,
)


@given(additions)
def test_block_ranges_partition_scenarios_after_additions(fig3_dataset, steps):
    ds = fig3_dataset
    for owner, extra in steps:
        encoding = [count + (1 if index == owner else 0) for index, count in enumerate(extra, start=1)]
        ds = add_scenario(ds, owner, encoding, np.ones((ds.k, ds.l)))

    covered = []
    for i in range(1, ds.n + 1):
        scenarios, single = slice_for_workload(ds, i)
        assert single == scenarios[0]
        assert ds.encoding(single).tolist() == [1 if j == i else 0 for j in range(1, ds.n + 1)]
        assert all(ds.owner_of(j) == i and ds.encoding(j)[i - 1] >= 1 for j in scenarios)
        covered.extend(scenarios)
    assert covered == list(range(1, ds.m + 1))
    assert ds.m == fig3_dataset.m + len(steps)
