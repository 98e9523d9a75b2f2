"""
Measurement store for the colocation predictor
Holds the raw sample tensor S, the scenario matrix M and the block index v,
and reads/writes them as dataset directories.

Indices exposed by this module are 1-based (workloads, scenarios, block_index),
matching the dataset file format. Arrays are indexed 0-based internally.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from exceptions import DatasetParseError, DatasetValidationError, InputValidationError

logger = logging.getLogger(__name__)

RESPONSE_TIME = 0
WorkloadRef = Union[int, str]


@dataclass(frozen=True, eq=False)
class MeasurementDataset:
    """The triple (S, M, v) plus workload and parameter metadata"""

    samples: np.ndarray            # k x l x m
    scenario_matrix: np.ndarray    # n x m
    block_index: np.ndarray        # n + 1, 1-based
    workload_names: Tuple[str, ...]
    param_units: Tuple[str, ...]
    param_names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        matrix = np.array(self.scenario_matrix)
        block_index = np.array(self.block_index)
        for arr in (samples, matrix, block_index):
            arr.setflags(write=False)
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'scenario_matrix', matrix)
        object.__setattr__(self, 'block_index', block_index)
        object.__setattr__(self, 'workload_names', tuple(self.workload_names))
        object.__setattr__(self, 'param_units', tuple(self.param_units))
        names = tuple(self.param_names) or default_param_names(len(self.param_units))
        object.__setattr__(self, 'param_names', names)
        _validate(self)

    @property
    def n(self) -> int:
        return self.scenario_matrix.shape[0]

    @property
    def k(self) -> int:
        return self.samples.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.samples.shape[1]

    @property
    def m(self) -> int:
        return self.samples.shape[2]

    def block_sizes(self) -> List[int]:
        return [int(s) for s in np.diff(self.block_index)]

    def workload_index(self, workload: WorkloadRef) -> int:
        """Resolve a workload name or 1-based index to a 1-based index"""
        if isinstance(workload, str):
            try:
                return self.workload_names.index(workload) + 1
            except ValueError:
                raise InputValidationError(f"unknown workload '{workload}'") from None
        index = int(workload)
        if not 1 <= index <= self.n:
            raise InputValidationError(f"workload index {index} out of range 1..{self.n}")
        return index

    def encoding(self, scenario: int) -> np.ndarray:
        """Column of M for a 1-based scenario index"""
        return self.scenario_matrix[:, scenario - 1]

    def owner_of(self, scenario: int) -> int:
        if not 1 <= scenario <= self.m:
            raise InputValidationError(f"scenario index {scenario} out of range 1..{self.m}")
        return int(np.searchsorted(self.block_index, scenario, side='right'))

    def slice(self, scenario: int) -> np.ndarray:
        """Frontal slice S(:,:,j), k x l"""
        return self.samples[:, :, scenario - 1]


def default_param_names(l: int) -> Tuple[str, ...]:  # noqa: E741
    return ('response_time',) + tuple(f"param_{j}" for j in range(1, l))


def _validate(ds: MeasurementDataset):
    """Raise DatasetValidationError naming the first violated invariant"""
    if ds.samples.ndim != 3 or ds.scenario_matrix.ndim != 2 or ds.block_index.ndim != 1:
        raise DatasetValidationError('shape', 'S must be 3-way, M a matrix and v a vector')
    k, l, m = ds.samples.shape
    n = ds.scenario_matrix.shape[0]
    if k < 2:
        raise DatasetValidationError('k >= 2', f"k = {k}, sample standard deviation undefined")
    if l < 1 or m < 1 or n < 1:
        raise DatasetValidationError('shape', f"n={n}, l={l}, m={m} must all be positive")
    if ds.scenario_matrix.shape[1] != m:
        raise DatasetValidationError('shape', f"M has {ds.scenario_matrix.shape[1]} columns, S has {m} slices")
    if len(ds.workload_names) != n or len(set(ds.workload_names)) != n:
        raise DatasetValidationError('workload names', f"need {n} distinct names, got {list(ds.workload_names)}")
    if len(ds.param_units) != l or len(ds.param_names) != l:
        raise DatasetValidationError('parameter metadata', f"need {l} units and names")
    if not np.all(np.isfinite(ds.samples)):
        raise DatasetValidationError('finite samples', 'S contains NaN or infinite values')
    if not np.issubdtype(ds.scenario_matrix.dtype, np.integer) or np.any(ds.scenario_matrix < 0):
        raise DatasetValidationError('M entries >= 0', 'M must hold nonnegative integers')

    v = ds.block_index
    if not np.issubdtype(v.dtype, np.integer) or len(v) != n + 1:
        raise DatasetValidationError('block_index length', f"v must hold {n + 1} integers")
    if v[0] != 1:
        raise DatasetValidationError('block_index(1) = 1', f"v(1) = {v[0]}")
    if np.any(np.diff(v) <= 0):
        raise DatasetValidationError('block_index strictly increasing', f"v = {v.tolist()}")
    if v[-1] - 1 != m:
        raise DatasetValidationError('block_index(n+1) - 1 = m', f"v(n+1) = {v[-1]}, m = {m}")

    for i in range(n):
        first, stop = v[i] - 1, v[i + 1] - 1
        single = ds.scenario_matrix[:, first]
        unit = np.zeros(n, dtype=single.dtype)
        unit[i] = 1
        if not np.array_equal(single, unit):
            raise DatasetValidationError(
                'single test is a unit column',
                f"scenario {first + 1} of workload '{ds.workload_names[i]}' encodes {single.tolist()}",
            )
        if np.any(ds.scenario_matrix[i, first:stop] < 1):
            raise DatasetValidationError(
                'workload runs in its own scenarios',
                f"workload '{ds.workload_names[i]}' has a zero entry in its block",
            )


# ================== DATASET OPERATIONS ==================

def slice_for_workload(ds: MeasurementDataset, workload: WorkloadRef) -> Tuple[range, int]:
    """Scenario range [v(i), v(i+1) - 1] of a workload and its single-test index v(i)"""
    i = ds.workload_index(workload)
    first = int(ds.block_index[i - 1])
    last = int(ds.block_index[i]) - 1
    return range(first, last + 1), first


def add_scenario(ds: MeasurementDataset, workload: WorkloadRef, encoding: Sequence[int],
                 samples: np.ndarray) -> MeasurementDataset:
    """Append a measured scenario at the end of the workload's block"""
    i = ds.workload_index(workload)
    encoding = np.asarray(encoding)
    samples = np.asarray(samples, dtype=float)
    if encoding.shape != (ds.n,):
        raise InputValidationError(f"encoding must have length {ds.n}, got shape {encoding.shape}")
    if np.any(encoding < 0) or np.any(encoding != np.round(encoding)):
        raise InputValidationError(f"encoding must hold nonnegative integers, got {encoding.tolist()}")
    if encoding[i - 1] < 1:
        raise InputValidationError(f"encoding does not include workload '{ds.workload_names[i - 1]}' itself")
    if samples.shape != (ds.k, ds.l):
        raise InputValidationError(f"samples must be {ds.k} x {ds.l}, got {samples.shape}")

    position = int(ds.block_index[i]) - 1
    block_index = ds.block_index.copy()
    block_index[i:] += 1
    new_ds = MeasurementDataset(
        samples=np.insert(ds.samples, position, samples, axis=2),
        scenario_matrix=np.insert(ds.scenario_matrix, position, encoding.astype(ds.scenario_matrix.dtype), axis=1),
        block_index=block_index,
        workload_names=ds.workload_names,
        param_units=ds.param_units,
        param_names=ds.param_names,
    )
    logger.debug(f"➕ [Store] Added scenario {position + 1} {encoding.tolist()} to '{ds.workload_names[i - 1]}'")
    return new_ds


def add_workload(ds: MeasurementDataset, name: str, single_test: np.ndarray) -> MeasurementDataset:
    """Append workload n+1 whose block holds only its single test"""
    single_test = np.asarray(single_test, dtype=float)
    if name in ds.workload_names:
        raise InputValidationError(f"workload '{name}' already exists")
    if single_test.shape != (ds.k, ds.l):
        raise InputValidationError(f"single test must be {ds.k} x {ds.l}, got {single_test.shape}")

    matrix = np.vstack([ds.scenario_matrix, np.zeros((1, ds.m), dtype=ds.scenario_matrix.dtype)])
    unit = np.zeros((ds.n + 1, 1), dtype=matrix.dtype)
    unit[-1, 0] = 1
    new_ds = MeasurementDataset(
        samples=np.concatenate([ds.samples, single_test[:, :, None]], axis=2),
        scenario_matrix=np.hstack([matrix, unit]),
        block_index=np.append(ds.block_index, ds.block_index[-1] + 1),
        workload_names=ds.workload_names + (name,),
        param_units=ds.param_units,
        param_names=ds.param_names,
    )
    logger.info(f"➕ [Store] Added workload '{name}' as block {new_ds.n}")
    return new_ds


def scenario_label(ds: MeasurementDataset, scenario: int) -> str:
    """OWNER+(BG1,BG2) label of a scenario"""
    owner = ds.owner_of(scenario)
    return encoding_label(ds.workload_names, ds.encoding(scenario), owner)


def encoding_label(names: Sequence[str], encoding: Sequence[int], owner: int) -> str:
    background = []
    for index, count in enumerate(encoding, start=1):
        count = int(count) - (1 if index == owner else 0)
        background.extend([names[index - 1]] * count)
    label = names[owner - 1]
    if background:
        label += f"+({','.join(background)})"
    return label


def parse_encoding_label(names: Sequence[str], label: str) -> Tuple[int, Tuple[int, ...]]:
    """Inverse of encoding_label: 'A+(B,B)' -> (owner of A, encoding)"""
    names = list(names)
    owner_name, _, rest = label.strip().partition('+')
    background = []
    if rest:
        rest = rest.strip()
        if not (rest.startswith('(') and rest.endswith(')')):
            raise InputValidationError(f"malformed scenario label '{label}', expected OWNER+(BG1,BG2)")
        background = [b.strip() for b in rest[1:-1].split(',') if b.strip()]
    encoding = [0] * len(names)
    for name in [owner_name.strip(), *background]:
        if name not in names:
            raise InputValidationError(f"unknown workload '{name}' in scenario label '{label}'")
        encoding[names.index(name)] += 1
    return names.index(owner_name.strip()) + 1, tuple(encoding)


# ================== DATASET DIRECTORY STORAGE ==================

class DatasetStore:
    """Reads and writes dataset directories: meta.json, scenarios.csv, samples/<id>.csv"""

    META_FILE = 'meta.json'
    SCENARIO_FILE = 'scenarios.csv'
    SAMPLES_DIR = 'samples'

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.samples_dir = self.root / self.SAMPLES_DIR

    def load(self) -> MeasurementDataset:
        if not self.root.is_dir():
            raise DatasetParseError(str(self.root), None, 'dataset directory does not exist')
        meta = self._read_meta()
        names = list(meta['workload_names'])
        matrix, owners = self._read_scenarios(names, meta['m'])
        block_index = _block_index_from_owners(owners, len(names))
        slices = [self._read_samples(j, meta['param_names'], meta['k']) for j in range(1, meta['m'] + 1)]
        ds = MeasurementDataset(
            samples=np.stack(slices, axis=2),
            scenario_matrix=matrix,
            block_index=block_index,
            workload_names=tuple(names),
            param_units=tuple(meta['param_units']),
            param_names=tuple(meta['param_names']),
        )
        if (ds.n, ds.l) != (meta['n'], meta['l']):
            raise DatasetValidationError('meta.json consistency', f"meta declares n={meta['n']}, l={meta['l']}")
        logger.info(f"📁 [Store] Loaded {self.root}: n={ds.n}, k={ds.k}, l={ds.l}, m={ds.m}")
        return ds

    def save(self, ds: MeasurementDataset) -> Path:
        self.samples_dir.mkdir(parents=True, exist_ok=True)
        meta = {
            'n': ds.n, 'k': ds.k, 'l': ds.l, 'm': ds.m,
            'workload_names': list(ds.workload_names),
            'param_units': list(ds.param_units),
            'param_names': list(ds.param_names),
        }
        (self.root / self.META_FILE).write_text(json.dumps(meta, indent=2) + '\n')

        with open(self.root / self.SCENARIO_FILE, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['scenario_id', 'owner_workload', *ds.workload_names])
            for j in range(1, ds.m + 1):
                owner = ds.workload_names[ds.owner_of(j) - 1]
                writer.writerow([j, owner, *[int(c) for c in ds.encoding(j)]])

        for stale in self.samples_dir.glob('*.csv'):
            stale.unlink()
        for j in range(1, ds.m + 1):
            with open(self.samples_dir / f"{j}.csv", 'w', newline='') as f:
                writer = csv.writer(f)
                writer.writerow(ds.param_names)
                for row in ds.slice(j):
                    writer.writerow([repr(float(x)) for x in row])

        logger.info(f"💾 [Store] Saved dataset to {self.root} ({ds.m} scenarios)")
        return self.root

    def _read_meta(self) -> Dict:
        path = self.root / self.META_FILE
        try:
            meta = json.loads(path.read_text())
        except FileNotFoundError:
            raise DatasetParseError(str(path), None, 'file not found') from None
        except json.JSONDecodeError as e:
            raise DatasetParseError(str(path), e.lineno, e.msg) from None
        for key in ('n', 'k', 'l', 'm', 'workload_names', 'param_units'):
            if key not in meta:
                raise DatasetParseError(str(path), None, f"missing key '{key}'")
        meta.setdefault('param_names', list(default_param_names(meta['l'])))
        return meta

    def _read_scenarios(self, names: List[str], m: int) -> Tuple[np.ndarray, List[int]]:
        path = self.root / self.SCENARIO_FILE
        columns, owners = [], []
        try:
            with open(path, newline='') as f:
                reader = csv.reader(f)
                header = next(reader, None)
                if header != ['scenario_id', 'owner_workload', *names]:
                    raise DatasetParseError(str(path), 1, f"header must be scenario_id, owner_workload, {', '.join(names)}")
                for row in reader:
                    if not row:
                        continue
                    if len(row) != len(names) + 2:
                        raise DatasetParseError(str(path), reader.line_num, f"expected {len(names) + 2} fields, got {len(row)}")
                    if row[1] not in names:
                        raise DatasetParseError(str(path), reader.line_num, f"unknown owner workload '{row[1]}'")
                    try:
                        scenario_id = int(row[0])
                        counts = [int(c) for c in row[2:]]
                    except ValueError as e:
                        raise DatasetParseError(str(path), reader.line_num, str(e)) from None
                    if scenario_id != len(columns) + 1:
                        raise DatasetParseError(str(path), reader.line_num, f"scenario ids must run 1..m in order, got {scenario_id}")
                    owners.append(names.index(row[1]) + 1)
                    columns.append(counts)
        except FileNotFoundError:
            raise DatasetParseError(str(path), None, 'file not found') from None
        if len(columns) != m:
            raise DatasetValidationError('m = number of scenarios', f"meta declares m={m}, scenarios.csv has {len(columns)}")
        return np.array(columns, dtype=np.int64).T.reshape(len(names), m), owners

    def _read_samples(self, scenario: int, param_names: List[str], k: int) -> np.ndarray:
        return read_sample_file(self.samples_dir / f"{scenario}.csv", param_names, k)


def read_sample_file(path: Union[str, Path], param_names: Sequence[str], k: Optional[int] = None) -> np.ndarray:
    """k x l samples of one scenario, header row naming the parameters"""
    path = Path(path)
    rows = []
    try:
        with open(path, newline='') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != list(param_names):
                raise DatasetParseError(str(path), 1, f"header must be {', '.join(param_names)}")
            for row in reader:
                if not row:
                    continue
                if len(row) != len(param_names):
                    raise DatasetParseError(str(path), reader.line_num, f"expected {len(param_names)} values, got {len(row)}")
                try:
                    rows.append([float(x) for x in row])
                except ValueError as e:
                    raise DatasetParseError(str(path), reader.line_num, str(e)) from None
    except FileNotFoundError:
        raise DatasetParseError(str(path), None, 'file not found') from None
    if k is not None and len(rows) != k:
        raise DatasetValidationError('fixed k', f"{path.name} holds {len(rows)} repeats, dataset k = {k}")
    return np.array(rows, dtype=float)


def _block_index_from_owners(owners: List[int], n: int) -> np.ndarray:
    if any(b < a for a, b in zip(owners, owners[1:])):
        raise DatasetValidationError('contiguous workload blocks', 'scenarios.csv rows must be grouped by workload in order')
    counts = np.bincount(np.asarray(owners, dtype=np.int64), minlength=n + 1)[1:]
    if np.any(counts == 0):
        missing = [i + 1 for i in np.flatnonzero(counts == 0)]
        raise DatasetValidationError('p_i >= 1', f"workloads {missing} have no scenarios")
    return np.concatenate([[1], 1 + np.cumsum(counts)]).astype(np.int64)


def ingest_dataset(path: Union[str, Path]) -> MeasurementDataset:
    return DatasetStore(path).load()


def save_dataset(ds: MeasurementDataset, path: Union[str, Path]) -> Path:
    return DatasetStore(path).save(ds)


def build_dataset(workload_names: Sequence[str], blocks: Dict[str, List[Tuple[Sequence[int], np.ndarray]]],
                  param_units: Sequence[str], param_names: Optional[Sequence[str]] = None) -> MeasurementDataset:
    """Assemble a dataset from per-workload lists of (encoding, k x l samples), single test first"""
    columns, slices, sizes = [], [], []
    for name in workload_names:
        block = blocks.get(name, [])
        sizes.append(len(block))
        for encoding, samples in block:
            columns.append(list(encoding))
            slices.append(np.asarray(samples, dtype=float))
    if not slices:
        raise InputValidationError('no scenarios given')
    return MeasurementDataset(
        samples=np.stack(slices, axis=2),
        scenario_matrix=np.array(columns, dtype=np.int64).T,
        block_index=np.concatenate([[1], 1 + np.cumsum(sizes)]).astype(np.int64),
        workload_names=tuple(workload_names),
        param_units=tuple(param_units),
        param_names=tuple(param_names or ()),
    )
