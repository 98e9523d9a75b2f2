import itertools
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from exceptions import InputValidationError, NnlsConvergenceError
from nnls import kkt_violation, solve_nnls


def subset_oracle(A, b):
    """Exhaustive search over column subsets: least squares on each, keep the best feasible one"""
    best_x, best_obj = np.zeros(A.shape[1]), float(b @ b)
    for size in range(1, A.shape[1] + 1):
        for cols in itertools.combinations(range(A.shape[1]), size):
            z = np.linalg.lstsq(A[:, cols], b, rcond=None)[0]
            if np.any(z < 0):
                continue
            x = np.zeros(A.shape[1])
            x[list(cols)] = z
            obj = float(np.sum((b - A @ x) ** 2))
            if obj < best_obj:
                best_x, best_obj = x, obj
    return best_x, best_obj


def test_identity_nonnegative_rhs():
    sol = solve_nnls(np.eye(2), [3.0, 4.0])
    assert sol.weights.tolist() == pytest.approx([3.0, 4.0])
    assert sol.residual_norm == pytest.approx(0.0, abs=1e-12)
    assert sol.active_set == (0, 1)


def test_identity_negative_component_goes_to_bound():
    sol = solve_nnls(np.eye(2), [3.0, -4.0])
    assert sol.weights.tolist() == pytest.approx([3.0, 0.0])
    assert sol.residual_norm == pytest.approx(4.0)


def test_orthogonal_rhs_gives_zero_solution():
    sol = solve_nnls(np.array([[1.0], [0.0]]), [0.0, 1.0])
    assert sol.is_zero
    assert sol.iterations == 0


def test_random_instances_match_subset_oracle():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    for _ in range(50):
        A = rng.standard_normal((4, 3))
        b = rng.standard_normal(4)
        sol = solve_nnls(A, b)
        _, best_obj = subset_oracle(A, b)
        obj = float(np.sum((b - A @ sol.weights) ** 2))
        assert obj == pytest.approx(best_obj, abs=1e-8)
        assert np.all(sol.weights >= 0)
        assert kkt_violation(A, b, sol.weights) <= 1e-10
    assert time.perf_counter() - started < 1.0


def test_tie_break_prefers_lowest_index():
    A = np.array([[1.0, 1.0], [0.0, 0.0]])
    sol = solve_nnls(A, [1.0, 0.0])
    assert sol.weights.tolist() == pytest.approx([1.0, 0.0])


def test_row_weights_change_the_fit():
    A = np.array([[1.0], [1.0]])
    b = np.array([0.0, 2.0])
    assert solve_nnls(A, b).weights[0] == pytest.approx(1.0)
    assert solve_nnls(A, b, row_weights=[1.0, 3.0]).weights[0] == pytest.approx(1.5)


@pytest.mark.parametrize('matrix, rhs, weights', [
    (np.eye(2), [1.0, 2.0, 3.0], None),
    (np.eye(2), [np.nan, 1.0], None),
    (np.zeros((2, 0)), [1.0, 1.0], None),
    (np.eye(2), [1.0, 1.0], [1.0, -1.0]),
])
def test_invalid_input(matrix, rhs, weights):
    with pytest.raises(InputValidationError):
        solve_nnls(matrix, rhs, row_weights=weights)


def test_iteration_cap_reports_best_iterate():
    A = np.eye(3)
    with pytest.raises(NnlsConvergenceError) as err:
        solve_nnls(A, [1.0, 2.0, 3.0], max_outer=1)
    assert err.value.converged is False
    assert err.value.best_iterate.shape == (3,)
    assert err.value.residual_norm > 0


def test_deterministic():
    rng = np.random.default_rng(5)
    A, b = rng.random((6, 4)), rng.random(6)
    first, second = solve_nnls(A, b), solve_nnls(A, b)
    assert np.array_equal(first.weights, second.weights)


small_ints = st.integers(-10, 10).map(float)


@given(arrays(np.float64, (5, 3), elements=small_ints), arrays(np.float64, (5,), elements=small_ints))
def test_objective_never_worse_than_zero(A, b):
    sol = solve_nnls(A, b)
    assert np.all(sol.weights >= 0)
    assert np.sum((b - A @ sol.weights) ** 2) <= np.sum(b ** 2) + 1e-9


def test_zero_matrix_keeps_zero_weights():
    sol = solve_nnls(np.zeros((3, 2)), [1.0, 2.0, 2.0])
    assert sol.weights.tolist() == [0.0, 0.0]
    assert sol.residual_norm == pytest.approx(3.0)


@pytest.mark.parametrize('seed', range(10))
def test_column_scaling_divides_the_weight(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 3))
    b = rng.standard_normal(6)
    column, c = int(rng.integers(0, 3)), float(rng.uniform(0.2, 5.0))
    scaled = A.copy()
    scaled[:, column] *= c
    sol, sol_scaled = solve_nnls(A, b), solve_nnls(scaled, b)
    expected = sol.weights.copy()
    expected[column] /= c
    assert sol_scaled.weights == pytest.approx(expected, rel=1e-9, abs=1e-12)
    assert sol_scaled.residual_norm == pytest.approx(sol.residual_norm, rel=1e-9, abs=1e-12)
