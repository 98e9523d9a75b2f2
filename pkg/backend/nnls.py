"""
Nonnegative least squares for the Phase 2 scenario fit:

    min ||b - M1 x||  subject to  x >= 0

Active-set method after Lawson and Hanson. Entering variables are chosen by the
largest positive gradient component, ties broken by the lowest column index.
An optional diagonal row-weight vector turns the Euclidean norm into a weighted one.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from exceptions import InputValidationError, NnlsConvergenceError
from settings import KKT_TOLERANCE

logger = logging.getLogger(__name__)

_ZERO = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class NnlsSolution:
    weights: np.ndarray
    residual_norm: float
    iterations: int = 0

    @property
    def active_set(self) -> Tuple[int, ...]:
        """0-based columns with a positive weight"""
        return tuple(int(j) for j in np.flatnonzero(self.weights > 0))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.weights > 0)


def _prepare(matrix, rhs, row_weights):
    A = np.asarray(matrix, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or b.ndim != 1:
        raise InputValidationError('expected a matrix and a vector')
    if A.shape[0] != b.shape[0]:
        raise InputValidationError(f"incompatible dimensions: matrix {A.shape}, rhs {b.shape}")
    if A.shape[1] < 1:
        raise InputValidationError('matrix needs at least one column')
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise InputValidationError('matrix and rhs must be finite')
    if row_weights is not None:
        w = np.asarray(row_weights, dtype=float)
        if w.shape != b.shape or np.any(w < 0):
            raise InputValidationError('row weights must be a nonnegative vector matching the rhs')
        root = np.sqrt(w)
        A = A * root[:, None]
        b = b * root
    return A, b


def kkt_violation(matrix, rhs, x, row_weights: Optional[Sequence[float]] = None) -> float:
    """Largest violation of the KKT conditions of 0.5 * ||b - Ax||^2 at x"""
    A, b = _prepare(matrix, rhs, row_weights)
    x = np.asarray(x, dtype=float)
    gradient = -A.T @ (b - A @ x)
    positive = x > 0
    on_support = np.abs(gradient[positive]).max(initial=0.0)
    at_bound = np.maximum(-gradient[~positive], 0.0).max(initial=0.0)
    negative = np.maximum(-x, 0.0).max(initial=0.0)
    return float(max(on_support, at_bound, negative))


def solve_nnls(matrix, rhs, row_weights: Optional[Sequence[float]] = None,
               tol: float = KKT_TOLERANCE, max_outer: Optional[int] = None) -> NnlsSolution:
    """Solve the nonnegative least-squares problem, deterministic for fixed inputs"""
    A, b = _prepare(matrix, rhs, row_weights)
    p = A.shape[1]
    max_outer = 10 * p if max_outer is None else max_outer

    x = np.zeros(p)
    passive = np.zeros(p, dtype=bool)
    blocked = np.zeros(p, dtype=bool)
    outer = 0

    while True:
        w = A.T @ (b - A @ x)
        candidates = ~passive & ~blocked & (w > tol)
        if not candidates.any():
            break
        if outer >= max_outer:
            residual = float(np.linalg.norm(b - A @ x))
            logger.warning(f"⚠️ [NNLS] No convergence after {outer} outer iterations (residual {residual:.3e})")
            raise NnlsConvergenceError(
                f"NNLS did not converge within {max_outer} outer iterations",
                best_iterate=x.copy(), residual_norm=residual,
            )
        outer += 1
        entering = int(np.argmax(np.where(candidates, w, -np.inf)))
        passive[entering] = True

        first_pass = True
        while True:
            z = np.zeros(p)
            support = np.flatnonzero(passive)
            z[support] = np.linalg.lstsq(A[:, support], b, rcond=None)[0]
            if first_pass and z[entering] <= 0:
                # entering column cannot leave its bound numerically
                passive[entering] = False
                blocked[entering] = True
                break
            first_pass = False
            if np.all(z[support] > 0):
                x = z
                blocked[:] = False
                break
            shrinking = support[z[support] <= 0]
            steps = x[shrinking] / (x[shrinking] - z[shrinking])
            first_zero = shrinking[int(np.argmin(steps))]
            x = x + float(np.min(steps)) * (z - x)
            leaving = passive & (x <= _ZERO * max(1.0, float(np.abs(x).max())))
            leaving[first_zero] = True
            passive &= ~leaving
            x[~passive] = 0.0

    x = np.maximum(x, 0.0)
    residual = float(np.linalg.norm(b - A @ x))
    logger.debug(f"🧮 [NNLS] Solved {A.shape[0]}x{p} in {outer} outer iterations, residual {residual:.3e}, "
                 f"KKT violation {kkt_violation(A, b, x):.1e}")
    return NnlsSolution(weights=x, residual_norm=residual, iterations=outer)
