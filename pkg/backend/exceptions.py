"""
Error hierarchy for the colocation predictor.

Every error carries the process exit code the CLI reports for it:
0 success, 2 validation error, 3 boundary/ZeroSolution rejection, 4 internal error.
"""

from typing import Any, List, Optional, Sequence

EXIT_VALIDATION = 2
EXIT_REJECTED = 3
EXIT_INTERNAL = 4


class PredictorError(Exception):
    """Base class, carries an exit code"""

    exit_code = EXIT_INTERNAL

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class DatasetParseError(PredictorError):
    """Malformed file inside a dataset directory"""

    exit_code = EXIT_VALIDATION

    def __init__(self, file: str, line: Optional[int], detail: str):
        where = f"{file}:{line}" if line is not None else file
        super().__init__(f"{where}: {detail}")
        self.file = file
        self.line = line


class DatasetValidationError(PredictorError):
    """A MeasurementDataset invariant does not hold"""

    exit_code = EXIT_VALIDATION

    def __init__(self, invariant: str, detail: str):
        super().__init__(f"invariant '{invariant}' violated: {detail}")
        self.invariant = invariant


class InputValidationError(PredictorError):
    exit_code = EXIT_VALIDATION


class DescriptorError(PredictorError):
    exit_code = EXIT_VALIDATION


class NnlsConvergenceError(PredictorError):
    """Active-set iteration cap hit; keeps the best iterate found"""

    exit_code = EXIT_INTERNAL

    def __init__(self, message: str, best_iterate: Any, residual_norm: float):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.residual_norm = residual_norm
        self.converged = False


class NoCombinedScenariosError(PredictorError):
    exit_code = EXIT_REJECTED

    def __init__(self, workload: str):
        super().__init__(f"no combined measurements for workload '{workload}'")
        self.workload = workload


ZERO_SOLUTION_REMEDIES = (
    "add a measurement of the questioned scenario to the dataset",
    "fall back to Q2 with the target's single test removed",
)


class ZeroSolutionError(PredictorError):
    """NNLS returned x = 0: the measured scenarios do not cover the question"""

    exit_code = EXIT_REJECTED

    def __init__(self, target: str, question: Sequence[int], missing: List[str]):
        detail = ", ".join(missing) if missing else "none"
        super().__init__(
            f"measured scenarios of '{target}' do not match question {list(question)} "
            f"(background never measured with the target: {detail}); "
            f"remedies: {'; or '.join(ZERO_SOLUTION_REMEDIES)}"
        )
        self.target = target
        self.question = list(question)
        self.missing = missing
        self.remedies = list(ZERO_SOLUTION_REMEDIES)
