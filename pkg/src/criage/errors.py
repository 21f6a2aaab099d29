"""Exception hierarchy shared across the package.

CLI exit codes: usage errors exit 2 (click), DataError exits 3,
NumericalError exits 4.
"""


class CriageError(Exception):
    """Base class for package errors."""


class DataError(CriageError):
    """Bad or inconsistent input data (missing files, malformed lines, bad edits)."""


class MalformedLineError(DataError):
    def __init__(self, path, lineno, line):
        self.path = str(path)
        self.lineno = lineno
        self.line = line
        super().__init__(f"{path}:{lineno}: expected 'subject<TAB>relation<TAB>object', got {line!r}")


class EditError(DataError):
    """Adding a duplicate triple or removing an absent one."""


class NumericalError(CriageError):
    """Numerical failure: divergence, singular systems, non-finite values."""


class SingularHessianError(NumericalError):
    """Hessian is singular or not positive definite (typically lambda == 0)."""


class DivergenceError(NumericalError):
    """Training produced a non-finite loss."""
