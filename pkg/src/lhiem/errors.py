"""Exception hierarchy shared by every submodel."""


class LhiemError(Exception):
    """Base class for all package errors."""


class DataError(LhiemError):
    """Bad or missing input data (CLI exit code 2)."""


class ParseError(DataError):
    def __init__(self, message, path=None, row=None, column=None):
        self.path = path
        self.row = row
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


class ValidationError(DataError):
    def __init__(self, violations):
        self.violations = list(violations)
        shown = "; ".join(str(v) for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"population failed validation: {shown}{more}")


class UnknownRawValue(DataError):
    pass


class EmptyPopulation(DataError):
    pass


class InvalidTargets(DataError):
    pass


class InvalidTarget(DataError):
    pass


class EmptyPool(DataError):
    pass


class UnknownVariant(LhiemError):
    pass


class MissingCovariate(LhiemError):
    pass


class FitError(LhiemError):
    """Model estimation failed."""


class Separation(FitError):
    pass


class NonConvergence(FitError):
    pass


class NoConvergence(FitError):
    pass


class TooFewRows(FitError):
    pass


class ThinLeaf(FitError):
    pass


class StepError(LhiemError):
    """A submodel failed inside the year step."""

    def __init__(self, year, submodel, cause):
        self.year = year
        self.submodel = submodel
        self.cause = cause
        super().__init__(f"year {year}, submodel {submodel}: {cause}")
