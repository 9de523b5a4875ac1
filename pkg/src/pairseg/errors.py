"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument breaks a documented precondition (shape, range, feasibility)."""


class DataError(ValueError):
    """A file or record is malformed (parse failure, schema violation, bad version)."""


class FitDiverged(RuntimeError):
    """An optimization produced a non-finite loss and was aborted."""
