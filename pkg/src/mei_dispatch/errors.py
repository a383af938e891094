"""Exception hierarchy.

Three families map onto the CLI exit codes: configuration problems (2),
bad or unusable data (3) and optimisation failures (4).
"""


class MeiDispatchError(Exception):
    exit_code = 1


class ConfigError(MeiDispatchError):
    exit_code = 2


class DataError(MeiDispatchError):
    exit_code = 3


class SolverError(MeiDispatchError):
    exit_code = 4


# -- ingest ---------------------------------------------------------------

class MissingColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"MissingColumn: required column {column!r} not in header")


class NonHourlySpacing(DataError):
    def __init__(self, timestamp, gap_hours=None):
        self.timestamp = timestamp
        self.gap_hours = gap_hours
        detail = "" if gap_hours is None else f" (gap {gap_hours:g} h)"
        super().__init__(f"NonHourlySpacing: record at {timestamp} is not 1 h after its predecessor{detail}")


class NonNumericCell(DataError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"NonNumericCell: row {row}, column {column!r}: {value!r}")


class EmptySeries(DataError):
    def __init__(self, msg="EmptySeries: no data rows"):
        super().__init__(msg)


class UnknownFuel(DataError):
    def __init__(self, fuel):
        self.fuel = fuel
        super().__init__(f"UnknownFuel: {fuel!r}")


class InvalidRecord(DataError):
    pass


class InvalidParams(ConfigError):
    pass


# -- mei ------------------------------------------------------------------

class DegenerateDesign(DataError):
    pass


class EmptySegmentDomain(DataError):
    def __init__(self, segment, lo, hi):
        self.segment = segment
        super().__init__(
            f"EmptySegmentDomain: segment {segment} window [{lo:g}, {hi:g}] lies outside the fit domain"
        )


class ResourceMismatch(DataError):
    pass


# -- dispatch / accounting ------------------------------------------------

class Infeasible(SolverError):
    pass


class BudgetExceeded(SolverError):
    pass


class LengthMismatch(DataError):
    pass
