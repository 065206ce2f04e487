"""Exception types shared across the package.

Each error carries an ``exit_code`` used by the command line front end:
3 for bad input data, 4 for numerical failures.
"""


class HmmLfdError(Exception):
    code = "ERROR"
    exit_code = 3


class InvalidArgumentError(HmmLfdError, ValueError):
    code = "INVALID_ARGUMENT"


class ParseError(HmmLfdError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    code = "PARSE"

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class MalformedLogError(ParseError):
    code = "MALFORMED_LOG"


class UnreachablePoseError(HmmLfdError):
    code = "UNREACHABLE"
    exit_code = 4

    def __init__(self, message, residual=None, index=None):
        self.residual = residual
        self.index = index
        super().__init__(message)


class DegenerateAlignmentError(HmmLfdError):
    code = "DEGENERATE_ALIGNMENT"
    exit_code = 4

    def __init__(self, message, states=()):
        self.states = tuple(states)
        super().__init__(message)


class TooFewStatesError(HmmLfdError):
    code = "TOO_FEW_STATES"
    exit_code = 4
