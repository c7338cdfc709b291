"""Exception types shared across the toolkit."""


class LbevalError(Exception):
    pass


class ParseError(LbevalError, ValueError):
    """Malformed input line. Carries the 1-based line number when known."""

    def __init__(self, message, line_no=None, source=None):
        self.line_no = line_no
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line_no is not None:
            where += f"{line_no}:"
        super().__init__(f"{where} {message}" if where else message)


class IntegrityError(LbevalError, ValueError):
    """Input parsed but violates a data invariant."""


class MissingFileError(LbevalError, FileNotFoundError):
    pass


class DegenerateInputError(LbevalError, ValueError):
    """A significance test has nothing to test (all-zero diffs, zero variance)."""


class ResourceError(LbevalError, MemoryError):
    pass
