"""Exception hierarchy and the CLI exit codes attached to it."""


class PredgapError(Exception):
    """Base class for every error raised by this package."""


class FormatError(PredgapError):
    """A file could not be parsed under the requested format."""


class ValidationError(PredgapError):
    """Inputs violate a structural contract (shape, range, consistency)."""


class NumericDomainError(PredgapError):
    """A mathematically undefined quantity was requested."""


# CLI exit codes; argparse itself exits with EXIT_USAGE on bad flags.
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


def exit_code_for(exc: PredgapError) -> int:
    if isinstance(exc, NumericDomainError):
        return EXIT_NUMERIC
    return EXIT_VALIDATION
