"""Error kinds that the command line maps onto exit codes."""


class InputError(Exception):
    """Unreadable or malformed input (bad file, bad flag value). CLI exit code 1."""


class AssumptionViolation(Exception):
    """A model assumption does not hold (degenerate kernel family, variance bound
    exceeded, non-unit field variance, under-resolved grid). CLI exit code 2."""
