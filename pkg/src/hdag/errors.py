"""Error types shared across the package.

The CLI maps these onto exit codes, so library code should raise the
most specific class that applies rather than bare exceptions.
"""


class UsageError(ValueError):
    """Bad arguments or option combinations (CLI exit code 1)."""


class FormatError(ValueError):
    """Unsupported or malformed file content (CLI exit code 2)."""


class DegenerateInputError(ValueError):
    """Input that is structurally valid but numerically unusable,
    e.g. zero-power noise or a signal shorter than one metric segment
    (CLI exit code 3)."""
