"""Exception types shared across the package.

The CLI maps these onto exit codes: input problems exit 2, resource caps
exit 3, internal invariant failures exit 4.
"""


class MalformedInputError(ValueError):
    """Structurally invalid forest or instance description (cycle, bad ids, ...)."""


class InconsistentInputError(ValueError):
    """Structurally identical nodes carry conflicting data (sizes, costs)."""


class UnsupportedStructureError(ValueError):
    """Operation requires an AND-forest but an OR alternative was found."""


class ConfigurationError(ValueError):
    """Invalid algorithm or expense-model configuration."""


class ResourceLimitError(RuntimeError):
    """A combinatorial cap was exceeded (exhaustive search, closure size, ...)."""
