"""Exception taxonomy shared by all modules.

The CLI maps these onto exit codes: configuration problems exit 2,
data problems exit 3, flow divergence exits 4.
"""


class TreeSlicedError(Exception):
    """Base class for all library errors."""


class InvalidMeasure(TreeSlicedError, ValueError):
    """Supports/weights do not form a valid empirical measure."""


class DimensionError(TreeSlicedError, ValueError):
    """Operands live in different ambient dimensions."""


class ConfigError(TreeSlicedError, ValueError):
    """Inconsistent or out-of-range configuration."""


class DegenerateDirections(TreeSlicedError, ValueError):
    """Direction set is numerically linearly dependent; caller should redraw."""


class StructureError(TreeSlicedError, ValueError):
    """Tree system has the wrong structure for the requested operation."""


# The gradient path raises this for non-concurrent systems; same condition,
# kept as an alias so callers can catch either name.
TreeStructureError = StructureError


class MassError(TreeSlicedError, ValueError):
    """Total masses of the two measures disagree beyond tolerance."""


class SizeError(TreeSlicedError, ValueError):
    """Point clouds have mismatched sizes where equality is required."""


class ScaleError(TreeSlicedError, ValueError):
    """Problem instance exceeds the size cap of an exact solver."""


class DivergenceError(TreeSlicedError, RuntimeError):
    """Gradient flow diverged past the guard threshold."""
