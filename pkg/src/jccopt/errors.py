"""Exception types shared across the package."""


class ModelError(ValueError):
    """Malformed or inconsistent problem data (dimensions, schema, unsupported combos)."""


class NumericError(RuntimeError):
    """Algorithm failed numerically (iteration cap, lost feasibility, bad pivot)."""


class CapacityError(ModelError):
    """Requested computation exceeds a hard size guard (e.g. oracle enumeration)."""
