"""Exception types shared across the toolkit."""


class SaliqError(Exception):
    """Base class for all toolkit errors."""


class FormatError(SaliqError):
    """A file is not a well-formed container (bad magic, header, or payload)."""


class UnsupportedLayoutError(SaliqError):
    """A file is well-formed but uses a dtype, order, or rank we refuse to reinterpret."""


class DataIntegrityError(SaliqError):
    """Numeric payload violates invariants (NaN or Inf where finite values are required)."""


class ShapeMismatchError(SaliqError):
    """Two inputs that must agree on a dimension do not."""


class ConfigValidationError(SaliqError):
    """One or more config violations, aggregated so the config can be fixed in one pass."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class MaskIndexError(SaliqError):
    """A selection mask references an index outside the target matrix."""


class NumericalError(SaliqError):
    """A numerical routine failed (for example a Cholesky factorization of a non-PSD matrix)."""


class SweepCellError(SaliqError):
    """A sweep cell failed; the message carries the (layer, method, budget) identity."""
