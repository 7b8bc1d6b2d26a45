"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems (including layout
mismatches) exit with 2, numerical failures with 3.  Plain ValueError is used
for caller mistakes (bad argument combinations, malformed arrays).
"""


class ConfigurationError(Exception):
    """Invalid topology, size, scheme, or experiment configuration."""


class LayoutError(ConfigurationError):
    """An instance does not embed into the requested feature layout."""


class NumericalError(Exception):
    """A numerical contract was violated (non-Hermitian input, divergence,
    non-monotone time table, failed integrator self-convergence)."""


class FormatError(Exception):
    """A serialized artifact (model checkpoint, dataset file) is corrupt or
    has an unsupported format version."""


class ResidualEnergyUndefined(ArithmeticError):
    """The classical ground energy is below the relative-statistics floor;
    the instance must be excluded rather than divided through."""
