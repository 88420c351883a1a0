"""Exception hierarchy shared across the package.

CLI exit-code mapping: InputError (and subclasses) -> 2,
NumericalConsistencyError -> 3.
"""


class InputError(ValueError):
    """Invalid argument, config, or file content."""


class UnsupportedError(InputError):
    """Operation not defined for this kernel/model family."""


class NumericalConsistencyError(RuntimeError):
    """Computed quantities violate an internal invariant beyond tolerance.

    Distinguishes genuine corruption (e.g. a Gram matrix far from PSD) from
    ordinary floating-point noise, which is clamped silently.
    """
