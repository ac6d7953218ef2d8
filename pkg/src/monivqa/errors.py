"""Typed errors shared across the toolkit.

Operations raise these instead of returning NaN so that callers (in
particular the optimizer) can tell a landscape cliff from numerical noise.
"""


class ContractError(ValueError):
    """A precondition of an operation was violated by the caller."""


class SizeError(ContractError):
    """Qubit count or dimension outside the supported range."""


class StateCorruptionError(RuntimeError):
    """The statevector lost normalization beyond recoverable tolerance."""


class DeadBranchError(RuntimeError):
    """A forced measurement outcome has branch probability below threshold.

    Attributes
    ----------
    site : (layer, qubit) pair of the offending measurement, if known.
    shift : description of the parameter shift active when the branch
        died (parameter-shift evaluations only).
    """

    def __init__(self, message, site=None, shift=None):
        super().__init__(message)
        self.site = site
        self.shift = shift


class CapacityError(RuntimeError):
    """Exact branch enumeration was requested beyond the site cap."""


class BracketError(ValueError):
    """A fitted critical point escaped the sampled parameter grid."""


class ConvergenceError(RuntimeError):
    """An iterative numerical routine failed to converge."""
