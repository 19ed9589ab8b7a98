"""Exception types shared across the package.

The CLI maps these onto process exit codes: validation problems exit 1,
numerical failures exit 2, filesystem problems exit 3.
"""


class ValidationError(ValueError):
    """Malformed configuration, dataset, or argument structure."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ParameterDomainError(DomainError):
    """A model or copula parameter lies outside its admissible range."""


class UndefinedMetricError(ValueError):
    """A metric has no defined value on the given data (e.g. no comparable pairs)."""


class NumericalFailure(RuntimeError):
    """A computation produced a non-finite value.

    ``record_index`` points at the offending record when the failure arose
    from a per-record term; ``epoch`` and ``last_state`` are populated when
    training fails mid-run so the caller can inspect the last finite state.
    """

    def __init__(self, message, record_index=None, epoch=None, last_state=None):
        super().__init__(message)
        self.record_index = record_index
        self.epoch = epoch
        self.last_state = last_state
