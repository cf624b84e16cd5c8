"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called with inputs outside its contract."""


class DomainError(ValueError):
    """A field was evaluated where it is undefined."""


class UnsupportedOperation(NotImplementedError):
    """The requested operation needs data the object does not carry."""


class IntegrationError(RuntimeError):
    """The ODE integrator could not complete the requested run."""


class PeriodNotFoundError(RuntimeError):
    """No return of the orbit was found before the time bound."""

    def __init__(self, message, bound):
        super().__init__(message)
        self.bound = bound
