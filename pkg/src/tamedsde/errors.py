"""Exception hierarchy shared by the package."""


class Error(Exception):
    pass


class ConfigurationError(Error, ValueError):
    """Invalid parameters, or a scheme/model combination that cannot run."""


class UnsupportedSchemeError(ConfigurationError):
    """The scheme needs iterated integrals the model's noise does not allow."""


class StepError(Error, FloatingPointError):
    """A model callback produced a non-finite value during a step.

    Carries the offending state and, once annotated by the path driver,
    the step index and path index.
    """

    def __init__(self, message, state=None, step=None, path=None):
        super().__init__(message)
        self.state = state
        self.step = step
        self.path = path

    def __str__(self):
        where = []
        if self.path is not None:
            where.append(f"path {self.path}")
        if self.step is not None:
            where.append(f"step {self.step}")
        msg = super().__str__()
        if where:
            msg = f"{msg} ({', '.join(where)})"
        return msg
