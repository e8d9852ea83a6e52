"""Exception types shared across modules."""


class SvfixError(Exception):
    pass


class DomainGapError(SvfixError, ValueError):
    """A point is outside the operator's domain or not covered by any piece."""


class ScenarioError(SvfixError, ValueError):
    """Malformed scenario or operator definition."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer


class HypothesisError(SvfixError):
    """A solver precondition could not be established."""


class NoFixedPointError(SvfixError):
    pass


class SelectionError(SvfixError):
    pass
