"""Exception hierarchy. The CLI maps each family onto an exit code."""


class PnlabError(Exception):
    exit_code = 2


class InputError(PnlabError, ValueError):
    """Malformed or out-of-domain input (exit code 1)."""

    exit_code = 1


class NumericalError(PnlabError, ArithmeticError):
    """Non-convergence, guardrail or overflow (exit code 2)."""

    exit_code = 2


class EnumerationOverflow(NumericalError):
    pass


class GuardrailExceeded(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class FDInconsistency(NumericalError):
    pass


class Unsupported(InputError):
    pass


class Inconclusive(PnlabError):
    """A decision procedure exhausted its search budget (exit code 3)."""

    exit_code = 3
