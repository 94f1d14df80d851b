"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class HotentError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class DomainError(HotentError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(HotentError, ValueError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class IntegrationError(HotentError, ArithmeticError):
    """The ODE integrator could not reach the requested accuracy."""

    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (t={time:.6g})")
        self.time = time


class CausticError(HotentError, ArithmeticError):
    """Boundary-value construction is singular because f1(t) vanishes."""

    def __init__(self, t_final, value=None):
        msg = f"caustic at t_final={t_final:.12g}: f1(t_final) vanishes"
        if value is not None:
            msg += f" (f1={value:.3e})"
        super().__init__(msg)
        self.t_final = t_final


class KernelAccuracyError(HotentError, ArithmeticError):
    """Quadrature and series evaluations of the noise kernel disagree."""


class DivergenceError(HotentError, ArithmeticError):
    """Covariance exceeded the overflow guard."""

    def __init__(self, message, period_index=None):
        super().__init__(message)
        self.period_index = period_index


class OracleMismatch(HotentError):
    exit_code = 4
