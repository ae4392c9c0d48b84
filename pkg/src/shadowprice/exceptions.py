"""Exception types raised across the package."""


class ShadowPriceError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ShadowPriceError, ValueError):
    """A point lies outside the domain where the objective (or its derivatives) is defined."""


class InfeasibleError(ShadowPriceError):
    """No feasible point could be found for the requested (possibly perturbed) problem."""


class RankDeficiencyError(ShadowPriceError, ValueError):
    """The constraint gradient matrix does not have full column rank."""


class ConvergenceError(ShadowPriceError):
    """Newton iteration stopped before reaching the gradient tolerance.

    The best iterate is kept on the exception so callers can inspect it.
    """

    def __init__(self, message, *, decision=None, objective=None, grad_inf=None, iterations=None):
        super().__init__(message)
        self.decision = decision
        self.objective = objective
        self.grad_inf = grad_inf
        self.iterations = iterations

    def to_dict(self):
        d = self.decision
        return {
            "error": "convergence",
            "message": str(self),
            "mu": None if d is None else d.mu,
            "s": None if d is None else d.s,
            "objective": self.objective,
            "grad_inf": self.grad_inf,
            "iterations": self.iterations,
        }
