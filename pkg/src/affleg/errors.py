"""Exception hierarchy shared by every module."""


class AffLegError(Exception):
    """Base class for all errors raised by affleg."""


class DomainError(AffLegError):
    """A point or vector does not lie on (or tangent to) the model manifold."""


class ContractError(AffLegError):
    """An input violates an operation's precondition."""


class NotAffineLegendrian(AffLegError):
    """The frame e_1..e_n, phi e_1..phi e_n, xi fails to be a basis.

    Carries the offending node index and the smallest singular value found.
    """

    def __init__(self, node, min_singular_value, message=None):
        self.node = node
        self.min_singular_value = float(min_singular_value)
        if message is None:
            message = (
                f"not affine Legendrian at node {node}: "
                f"min singular value {self.min_singular_value:.3e}"
            )
        super().__init__(message)


class OrientationError(AffLegError):
    """The volume determinant under the root defining rho_phi is negative."""


class DegeneracyError(AffLegError):
    """rho_phi is too small for projector-based quantities to be meaningful."""

    def __init__(self, node, rho, message=None):
        self.node = node
        self.rho = float(rho)
        super().__init__(message or f"rho_phi = {self.rho:.3e} at node {node}")


class ResolutionError(AffLegError):
    """Grid too coarse to follow a phase continuously."""


class ConvergenceError(AffLegError):
    """An iterative solver failed to converge."""
