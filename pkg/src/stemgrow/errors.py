"""Exception types shared across the simulation modules."""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SimulationError):
    """Config document could not be parsed."""


class ValidationError(SimulationError):
    """Config or state failed a structural check; message names the field."""


class InitialPenetration(ValidationError):
    """Seed curve starts inside an obstacle."""


class InitialBreakdown(ValidationError):
    """Seed curve already sits in the rigid-jam configuration."""


class GridMismatch(SimulationError):
    """Two fields were combined that live on different arclength grids."""


class AgeNegative(SimulationError):
    """Growth law queried at s > t (material younger than the current time)."""


class NoNearbyBoundary(SimulationError):
    """Normal query at a point farther from every surface than the band width."""


class DegenerateGradient(SimulationError):
    """Normal query at a point where the distance gradient vanishes."""


class PenetrationExceeded(SimulationError):
    """A node sits deeper inside an obstacle than the tolerance allows."""

    def __init__(self, node: int, depth: float, limit: float):
        self.node = node
        self.depth = depth
        self.limit = limit
        super().__init__(
            f"node {node} penetrates by {depth:.3e} (limit {limit:.3e})"
        )


class EmptyContactSet(SimulationError):
    """Constraint assembly or solve invoked with no contacts."""


class TooManyContacts(SimulationError):
    """Enumeration oracle asked to handle more contacts than it enumerates."""


class InfeasibleReaction(SimulationError):
    """No admissible reaction satisfies the contact constraints (jam-adjacent)."""


class MaxIterationsExceeded(SimulationError):
    """Multiplier iteration failed to reach tolerance within the sweep budget."""

    def __init__(self, residual: float, tol: float, sweeps: int):
        self.residual = residual
        self.tol = tol
        self.sweeps = sweeps
        super().__init__(
            f"residual {residual:.3e} after {sweeps} sweeps (tol {tol:.3e})"
        )


class NoCandidateFeasible(SimulationError):
    """Enumeration oracle found no active set with a feasible solution."""


class AntipodalAmbiguity(SimulationError):
    """Minimal rotation requested between opposite unit vectors."""


class NonPositiveDistance(SimulationError):
    """Growth-rate certificate fed a distance that is zero or negative."""
