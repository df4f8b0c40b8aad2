"""Exception types raised across the package.

Every malformed input is rejected with one of these rather than a bare
ValueError, so callers (and the command line driver) can map failures to
exit codes without string matching.
"""


class PeriwalkError(Exception):
    """Base class for all package errors."""


class GraphError(PeriwalkError):
    """Base class for graph construction and validation failures."""


class DuplicateNode(GraphError):
    """Two node coordinates coincide within the snap tolerance."""


class DuplicateEdge(GraphError):
    """Two edges share an origin and a jump vector.

    Such edges are indistinguishable to the simulator, so the pair is
    rejected instead of being silently merged.
    """


class DanglingEdge(GraphError):
    """An edge's jump does not land on any node modulo the unit cell."""


class SelfEdge(GraphError):
    """An edge with a zero jump vector, which would connect a node to itself."""


class NonPositiveRate(GraphError):
    """An edge rate that is zero, negative, or not finite."""


class NotStronglyConnected(GraphError):
    """The quotient graph fails the mutual reachability requirement."""


class BrokenPath(GraphError):
    """An edge sequence whose consecutive edges do not chain head to tail."""


class SolverError(PeriwalkError):
    """Base class for linear algebra failures."""


class SolveFailed(SolverError):
    """The factorization failed or the residual exceeded its bound."""


class NonPositiveEntry(SolverError):
    """A stationary vector came back with a non-positive component."""


class Inconsistent(SolverError):
    """The right-hand side has a component along the left null space.

    For the corrector and unit-cell systems this is the computational face
    of a nonzero long-run drift: the equations have no solution.
    """


class NotReversible(PeriwalkError):
    """A variational routine was given a graph without symmetric rates.

    The gradient/divergence machinery requires every edge to have a
    reversal carrying the same rate.
    """


class ConditionNotMet(PeriwalkError):
    """Neither hypothesis of the divergence identity holds for the inputs."""


class NotAPermutation(PeriwalkError):
    """A claimed node symmetry is not an involutive permutation of the nodes."""


class DriftNotCentered(PeriwalkError):
    """Mean squared displacement requested on a drifting walk without centering."""


class ReflectionOverflow(PeriwalkError):
    """A single straight step exceeded the reflection budget."""


class DegenerateGrid(PeriwalkError):
    """A time grid unsuitable for slope fitting (too short or duplicated)."""


class InvalidResolution(PeriwalkError):
    """A lattice spacing h that does not divide the unit cell evenly."""


class EmptyGraph(PeriwalkError):
    """A geometry whose obstructions leave no free nodes."""
