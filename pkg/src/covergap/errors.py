"""Exception types shared by all covergap modules."""


class CovergapError(Exception):
    """Base class for every error raised by this package."""


class BadParams(CovergapError):
    """Family or configuration parameters violate a precondition."""


class NonStochastic(CovergapError):
    """A transition matrix has a negative entry or a row not summing to 1."""


class Disconnected(CovergapError):
    """The chain's support graph is not strongly connected."""


class NotReversible(CovergapError):
    """Detailed balance fails; spectral symmetrization is invalid."""


class SingularSolve(CovergapError):
    """A linear solve that should succeed for irreducible input failed."""


class NotTransitiveEvidence(CovergapError):
    """A chain flagged transitive fails the hitting-time symmetry check."""


class BoundViolated(CovergapError):
    """A theorem-backed inequality failed.

    The inequalities checked by this package are proved facts about
    reversible chains, so a violation always means an implementation bug
    (or numerical breakdown), never a counterexample.
    """


class RegimeViolation(CovergapError):
    """Inputs fall outside the regime where a bound's derivation applies."""


class DisconnectedComplement(CovergapError):
    """The complement of a target set is not irreducible under the chain."""


class NullConditioning(CovergapError):
    """A conditioning event has (numerically) zero probability."""


class RunawayTrial(CovergapError):
    """A simulated trial ran past its theoretical time cap: a bug."""
