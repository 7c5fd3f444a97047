"""Exception hierarchy shared across the engine."""


class CoxoError(Exception):
    """Base class for all engine errors."""


# -- Coxeter realizations -------------------------------------------------

class NonInvolution(CoxoError):
    """A generator matrix does not square to the identity."""


class WrongBraidOrder(CoxoError):
    """The product of two generator matrices has the wrong order."""


class RootMismatch(CoxoError):
    """A root functional is inconsistent with the fixed hyperplane."""


class NotInInterval(CoxoError):
    """An element is outside the enumerated Bruhat interval."""


class NotReducedWord(CoxoError):
    """A word does not have minimal length for the element it spells."""


# -- Polynomial / linear algebra -------------------------------------------

class DimensionMismatch(CoxoError):
    """Operands live over different variable counts or vector sizes."""


class NotDivisible(CoxoError):
    """Exact division by a linear form failed."""


class ZeroDivisor(CoxoError):
    """Division by the zero form was requested."""


class InhomogeneousInput(CoxoError):
    """A degree-sliced computation received mixed-degree data."""


class NotClosedUnderAction(CoxoError):
    """Degree slices are not closed under multiplication by linear forms."""


class NotInSpan(CoxoError):
    """Membership solve failed: the target is outside the span."""


# -- Section modules --------------------------------------------------------

class NotSeparating(CoxoError):
    """The chosen functional does not separate the vertex set."""


class DegreeCapExhausted(CoxoError):
    """A degree-capped computation did not saturate; raise the cap."""


class IncompatibleVertexSet(CoxoError):
    """Vertex set cannot support the requested induction."""


# -- Finite algebra ---------------------------------------------------------

class NonAssociative(CoxoError):
    """Structure constants fail associativity; degree caps are suspect."""


class GradingAssertFailed(CoxoError):
    """The algebra's degree-zero part is larger than the idempotent span."""


class RadicalNotNilpotent(CoxoError):
    """The candidate radical failed the nilpotency check."""


class ResolutionTooShort(CoxoError):
    """A projective resolution was truncated before homology stabilized."""


class RouteMismatch(CoxoError):
    """Two independent constructions of the same functor disagree."""
