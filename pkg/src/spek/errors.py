"""Exception hierarchy shared by all engine modules."""


class SpekError(Exception):
    """Base class for every error raised by the checker."""


class NotSubtermConvergent(SpekError):
    """A rewrite rule's right side is not a proper piece of its left side."""


class AmbiguousSymbol(SpekError):
    """Symbol classification clash: a rule head also occurs as plain structure."""


class ArityMismatch(SpekError):
    """A symbol was applied to the wrong number of arguments."""


class UnknownSymbol(SpekError):
    """A term uses a function symbol that was never declared."""


class NonValueGoal(SpekError):
    """A knowledge goal does not normalize to a destructor-free ground term."""


class NotDerivable(SpekError):
    """Proof construction was requested for an unprovable sequent."""


class UnboundCall(SpekError):
    """A process invokes a definition that does not exist or has wrong arity."""


class NotFinite(SpekError):
    """Exploration depth exhausted before the protocol terminated."""


class NonDeterministicProtocol(SpekError):
    """Attacker generation hit branching that never reconverges."""


class LimitExceeded(SpekError):
    """A configured exploration limit (states, depth, messages) was hit."""


class NonValueLabelTerm(SpekError):
    """A transition label carries a term that is not a value."""


class UnresolvedInputInstance(SpekError):
    """A bare input modality guards a formula that needs the received term."""


class ParseError(SpekError):
    """Script syntax error with location information."""

    def __init__(self, message, line, col, expected=None):
        at = f"line {line}, column {col}: {message}"
        if expected:
            at += " (expected " + " or ".join(sorted(expected)) + ")"
        super().__init__(at)
        self.line = line
        self.col = col
        self.expected = frozenset(expected or ())


class ResolutionError(SpekError):
    """A script references an undefined process, property or symbol."""


class CheckError(SpekError):
    """A formula is ill-formed for the process it is checked against."""
