"""Exception types shared across the composition model."""

from __future__ import annotations


class CompositionError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CompositionError):
    """Invalid ontology, service, request, or document content.

    ``path`` locates the offending element when the error surfaces while
    parsing a document (e.g. ``repository.services[2].preconditions[0]``).
    """

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message)
        self.message = message
        self.path = path

    def __str__(self) -> str:
        if self.path:
            return f"{self.path}: {self.message}"
        return self.message


class DuplicateName(ValidationError):
    """A concept, relation, rule, parameter, or service name is declared twice."""


class UnknownConcept(ValidationError):
    """A concept name is used but not declared in the ontology."""


class CycleInSubtypeGraph(ValidationError):
    """The declared subtype edges contain a cycle (self-loops included)."""


class UnknownRelation(ValidationError):
    """A relation name is used but not declared in the ontology."""


class UnknownRelationInRule(UnknownRelation):
    """An inference rule references an undeclared relation."""


class UndeclaredRuleParameter(ValidationError):
    """A rule atom mentions a parameter missing from the rule's parameter list."""


class EmptyRuleEffects(ValidationError):
    """An inference rule declares no effects."""


class UnknownParameter(ValidationError):
    """A service or request atom mentions an undeclared parameter."""


class InputOutputOverlap(ValidationError):
    """A parameter name appears on both the input and the output side."""


class PreconditionMentionsOutput(ValidationError):
    """A precondition atom references an output parameter."""


class EffectBetweenInputs(ValidationError):
    """A plain service declares an effect atom that touches no output parameter."""


class NoOutputsOrEffects(ValidationError):
    """A plain service contributes nothing: no outputs and no effects."""


class UnknownObject(CompositionError):
    """An object id is not present in the knowledge state."""


class UnboundParameter(CompositionError):
    """A binding does not cover a parameter required to execute a call."""


class PinTargetMissing(ValidationError):
    """A pin refers to a parameter that is not an input of the service."""


class LimitExceeded(CompositionError):
    """Enumerating bindings overflowed the configured cap."""


class GuardExceeded(CompositionError):
    """Input exceeds the documented size guard of an exhaustive procedure."""


class DocumentSyntaxError(ValidationError):
    """The instance or plan document is not syntactically well-formed."""
