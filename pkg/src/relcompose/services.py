"""Services, user requests, and the virtual services derived from them.

Inference rules and the request's goal compile into virtual services so the
matcher and the composer operate on one uniform object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    DuplicateName,
    EffectBetweenInputs,
    InputOutputOverlap,
    NoOutputsOrEffects,
    PreconditionMentionsOutput,
    UnknownConcept,
    UnknownParameter,
    UnknownRelation,
    ValidationError,
)
from .ontology import InferenceRule, Ontology, RelationAtom, canonical_atoms


class _AnyMarker:
    """Wildcard concept of rule-derived virtual service parameters."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ANY"


ANY = _AnyMarker()

PLAIN = "plain"
FROM_RULE = "from-rule"
GOAL = "goal"


@dataclass(frozen=True)
class ParameterDecl:
    """Named, typed parameter; the type is ANY only in rule-derived services."""

    name: str
    concept: str | _AnyMarker


@dataclass(frozen=True)
class Service:
    name: str
    inputs: tuple[ParameterDecl, ...]
    outputs: tuple[ParameterDecl, ...]
    preconditions: tuple[RelationAtom, ...]
    effects: tuple[RelationAtom, ...]
    kind: str = PLAIN

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "preconditions", canonical_atoms(self.preconditions))
        object.__setattr__(self, "effects", canonical_atoms(self.effects))

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.outputs)

    @property
    def virtual(self) -> bool:
        return self.kind != PLAIN


@dataclass(frozen=True)
class Request:
    """What the user knows (provided) and what they want produced (wanted)."""

    name: str
    provided: tuple[ParameterDecl, ...]
    provided_relations: tuple[RelationAtom, ...]
    wanted: tuple[ParameterDecl, ...]
    wanted_relations: tuple[RelationAtom, ...]

    def __post_init__(self):
        object.__setattr__(self, "provided", tuple(self.provided))
        object.__setattr__(self, "wanted", tuple(self.wanted))
        object.__setattr__(
            self, "provided_relations", canonical_atoms(self.provided_relations)
        )
        object.__setattr__(
            self, "wanted_relations", canonical_atoms(self.wanted_relations)
        )


@dataclass(frozen=True)
class Repository:
    services: tuple[Service, ...]

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))
        seen: set[str] = set()
        for s in self.services:
            if s.name in seen:
                raise DuplicateName(f"duplicate service name {s.name!r}")
            seen.add(s.name)


def _check_params(
    ontology: Ontology, params: tuple[ParameterDecl, ...], owner: str, allow_any: bool
) -> None:
    seen: set[str] = set()
    for p in params:
        if not p.name:
            raise ValidationError(f"{owner}: parameter name must be non-empty")
        if p.name in seen:
            raise DuplicateName(f"{owner}: duplicate parameter name {p.name!r}")
        seen.add(p.name)
        if p.concept is ANY:
            if not allow_any:
                raise UnknownConcept(
                    f"{owner}: wildcard-typed parameter {p.name!r} is only "
                    "permitted in rule-derived virtual services"
                )
        elif not ontology.has_concept(p.concept):
            raise UnknownConcept(
                f"{owner}: parameter {p.name!r} has undeclared concept {p.concept!r}"
            )


def _check_atoms(
    ontology: Ontology,
    atoms: tuple[RelationAtom, ...],
    scope: set[str],
    owner: str,
    what: str,
) -> None:
    for atom in atoms:
        if not ontology.has_relation(atom.relation):
            raise UnknownRelation(
                f"{owner}: {what} atom {atom} uses undeclared relation {atom.relation!r}"
            )
        for endpoint in (atom.src, atom.dst):
            if endpoint not in scope:
                raise UnknownParameter(
                    f"{owner}: {what} atom {atom} mentions undeclared parameter {endpoint!r}"
                )


def validate_service(ontology: Ontology, service: Service) -> None:
    """Check one service against the ontology; raises on the first violation."""
    owner = f"service {service.name!r}"
    if not service.name:
        raise ValidationError("service name must be non-empty")
    allow_any = service.kind == FROM_RULE
    _check_params(ontology, service.inputs, owner, allow_any)
    _check_params(ontology, service.outputs, owner, allow_any=False)

    in_names = set(service.input_names)
    out_names = set(service.output_names)
    overlap = in_names & out_names
    if overlap:
        raise InputOutputOverlap(
            f"{owner}: parameters {sorted(overlap)} appear as both input and output"
        )

    _check_atoms(ontology, service.preconditions, in_names | out_names, owner, "precondition")
    _check_atoms(ontology, service.effects, in_names | out_names, owner, "effect")

    for atom in service.preconditions:
        if atom.src in out_names or atom.dst in out_names:
            raise PreconditionMentionsOutput(
                f"{owner}: precondition {atom} references an output parameter"
            )
    if service.kind == PLAIN:
        for atom in service.effects:
            if atom.src not in out_names and atom.dst not in out_names:
                raise EffectBetweenInputs(
                    f"{owner}: effect {atom} connects two inputs; such atoms "
                    "belong in the preconditions of a plain service"
                )
        if not service.outputs and not service.effects:
            raise NoOutputsOrEffects(f"{owner}: no outputs and no effects")


def validate_request(ontology: Ontology, request: Request) -> None:
    owner = f"request {request.name!r}"
    _check_params(ontology, request.provided, owner, allow_any=False)
    _check_params(ontology, request.wanted, owner, allow_any=False)
    provided = {p.name for p in request.provided}
    wanted = {p.name for p in request.wanted}
    overlap = provided & wanted
    if overlap:
        raise InputOutputOverlap(
            f"{owner}: parameters {sorted(overlap)} are both provided and wanted"
        )
    _check_atoms(ontology, request.provided_relations, provided, owner, "provided")
    _check_atoms(ontology, request.wanted_relations, provided | wanted, owner, "wanted")


def validate_repository(ontology: Ontology, repository: Repository) -> None:
    for service in repository.services:
        validate_service(ontology, service)


def rule_as_virtual_service(rule: InferenceRule) -> Service:
    """Wrap an inference rule as a zero-output service with wildcard inputs.

    Rule effects connect input parameters, which only virtual services may do.
    """
    return Service(
        name=rule.name,
        inputs=tuple(ParameterDecl(p, ANY) for p in rule.parameters),
        outputs=(),
        preconditions=rule.preconditions,
        effects=rule.effects,
        kind=FROM_RULE,
    )


def request_as_goal_service(request: Request) -> Service:
    """Build the virtual service whose callability means the query is answered.

    Inputs are the wanted parameters plus any provided parameters referenced
    by the wanted relations; the latter are pinned to their original objects
    when the goal query is matched.
    """
    referenced: set[str] = set()
    for atom in request.wanted_relations:
        referenced.add(atom.src)
        referenced.add(atom.dst)
    inputs = list(request.wanted)
    wanted_names = {p.name for p in request.wanted}
    for p in request.provided:
        if p.name in referenced and p.name not in wanted_names:
            inputs.append(p)
    return Service(
        name=f"goal:{request.name}",
        inputs=tuple(inputs),
        outputs=(),
        preconditions=request.wanted_relations,
        effects=(),
        kind=GOAL,
    )


def pinned_goal_params(request: Request) -> tuple[str, ...]:
    """Names of the goal-service inputs that must be pinned to request objects."""
    wanted_names = {p.name for p in request.wanted}
    referenced: set[str] = set()
    for atom in request.wanted_relations:
        referenced.add(atom.src)
        referenced.add(atom.dst)
    return tuple(
        p.name for p in request.provided if p.name in referenced and p.name not in wanted_names
    )
