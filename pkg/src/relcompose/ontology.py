"""Static semantic world: concepts, subtype hierarchy, relation definitions, rules.

The ontology is immutable once built and safe to share across workers.
Relation properties (transitivity, symmetry) are not special-cased anywhere
else in the package: they compile into ordinary inference rules via
:func:`property_rules`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    CycleInSubtypeGraph,
    DuplicateName,
    EmptyRuleEffects,
    UndeclaredRuleParameter,
    UnknownConcept,
    UnknownRelationInRule,
    ValidationError,
)


@dataclass(frozen=True, order=True)
class RelationAtom:
    """One ``relation(src, dst)`` literal over local parameter names."""

    relation: str
    src: str
    dst: str

    def __str__(self) -> str:
        return f"{self.relation}({self.src}, {self.dst})"


def canonical_atoms(atoms: Iterable[RelationAtom]) -> tuple[RelationAtom, ...]:
    """Deduplicate and sort atoms so equal sets compare and serialize equally."""
    return tuple(sorted(set(atoms)))


@dataclass(frozen=True)
class RelationDef:
    """A named binary relation; flags mark the optional closure properties."""

    name: str
    transitive: bool = False
    symmetric: bool = False


@dataclass(frozen=True)
class InferenceRule:
    """Cost-free implication: when the preconditions hold over some objects
    bound to the (untyped, rule-local) parameters, the effect edges are added."""

    name: str
    parameters: tuple[str, ...]
    preconditions: tuple[RelationAtom, ...]
    effects: tuple[RelationAtom, ...]

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "preconditions", canonical_atoms(self.preconditions))
        object.__setattr__(self, "effects", canonical_atoms(self.effects))


@dataclass(frozen=True)
class Ontology:
    """Concepts + subtype DAG + relation definitions + inference rules.

    ``supertypes(c)`` exposes the reflexive-transitive closure of the declared
    subtype edges; it always contains ``c`` itself.
    """

    concepts: tuple[str, ...]
    subtype_edges: tuple[tuple[str, str], ...]
    relations: tuple[RelationDef, ...]
    rules: tuple[InferenceRule, ...]
    _closure: dict[str, frozenset[str]] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )
    _relation_index: dict[str, RelationDef] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self):
        closure = _reflexive_transitive_closure(self.concepts, self.subtype_edges)
        object.__setattr__(self, "_closure", closure)
        object.__setattr__(
            self, "_relation_index", {r.name: r for r in self.relations}
        )

    def has_concept(self, name: str) -> bool:
        return name in self._closure

    def has_relation(self, name: str) -> bool:
        return name in self._relation_index

    def relation(self, name: str) -> RelationDef:
        return self._relation_index[name]

    def supertypes(self, concept: str) -> frozenset[str]:
        """All concepts ``g`` with ``concept subtypeOf g``, including itself."""
        try:
            return self._closure[concept]
        except KeyError:
            raise UnknownConcept(f"concept {concept!r} is not declared") from None

    def is_subtype(self, sub: str, super_: str) -> bool:
        """True iff ``(sub, super_)`` is in the reflexive-transitive closure."""
        if super_ not in self._closure:
            raise UnknownConcept(f"concept {super_!r} is not declared")
        return super_ in self.supertypes(sub)


def _reflexive_transitive_closure(
    concepts: Sequence[str], edges: Iterable[tuple[str, str]]
) -> dict[str, frozenset[str]]:
    direct: dict[str, set[str]] = {c: set() for c in concepts}
    for sub, sup in edges:
        direct[sub].add(sup)
    closure: dict[str, frozenset[str]] = {}
    for c in concepts:
        seen = {c}
        frontier = [c]
        while frontier:
            node = frontier.pop()
            for sup in direct[node]:
                if sup not in seen:
                    seen.add(sup)
                    frontier.append(sup)
        closure[c] = frozenset(seen)
    return closure


def _check_acyclic(concepts: Sequence[str], edges: Sequence[tuple[str, str]]) -> None:
    adjacency: dict[str, list[str]] = {c: [] for c in concepts}
    for sub, sup in edges:
        if sub == sup:
            raise CycleInSubtypeGraph(
                f"declared self-loop on concept {sub!r} (reflexivity is closure-only)"
            )
        adjacency[sub].append(sup)
    # iterative three-color DFS
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {c: WHITE for c in concepts}
    for start in concepts:
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        color[start] = GRAY
        while stack:
            node, i = stack[-1]
            if i < len(adjacency[node]):
                stack[-1] = (node, i + 1)
                nxt = adjacency[node][i]
                if color[nxt] == GRAY:
                    raise CycleInSubtypeGraph(
                        f"subtype edges contain a cycle through {nxt!r}"
                    )
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, 0))
            else:
                color[node] = BLACK
                stack.pop()


def _unique(names: Iterable[str], kind: str) -> None:
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise DuplicateName(f"duplicate {kind} name {name!r}")
        seen.add(name)


def validate_rule(rule: InferenceRule, relation_names: set[str]) -> None:
    """Check a rule against the declared relations; raises on violation."""
    if not rule.name:
        raise ValidationError("rule name must be non-empty")
    _unique(rule.parameters, f"parameter in rule {rule.name!r}")
    if not rule.effects:
        raise EmptyRuleEffects(f"rule {rule.name!r} declares no effects")
    params = set(rule.parameters)
    for atom in rule.preconditions + rule.effects:
        if atom.relation not in relation_names:
            raise UnknownRelationInRule(
                f"rule {rule.name!r} uses undeclared relation {atom.relation!r}"
            )
        for endpoint in (atom.src, atom.dst):
            if endpoint not in params:
                raise UndeclaredRuleParameter(
                    f"rule {rule.name!r} atom {atom} mentions undeclared parameter {endpoint!r}"
                )


def build_ontology(
    concepts: Iterable[str],
    subtype_edges: Iterable[tuple[str, str]] = (),
    relations: Iterable[RelationDef] = (),
    rules: Iterable[InferenceRule] = (),
) -> Ontology:
    """Validate the declarations and return an ontology with its closure computed.

    Raises: DuplicateName, UnknownConcept, CycleInSubtypeGraph,
    UnknownRelationInRule, UndeclaredRuleParameter, EmptyRuleEffects.
    """
    concepts = tuple(concepts)
    relations = tuple(relations)
    rules = tuple(rules)

    for c in concepts:
        if not c or not isinstance(c, str):
            raise ValidationError(f"concept name must be a non-empty string, got {c!r}")
    _unique(concepts, "concept")
    declared = set(concepts)

    deduped: list[tuple[str, str]] = []
    seen_edges: set[tuple[str, str]] = set()
    for sub, sup in subtype_edges:
        for endpoint in (sub, sup):
            if endpoint not in declared:
                raise UnknownConcept(
                    f"subtype edge ({sub!r}, {sup!r}) references undeclared concept {endpoint!r}"
                )
        if (sub, sup) not in seen_edges:
            seen_edges.add((sub, sup))
            deduped.append((sub, sup))
    _check_acyclic(concepts, deduped)

    for r in relations:
        if not r.name:
            raise ValidationError("relation name must be non-empty")
    _unique((r.name for r in relations), "relation")
    relation_names = {r.name for r in relations}

    _unique((r.name for r in rules), "rule")
    for rule in rules:
        validate_rule(rule, relation_names)

    return Ontology(concepts, tuple(deduped), relations, rules)


def property_rules(relation: RelationDef) -> list[InferenceRule]:
    """Compile a relation's property flags into equivalent inference rules."""
    rules: list[InferenceRule] = []
    r = relation.name
    if relation.symmetric:
        rules.append(
            InferenceRule(
                name=f"{r}_symmetric",
                parameters=("X", "Y"),
                preconditions=(RelationAtom(r, "X", "Y"),),
                effects=(RelationAtom(r, "Y", "X"),),
            )
        )
    if relation.transitive:
        rules.append(
            InferenceRule(
                name=f"{r}_transitive",
                parameters=("X", "Y", "Z"),
                preconditions=(RelationAtom(r, "X", "Y"), RelationAtom(r, "Y", "Z")),
                effects=(RelationAtom(r, "X", "Z"),),
            )
        )
    return rules
