"""Query-graph against data-graph matching by backtracking.

The query graph comes from a service's inputs and preconditions, the data
graph from the knowledge state. A binding maps every query node to an object
whose label set (all supertypes of its concept) contains the node's concept
label, such that every precondition edge has a same-relation data edge between
the bound endpoints.

Default semantics is the definitional one: an arbitrary function, i.e. labeled
graph homomorphism. ``injective=True`` restores the subgraph-isomorphism
reduction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

from .errors import LimitExceeded, PinTargetMissing, ValidationError
from .knowledge import KnowledgeState, RelationEdge
from .ontology import Ontology
from .services import ANY, Service, _AnyMarker

Binding = dict[str, int]


@dataclass(frozen=True)
class Pin:
    """Node label that matches exactly one object."""

    object_id: int


@dataclass(frozen=True)
class QueryNode:
    name: str
    label: str | _AnyMarker | Pin


@dataclass(frozen=True)
class QueryEdge:
    relation: str
    src: str
    dst: str


@dataclass(frozen=True)
class QueryGraph:
    nodes: tuple[QueryNode, ...]
    edges: tuple[QueryEdge, ...]

    @property
    def node_names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)


@dataclass(frozen=True)
class DataGraph:
    node_ids: tuple[int, ...]
    label_sets: dict[int, frozenset[str]]
    edges: frozenset[RelationEdge]
    by_concept: dict[str, tuple[int, ...]]


class MatchMode(Enum):
    ALL = "all"
    FIRST = "first"


@dataclass(frozen=True)
class MatchConfig:
    injective: bool = False
    mode: MatchMode = MatchMode.ALL
    limit: int | None = None
    prune: bool = True  # toggle for the label/degree heuristics, tests only

    def __post_init__(self):
        if self.limit is not None and self.limit < 1:
            raise ValidationError("match limit must be >= 1 when present")


def build_query_graph(service: Service, pins: Binding | None = None) -> QueryGraph:
    """One node per input parameter, one directed edge per precondition atom.

    ``pins`` (goal services) forces named inputs onto specific objects.
    """
    pins = pins or {}
    input_names = set(service.input_names)
    for name in pins:
        if name not in input_names:
            raise PinTargetMissing(
                f"pin target {name!r} is not an input of service {service.name!r}"
            )
    nodes = []
    for p in service.inputs:
        if p.name in pins:
            label: str | _AnyMarker | Pin = Pin(pins[p.name])
        else:
            label = p.concept
        nodes.append(QueryNode(p.name, label))
    edges = tuple(QueryEdge(a.relation, a.src, a.dst) for a in service.preconditions)
    return QueryGraph(tuple(nodes), edges)


def build_data_graph(ontology: Ontology, state: KnowledgeState) -> DataGraph:
    """Labeled view of the knowledge state; node labels are supertype sets."""
    node_ids = tuple(sorted(state.objects))
    label_sets: dict[int, frozenset[str]] = {}
    by_concept: dict[str, list[int]] = {}
    for oid in node_ids:
        labels = ontology.supertypes(state.objects[oid].concept)
        label_sets[oid] = labels
        for c in labels:
            by_concept.setdefault(c, []).append(oid)
    return DataGraph(
        node_ids=node_ids,
        label_sets=label_sets,
        edges=frozenset(state.edges),
        by_concept={c: tuple(ids) for c, ids in by_concept.items()},
    )


def data_graph_for(ontology: Ontology, state: KnowledgeState) -> DataGraph:
    """Build-or-reuse: caches the data graph on the state until it mutates."""
    cached = getattr(state, "_data_graph_cache", None)
    if cached is not None and cached[0] == state.version and cached[1] is ontology:
        return cached[2]
    graph = build_data_graph(ontology, state)
    state._data_graph_cache = (state.version, ontology, graph)
    return graph


def _candidates(node: QueryNode, data: DataGraph) -> tuple[int, ...]:
    if isinstance(node.label, Pin):
        oid = node.label.object_id
        return (oid,) if oid in data.label_sets else ()
    if node.label is ANY:
        return data.node_ids
    return data.by_concept.get(node.label, ())


def _label_ok(node: QueryNode, oid: int, data: DataGraph) -> bool:
    if isinstance(node.label, Pin):
        return oid == node.label.object_id
    if node.label is ANY:
        return True
    return node.label in data.label_sets[oid]


def _binding_sort_key(query: QueryGraph):
    names = query.node_names

    def key(binding: Binding) -> tuple[int, ...]:
        return tuple(binding[name] for name in names)

    return key


def enumerate_matches(
    query: QueryGraph, data: DataGraph, config: MatchConfig = MatchConfig()
) -> list[Binding]:
    """All bindings satisfying the label and edge conditions, deterministically
    ordered by object ids in query-node declaration order.

    FIRST mode stops at the first binding found by the fixed search strategy.
    Raises LimitExceeded when ALL mode enumerates past ``config.limit``.
    """
    nodes = query.nodes
    if not nodes:
        return [{}]

    index_of = {n.name: i for i, n in enumerate(nodes)}
    degree = [0] * len(nodes)
    for e in query.edges:
        degree[index_of[e.src]] += 1
        degree[index_of[e.dst]] += 1

    candidates = [_candidates(n, data) for n in nodes]
    if config.prune:
        order = sorted(
            range(len(nodes)), key=lambda i: (-degree[i], len(candidates[i]), i)
        )
    else:
        order = list(range(len(nodes)))
        candidates = [data.node_ids for _ in nodes]

    position = {nodes[i].name: pos for pos, i in enumerate(order)}
    # per search position: edges whose other endpoint is already assigned
    checks: list[list[tuple[str, int, bool]]] = [[] for _ in order]
    for e in query.edges:
        sp, dp = position[e.src], position[e.dst]
        if sp == dp:  # self-loop, check when the node is assigned
            checks[sp].append((e.relation, sp, True))
        elif sp > dp:
            checks[sp].append((e.relation, dp, True))  # assigned node is the dst
        else:
            checks[dp].append((e.relation, sp, False))  # assigned node is the src

    edge_set = data.edges
    assigned: list[int] = []
    results: list[Binding] = []
    first_only = config.mode is MatchMode.FIRST
    used_counts: dict[int, int] = {}

    def place(pos: int) -> bool:
        if pos == len(order):
            binding = {nodes[i].name: assigned[position[nodes[i].name]] for i in range(len(nodes))}
            results.append(binding)
            if config.limit is not None and len(results) > config.limit:
                raise LimitExceeded(
                    f"more than {config.limit} bindings for query of {len(nodes)} nodes"
                )
            return first_only
        node = nodes[order[pos]]
        for oid in candidates[order[pos]]:
            if not config.prune and not _label_ok(node, oid, data):
                continue
            if config.injective and used_counts.get(oid):
                continue
            ok = True
            for rel, other_pos, outgoing in checks[pos]:
                other = oid if other_pos == pos else assigned[other_pos]
                edge = (
                    RelationEdge(rel, oid, other)
                    if outgoing
                    else RelationEdge(rel, other, oid)
                )
                if edge not in edge_set:
                    ok = False
                    break
            if not ok:
                continue
            assigned.append(oid)
            used_counts[oid] = used_counts.get(oid, 0) + 1
            done = place(pos + 1)
            assigned.pop()
            used_counts[oid] -= 1
            if done:
                return True
        return False

    place(0)
    if not first_only:
        results.sort(key=_binding_sort_key(query))
    return results


def _weak_components(query: QueryGraph) -> list[QueryGraph]:
    adjacency: dict[str, set[str]] = {n.name: set() for n in query.nodes}
    for e in query.edges:
        adjacency[e.src].add(e.dst)
        adjacency[e.dst].add(e.src)
    seen: set[str] = set()
    components: list[QueryGraph] = []
    for node in query.nodes:
        if node.name in seen:
            continue
        members = {node.name}
        frontier = [node.name]
        while frontier:
            current = frontier.pop()
            for neighbor in adjacency[current]:
                if neighbor not in members:
                    members.add(neighbor)
                    frontier.append(neighbor)
        seen |= members
        components.append(
            QueryGraph(
                nodes=tuple(n for n in query.nodes if n.name in members),
                edges=tuple(e for e in query.edges if e.src in members),
            )
        )
    return components


def split_and_match(
    query: QueryGraph, data: DataGraph, config: MatchConfig = MatchConfig()
) -> list[Binding]:
    """Match each weakly connected component of the query independently.

    Non-injective existence checks succeed iff every component matches; the
    injective variants additionally need a cross-component disjointness pass.
    ALL mode combines per-component result sets by cross product (filtered for
    pairwise disjoint images under injectivity) and equals enumerate_matches.
    """
    components = _weak_components(query)
    if len(components) <= 1:
        return enumerate_matches(query, data, config)

    sub_config = MatchConfig(
        injective=config.injective, mode=MatchMode.ALL, limit=None, prune=config.prune
    )

    if config.mode is MatchMode.FIRST:
        if not config.injective:
            combined: Binding = {}
            for component in components:
                found = enumerate_matches(
                    component, data, MatchConfig(mode=MatchMode.FIRST, prune=config.prune)
                )
                if not found:
                    return []
                combined.update(found[0])
            return [combined]
        per_component = [enumerate_matches(c, data, sub_config) for c in components]
        choice = _disjoint_choice(per_component, 0, {})
        return [choice] if choice is not None else []

    per_component = [enumerate_matches(c, data, sub_config) for c in components]
    results: list[Binding] = []
    for parts in itertools.product(*per_component):
        if config.injective and not _images_disjoint(parts):
            continue
        combined = {}
        for part in parts:
            combined.update(part)
        results.append(combined)
        if config.limit is not None and len(results) > config.limit:
            raise LimitExceeded(
                f"more than {config.limit} combined bindings for split query"
            )
    results.sort(key=_binding_sort_key(query))
    return results


def _images_disjoint(parts: tuple[Binding, ...]) -> bool:
    seen: set[int] = set()
    for part in parts:
        image = set(part.values())
        if seen & image:
            return False
        seen |= image
    return True


def _disjoint_choice(
    per_component: list[list[Binding]], index: int, acc: Binding
) -> Binding | None:
    if index == len(per_component):
        return dict(acc)
    taken = set(acc.values())
    for candidate in per_component[index]:
        if taken & set(candidate.values()):
            continue
        acc.update(candidate)
        found = _disjoint_choice(per_component, index + 1, acc)
        if found is not None:
            return found
        for key in candidate:
            del acc[key]
    return None


def check_binding(
    query: QueryGraph, data: DataGraph, binding: Binding, injective: bool = False
) -> str | None:
    """Direct re-validation of the two matching conditions; None means valid."""
    for node in query.nodes:
        if node.name not in binding:
            return f"binding misses parameter {node.name!r}"
        oid = binding[node.name]
        if oid not in data.label_sets:
            return f"parameter {node.name!r} bound to unknown object #{oid}"
        if not _label_ok(node, oid, data):
            return f"object #{oid} does not satisfy label of parameter {node.name!r}"
    for e in query.edges:
        edge = RelationEdge(e.relation, binding[e.src], binding[e.dst])
        if edge not in data.edges:
            return f"precondition unmatched: {edge}"
    if injective:
        images = [binding[n.name] for n in query.nodes]
        if len(set(images)) != len(images):
            return "binding is not injective"
    return None
