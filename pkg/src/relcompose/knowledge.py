"""Dynamic knowledge state: typed object instances plus labeled relation edges.

Knowledge only ever grows. Object similarity — used by the composer to reject
calls that contribute nothing new — is label-preserving isomorphism of weakly
connected components, decided by an exact backtracking check behind an
iterated color-refinement prefilter.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import UnboundParameter, UnknownObject
from .ontology import Ontology
from .services import Request, Service


@dataclass(frozen=True)
class FromRequest:
    param: str

    def __str__(self) -> str:
        return f"request:{self.param}"


@dataclass(frozen=True)
class FromCall:
    call_index: int
    output_param: str

    def __str__(self) -> str:
        return f"call:{self.call_index}.{self.output_param}"


Provenance = FromRequest | FromCall


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    concept: str
    provenance: Provenance


@dataclass(frozen=True, order=True)
class RelationEdge:
    relation: str
    src: int
    dst: int

    def __str__(self) -> str:
        return f"{self.relation} #{self.src} -> #{self.dst}"


class KnowledgeState:
    """Mutable, monotonically growing set of objects and relation edges.

    Owned by a single composer loop; read-only snapshots are safe to share.
    ``version`` bumps on every mutation so derived structures can be cached.
    """

    def __init__(self) -> None:
        self.objects: dict[int, ObjectInstance] = {}
        self.edges: set[RelationEdge] = set()
        self.next_id: int = 0
        self.version: int = 0
        self._adjacency: dict[int, set[int]] = {}
        self._by_concept: dict[str, list[int]] = {}
        self._color_cache: tuple[int, dict[int, int]] | None = None

    def __contains__(self, oid: int) -> bool:
        return oid in self.objects

    def add_object(self, concept: str, provenance: Provenance) -> ObjectInstance:
        obj = ObjectInstance(self.next_id, concept, provenance)
        self._insert(obj)
        return obj

    def add_object_with_id(
        self, oid: int, concept: str, provenance: Provenance
    ) -> ObjectInstance:
        """Insert an object under an externally chosen id (plan replay)."""
        if oid < 0:
            raise UnknownObject(f"object ids must be non-negative, got {oid}")
        if oid in self.objects:
            raise UnknownObject(f"object id #{oid} already exists")
        obj = ObjectInstance(oid, concept, provenance)
        self._insert(obj)
        return obj

    def _insert(self, obj: ObjectInstance) -> None:
        self.objects[obj.id] = obj
        self.next_id = max(self.next_id, obj.id + 1)
        self._adjacency[obj.id] = set()
        self._by_concept.setdefault(obj.concept, []).append(obj.id)
        self.version += 1

    def add_edge(self, edge: RelationEdge) -> bool:
        """Insert an edge; returns True when it was genuinely new."""
        for endpoint in (edge.src, edge.dst):
            if endpoint not in self.objects:
                raise UnknownObject(f"edge {edge} references unknown object #{endpoint}")
        if edge in self.edges:
            return False
        self.edges.add(edge)
        self._adjacency[edge.src].add(edge.dst)
        self._adjacency[edge.dst].add(edge.src)
        self.version += 1
        return True

    def has_edge(self, relation: str, src: int, dst: int) -> bool:
        return RelationEdge(relation, src, dst) in self.edges

    def objects_of_concept(self, concept: str) -> tuple[int, ...]:
        return tuple(self._by_concept.get(concept, ()))

    def copy(self) -> KnowledgeState:
        clone = KnowledgeState()
        clone.objects = dict(self.objects)
        clone.edges = set(self.edges)
        clone.next_id = self.next_id
        clone.version = self.version
        clone._adjacency = {k: set(v) for k, v in self._adjacency.items()}
        clone._by_concept = {k: list(v) for k, v in self._by_concept.items()}
        return clone

    def dump(self) -> str:
        """Deterministic text listing: objects by id, then sorted edges."""
        lines = [
            f"#{obj.id} {obj.concept} ({obj.provenance})"
            for obj in sorted(self.objects.values(), key=lambda o: o.id)
        ]
        lines.extend(str(edge) for edge in sorted(self.edges))
        return "\n".join(lines)


def init_from_request(
    ontology: Ontology, request: Request
) -> tuple[KnowledgeState, dict[str, int]]:
    """Populate a fresh state with one object per provided parameter and one
    edge per provided relation; returns the parameter-to-object binding."""
    state = KnowledgeState()
    binding: dict[str, int] = {}
    for p in request.provided:
        binding[p.name] = state.add_object(p.concept, FromRequest(p.name)).id
    for atom in request.provided_relations:
        state.add_edge(RelationEdge(atom.relation, binding[atom.src], binding[atom.dst]))
    return state, binding


def apply_call_effects(
    state: KnowledgeState,
    service: Service,
    binding: dict[str, int],
    call_index: int,
) -> tuple[list[ObjectInstance], list[RelationEdge]]:
    """Execute a call: fresh object per output, one edge per effect atom.

    Output objects carry the declared output concept; supertype generalization
    stays a match-time concern. Returns the objects and the genuinely new
    edges (set semantics deduplicates repeats).
    """
    env = dict(binding)
    for p in service.inputs:
        if p.name not in env:
            raise UnboundParameter(
                f"call to {service.name!r}: input {p.name!r} is unbound"
            )
        if env[p.name] not in state.objects:
            raise UnknownObject(
                f"call to {service.name!r}: input {p.name!r} is bound to "
                f"unknown object #{env[p.name]}"
            )
    new_objects: list[ObjectInstance] = []
    for p in service.outputs:
        obj = state.add_object(p.concept, FromCall(call_index, p.name))
        env[p.name] = obj.id
        new_objects.append(obj)
    new_edges: list[RelationEdge] = []
    for atom in service.effects:
        for endpoint in (atom.src, atom.dst):
            if endpoint not in env:
                raise UnboundParameter(
                    f"call to {service.name!r}: effect {atom} endpoint "
                    f"{endpoint!r} is unbound"
                )
        edge = RelationEdge(atom.relation, env[atom.src], env[atom.dst])
        if state.add_edge(edge):
            new_edges.append(edge)
    return new_objects, new_edges


@dataclass(frozen=True)
class Component:
    """Induced subgraph of one weakly connected component."""

    nodes: tuple[int, ...]
    edges: tuple[RelationEdge, ...]


def connected_component(state: KnowledgeState, oid: int) -> Component:
    """Weakly connected component of ``oid`` (direction ignored for reach)."""
    if oid not in state.objects:
        raise UnknownObject(f"unknown object #{oid}")
    seen = {oid}
    frontier = [oid]
    while frontier:
        node = frontier.pop()
        for neighbor in state._adjacency[node]:
            if neighbor not in seen:
                seen.add(neighbor)
                frontier.append(neighbor)
    edges = tuple(
        sorted(e for e in state.edges if e.src in seen and e.dst in seen)
    )
    return Component(tuple(sorted(seen)), edges)


def refine_colors(state: KnowledgeState) -> dict[int, int]:
    """Iterated color refinement over the whole state graph.

    Initial colors come from concept labels; each round a node's color absorbs
    the sorted multisets of (relation, neighbor color) over its out- and
    in-edges. Colors are re-ranked by sorted signature each round, which keeps
    them independent of object ids, so isomorphic placements get equal colors.
    """
    cached = state._color_cache
    if cached is not None and cached[0] == state.version:
        return cached[1]

    ids = sorted(state.objects)
    concept_rank = {c: i for i, c in enumerate(sorted({o.concept for o in state.objects.values()}))}
    colors = {oid: concept_rank[state.objects[oid].concept] for oid in ids}

    out_nb: dict[int, list[tuple[str, int]]] = {oid: [] for oid in ids}
    in_nb: dict[int, list[tuple[str, int]]] = {oid: [] for oid in ids}
    for e in state.edges:
        out_nb[e.src].append((e.relation, e.dst))
        in_nb[e.dst].append((e.relation, e.src))

    classes = len(set(colors.values()))
    for _ in range(len(ids)):
        signatures = {
            oid: (
                colors[oid],
                tuple(sorted((rel, colors[nb]) for rel, nb in out_nb[oid])),
                tuple(sorted((rel, colors[nb]) for rel, nb in in_nb[oid])),
            )
            for oid in ids
        }
        ranks = {sig: i for i, sig in enumerate(sorted(set(signatures.values())))}
        colors = {oid: ranks[signatures[oid]] for oid in ids}
        new_classes = len(set(colors.values()))
        if new_classes == classes:
            break
        classes = new_classes

    state._color_cache = (state.version, colors)
    return colors


def similarity_signature(state: KnowledgeState, oid: int) -> tuple:
    """Hashable invariant with: objects_similar(a, b) implies equal signatures."""
    if oid not in state.objects:
        raise UnknownObject(f"unknown object #{oid}")
    colors = refine_colors(state)
    component = connected_component(state, oid)
    return (colors[oid], tuple(sorted(colors[n] for n in component.nodes)))


def objects_similar(state: KnowledgeState, a: int, b: int) -> bool:
    """True iff some isomorphism between the two components maps ``a`` to ``b``.

    Node labels must agree exactly (concept equality) and edges must agree in
    relation name and direction.
    """
    for oid in (a, b):
        if oid not in state.objects:
            raise UnknownObject(f"unknown object #{oid}")
    if a == b:
        return True
    if state.objects[a].concept != state.objects[b].concept:
        return False

    comp_a = connected_component(state, a)
    comp_b = connected_component(state, b)
    if len(comp_a.nodes) != len(comp_b.nodes) or len(comp_a.edges) != len(comp_b.edges):
        return False
    if Counter(e.relation for e in comp_a.edges) != Counter(e.relation for e in comp_b.edges):
        return False

    colors = refine_colors(state)
    if colors[a] != colors[b]:
        return False
    if sorted(colors[n] for n in comp_a.nodes) != sorted(colors[n] for n in comp_b.nodes):
        return False

    return _rooted_isomorphism(state, comp_a, comp_b, a, b, colors)


def _rooted_isomorphism(
    state: KnowledgeState,
    comp_a: Component,
    comp_b: Component,
    a: int,
    b: int,
    colors: dict[int, int],
) -> bool:
    out_a: dict[int, list[tuple[str, int]]] = {n: [] for n in comp_a.nodes}
    in_a: dict[int, list[tuple[str, int]]] = {n: [] for n in comp_a.nodes}
    for e in comp_a.edges:
        out_a[e.src].append((e.relation, e.dst))
        in_a[e.dst].append((e.relation, e.src))
    edges_b = set(comp_b.edges)

    # BFS order from the root keeps every later node attached to a mapped one.
    order = [a]
    seen = {a}
    queue = [a]
    while queue:
        node = queue.pop(0)
        for neighbor in sorted(state._adjacency[node]):
            if neighbor in seen or neighbor not in out_a:
                continue
            seen.add(neighbor)
            order.append(neighbor)
            queue.append(neighbor)

    by_color: dict[int, list[int]] = {}
    for n in comp_b.nodes:
        by_color.setdefault(colors[n], []).append(n)

    mapping = {a: b}
    used = {b}

    def consistent(v: int, u: int) -> bool:
        for rel, w in out_a[v]:
            if w in mapping and RelationEdge(rel, u, mapping[w]) not in edges_b:
                return False
        for rel, w in in_a[v]:
            if w in mapping and RelationEdge(rel, mapping[w], u) not in edges_b:
                return False
        return True

    if not consistent(a, b):
        return False

    def place(i: int) -> bool:
        if i == len(order):
            return True
        v = order[i]
        for u in by_color.get(colors[v], ()):
            if u in used or not consistent(v, u):
                continue
            mapping[v] = u
            used.add(u)
            if place(i + 1):
                return True
            del mapping[v]
            used.remove(u)
        return False

    # Equal edge counts plus injective forward preservation make the final
    # mapping a full isomorphism; no reverse sweep needed.
    return place(1)
