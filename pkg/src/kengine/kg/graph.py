"""In-memory knowledge graph: concepts, hierarchy, action patterns and
grounded STM instances, with soft-deletable knowledge edges.

All read operations see only live (non-deleted) edges, so a tombstoned
edge is indistinguishable from one that never existed.  Ground-truth
edges (instance-of, containment, state) are maintained by the simulator
sync path and are replaced physically rather than tombstoned.
"""

from __future__ import annotations

import secrets
from collections import deque
from datetime import datetime, timezone
from typing import Iterable, Iterator

from ..errors import (
    EdgeAlreadyDeleted,
    EdgeNotDeleted,
    EdgeProtected,
    InvariantViolation,
    UnknownEdge,
    UnknownId,
)
from .model import (
    CONTAINMENT_KINDS,
    DELETABLE_KINDS,
    PATTERN_ROLES,
    ConceptNode,
    DeletionReceipt,
    Edge,
    EdgeKind,
    FragmentEdge,
    FragmentNode,
    GraphFragment,
    InstanceNode,
    normalize_lemma,
    state_node_id,
)


class KnowledgeGraph:
    def __init__(self):
        self._concepts: dict[str, ConceptNode] = {}
        self._positions: dict[str, tuple[float, float]] = {}  # instance -> pos
        self._edges: dict[str, Edge] = {}
        self._out: dict[str, set[str]] = {}
        self._in: dict[str, set[str]] = {}
        self._lemma_index: dict[str, set[str]] = {}
        self._counters: dict[str, int] = {}  # id-generation counters, never reset

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def add_concept(self, concept_id: str, lemmas: Iterable[str]) -> ConceptNode:
        if concept_id in self._concepts or concept_id in self._positions:
            raise InvariantViolation(f"duplicate node id {concept_id!r}", id=concept_id)
        clean = [normalize_lemma(l) for l in lemmas]
        clean = [l for l in clean if l]
        if not clean:
            raise InvariantViolation(f"concept {concept_id!r} has no lemmas", id=concept_id)
        node = ConceptNode(id=concept_id, lemmas=clean)
        self._concepts[concept_id] = node
        for lemma in clean:
            self._lemma_index.setdefault(lemma, set()).add(concept_id)
        return node

    def _register_edge(self, edge: Edge) -> Edge:
        if edge.id in self._edges or edge.id in self._concepts or edge.id in self._positions:
            raise InvariantViolation(f"duplicate edge id {edge.id!r}", id=edge.id)
        self._edges[edge.id] = edge
        self._out.setdefault(edge.src, set()).add(edge.id)
        self._in.setdefault(edge.dst, set()).add(edge.id)
        return edge

    def _drop_edge(self, edge_id: str) -> None:
        """Physical removal; only the STM sync path uses this."""
        edge = self._edges.pop(edge_id)
        self._out[edge.src].discard(edge_id)
        self._in[edge.dst].discard(edge_id)

    def _next_id(self, stem: str) -> str:
        n = self._counters.get(stem, 0)
        self._counters[stem] = n + 1
        return f"{stem}__{n}" if n else stem

    def add_is_a(self, child: str, parent: str, edge_id: str | None = None) -> Edge:
        self._require_concept(child)
        self._require_concept(parent)
        if parent in self.descendants_of(child):
            raise InvariantViolation(
                f"is-a edge {child!r} -> {parent!r} would create a cycle",
                child=child, parent=parent,
            )
        eid = edge_id or self._next_id(f"e_isa_{child}__{parent}")
        return self._register_edge(Edge(id=eid, kind=EdgeKind.IS_A, src=child, dst=parent))

    def add_action_pattern(
        self, action: str, role: str, concept: str,
        edge_id: str | None = None, note: str | None = None,
    ) -> Edge:
        self._require_concept(action)
        self._require_concept(concept)
        if role not in PATTERN_ROLES:
            raise InvariantViolation(f"unknown pattern role {role!r}", role=role)
        eid = edge_id or self._next_id(f"e_ap_{action}__{role}__{concept}")
        return self._register_edge(
            Edge(id=eid, kind=EdgeKind.ACTION_PATTERN, src=concept, dst=action,
                 role=role, note=note)
        )

    def add_instance(
        self, instance_id: str, concept: str,
        position: tuple[float, float],
        states: Iterable[str] = (),
        container: str | None = None,
        rel: str = "in",
    ) -> InstanceNode:
        if instance_id in self._positions or instance_id in self._concepts:
            raise InvariantViolation(f"duplicate node id {instance_id!r}", id=instance_id)
        self._require_concept(concept)
        if container is not None and container not in self._positions:
            raise UnknownId(f"container {container!r} does not exist", id=container)
        self._positions[instance_id] = (float(position[0]), float(position[1]))
        self._register_edge(
            Edge(id=f"e_io_{instance_id}", kind=EdgeKind.INSTANCE_OF,
                 src=instance_id, dst=concept)
        )
        for tag in states:
            self._add_state_edge(instance_id, tag)
        if container is not None:
            self._add_containment_edge(instance_id, container, rel)
        return self.get_instance(instance_id)

    def _add_state_edge(self, instance_id: str, tag: str) -> Edge:
        eid = self._next_id(f"e_st_{instance_id}__{tag}")
        return self._register_edge(
            Edge(id=eid, kind=EdgeKind.HAS_STATE, src=instance_id,
                 dst=state_node_id(tag))
        )

    def _add_containment_edge(self, instance_id: str, container: str, rel: str) -> Edge:
        kind = EdgeKind.IN if rel == "in" else EdgeKind.ON
        eid = self._next_id(f"e_ct_{instance_id}")
        return self._register_edge(
            Edge(id=eid, kind=kind, src=instance_id, dst=container)
        )

    # ------------------------------------------------------------------
    # lookups
    # ------------------------------------------------------------------

    def _require_concept(self, concept_id: str) -> ConceptNode:
        node = self._concepts.get(concept_id)
        if node is None:
            raise UnknownId(f"unknown concept {concept_id!r}", id=concept_id)
        return node

    def has_concept(self, node_id: str) -> bool:
        return node_id in self._concepts

    def has_instance(self, node_id: str) -> bool:
        return node_id in self._positions

    def has_node(self, node_id: str) -> bool:
        if node_id in self._concepts or node_id in self._positions:
            return True
        # state nodes exist as long as some edge references them
        return node_id.startswith("s_") and bool(self._in.get(node_id))

    def concept(self, concept_id: str) -> ConceptNode:
        return self._require_concept(concept_id)

    def concept_ids(self) -> list[str]:
        return sorted(self._concepts)

    def instance_ids(self) -> list[str]:
        return sorted(self._positions)

    def edge(self, edge_id: str) -> Edge:
        edge = self._edges.get(edge_id)
        if edge is None:
            raise UnknownEdge(f"unknown edge {edge_id!r}", id=edge_id)
        return edge

    def edges(self, include_deleted: bool = False) -> Iterator[Edge]:
        for eid in sorted(self._edges):
            edge = self._edges[eid]
            if include_deleted or not edge.deleted:
                yield edge

    def live_edges_from(self, node_id: str, kind: EdgeKind | None = None) -> list[Edge]:
        out = []
        for eid in self._out.get(node_id, ()):
            edge = self._edges[eid]
            if not edge.deleted and (kind is None or edge.kind == kind):
                out.append(edge)
        out.sort(key=lambda e: e.id)
        return out

    def live_edges_to(self, node_id: str, kind: EdgeKind | None = None) -> list[Edge]:
        out = []
        for eid in self._in.get(node_id, ()):
            edge = self._edges[eid]
            if not edge.deleted and (kind is None or edge.kind == kind):
                out.append(edge)
        out.sort(key=lambda e: e.id)
        return out

    def resolve_lemma(self, lemma: str) -> set[str]:
        """All concepts carrying the normalized lemma; empty set if none."""
        return set(self._lemma_index.get(normalize_lemma(lemma), ()))

    def display_lemma(self, node_id: str) -> str:
        """Human label for any node: a concept's first lemma, an instance's
        concept lemma, a state node's bare tag."""
        if node_id in self._concepts:
            return self._concepts[node_id].display
        if node_id in self._positions:
            pair = self.concept_of(node_id)
            return self._concepts[pair[0]].display if pair else node_id
        if node_id.startswith("s_"):
            return node_id[2:]
        return node_id

    # ------------------------------------------------------------------
    # hierarchy and patterns
    # ------------------------------------------------------------------

    def descendants_of(self, concept_id: str) -> set[str]:
        """Reflexive-transitive closure over live is-a edges, child direction."""
        self._require_concept(concept_id)
        seen = {concept_id}
        queue = deque([concept_id])
        while queue:
            cur = queue.popleft()
            for edge in self.live_edges_to(cur, EdgeKind.IS_A):
                if edge.src not in seen:
                    seen.add(edge.src)
                    queue.append(edge.src)
        return seen

    def ancestors_of(self, concept_id: str) -> set[str]:
        """Reflexive-transitive closure over live is-a edges, parent direction."""
        self._require_concept(concept_id)
        seen = {concept_id}
        queue = deque([concept_id])
        while queue:
            cur = queue.popleft()
            for edge in self.live_edges_from(cur, EdgeKind.IS_A):
                if edge.dst not in seen:
                    seen.add(edge.dst)
                    queue.append(edge.dst)
        return seen

    def patterns_for_action(self, action: str, role: str) -> set[tuple[str, str]]:
        """Concepts usable in `role` for `action`, each with its edge ID."""
        self._require_concept(action)
        return {
            (e.src, e.id)
            for e in self.live_edges_to(action, EdgeKind.ACTION_PATTERN)
            if e.role == role
        }

    def patterns_on_concept(self, concept: str, role: str) -> set[tuple[str, str]]:
        """Actions this concept can serve in `role`, each with its edge ID."""
        self._require_concept(concept)
        return {
            (e.dst, e.id)
            for e in self.live_edges_from(concept, EdgeKind.ACTION_PATTERN)
            if e.role == role
        }

    # ------------------------------------------------------------------
    # instances
    # ------------------------------------------------------------------

    def concept_of(self, instance_id: str) -> tuple[str, str] | None:
        """(concept id, edge id) of the live instance-of edge, if any."""
        edges = self.live_edges_from(instance_id, EdgeKind.INSTANCE_OF)
        if not edges:
            return None
        return edges[0].dst, edges[0].id

    def states_of(self, instance_id: str) -> dict[str, str]:
        """tag -> edge id for every live state edge of the instance."""
        return {
            e.dst[2:]: e.id
            for e in self.live_edges_from(instance_id, EdgeKind.HAS_STATE)
        }

    def container_edge(self, instance_id: str) -> Edge | None:
        for kind in CONTAINMENT_KINDS:
            edges = self.live_edges_from(instance_id, kind)
            if edges:
                return edges[0]
        return None

    def containment_chain(self, instance_id: str) -> list[tuple[str, str]]:
        """[(container id, edge id), ...] from the direct container up to and
        including the chain's top (a room, i.e. a container-less instance)."""
        if instance_id not in self._positions:
            raise UnknownId(f"unknown instance {instance_id!r}", id=instance_id)
        chain: list[tuple[str, str]] = []
        seen = {instance_id}
        cur = instance_id
        while True:
            edge = self.container_edge(cur)
            if edge is None:
                return chain
            if edge.dst in seen:
                raise InvariantViolation(
                    f"containment cycle at {edge.dst!r}", id=edge.dst)
            chain.append((edge.dst, edge.id))
            seen.add(edge.dst)
            cur = edge.dst

    def get_instance(self, instance_id: str) -> InstanceNode:
        if instance_id not in self._positions:
            raise UnknownId(f"unknown instance {instance_id!r}", id=instance_id)
        pair = self.concept_of(instance_id)
        edge = self.container_edge(instance_id)
        return InstanceNode(
            id=instance_id,
            concept=pair[0] if pair else None,
            states=set(self.states_of(instance_id)),
            container=edge.dst if edge else None,
            rel=edge.kind.value if edge else None,
            position=self._positions[instance_id],
        )

    def instances_of_concepts(self, concept_ids: set[str]) -> list[str]:
        out = []
        for iid in self._positions:
            pair = self.concept_of(iid)
            if pair and pair[0] in concept_ids:
                out.append(iid)
        return sorted(out)

    def position_of(self, instance_id: str) -> tuple[float, float]:
        return self._positions[instance_id]

    # --- STM sync mutations (physical, not tombstoned) -----------------

    def move_instance(self, instance_id: str, container: str, rel: str) -> bool:
        """Retarget the containment edge of an existing instance.  Returns
        False for a no-op move.  The instance set never changes here, which
        is what rules out duplicated objects after a position change."""
        if instance_id not in self._positions:
            raise UnknownId(f"unknown instance {instance_id!r}", id=instance_id)
        if container not in self._positions:
            raise UnknownId(f"unknown container {container!r}", id=container)
        old = self.container_edge(instance_id)
        new_kind = EdgeKind.IN if rel == "in" else EdgeKind.ON
        if old is not None and old.dst == container and old.kind == new_kind:
            return False
        if old is not None:
            self._drop_edge(old.id)
        self._add_containment_edge(instance_id, container, rel)
        # reject cycles introduced by the move
        try:
            self.containment_chain(instance_id)
        except InvariantViolation:
            self._drop_edge(self.container_edge(instance_id).id)
            if old is not None:
                self._register_edge(Edge(id=old.id, kind=old.kind,
                                         src=old.src, dst=old.dst))
            raise
        return True

    def set_states(self, instance_id: str, tags: Iterable[str]) -> bool:
        if instance_id not in self._positions:
            raise UnknownId(f"unknown instance {instance_id!r}", id=instance_id)
        want = set(tags)
        have = self.states_of(instance_id)
        changed = False
        for tag, eid in have.items():
            if tag not in want:
                self._drop_edge(eid)
                changed = True
        for tag in want:
            if tag not in have:
                self._add_state_edge(instance_id, tag)
                changed = True
        return changed

    def set_position(self, instance_id: str, position: tuple[float, float]) -> None:
        if instance_id not in self._positions:
            raise UnknownId(f"unknown instance {instance_id!r}", id=instance_id)
        self._positions[instance_id] = (float(position[0]), float(position[1]))

    # ------------------------------------------------------------------
    # soft delete / restore
    # ------------------------------------------------------------------

    def delete_edge(self, edge_id: str) -> DeletionReceipt:
        edge = self.edge(edge_id)
        if edge.deleted:
            raise EdgeAlreadyDeleted(f"edge {edge_id!r} is already deleted", id=edge_id)
        if edge.kind not in DELETABLE_KINDS:
            raise EdgeProtected(
                f"edge {edge_id!r} ({edge.kind.value}) mirrors simulator ground "
                "truth and cannot be deleted", id=edge_id, kind=edge.kind.value,
            )
        edge.deleted = True
        return DeletionReceipt(
            edge_id=edge_id,
            timestamp=datetime.now(timezone.utc).isoformat(),
            undo_token=f"undo-{edge_id}-{secrets.token_hex(4)}",
        )

    def restore_edge(self, edge_id: str) -> None:
        edge = self.edge(edge_id)
        if not edge.deleted:
            raise EdgeNotDeleted(f"edge {edge_id!r} is not deleted", id=edge_id)
        edge.deleted = False

    # ------------------------------------------------------------------
    # fragments
    # ------------------------------------------------------------------

    def node_class(self, node_id: str) -> str:
        if node_id in self._positions:
            return "instance_result"
        return "concept"  # concepts and state tags are both abstract knowledge

    def fragment_node(self, node_id: str) -> FragmentNode:
        return FragmentNode(
            id=node_id,
            label=self.display_lemma(node_id),
            node_class=self.node_class(node_id),
        )

    def subgraph(self, node_ids: Iterable[str], depth: int) -> GraphFragment:
        """Nodes plus everything within `depth` live hops; edges are those
        between included nodes (none at depth 0)."""
        seeds = list(node_ids)
        for nid in seeds:
            if not self.has_node(nid):
                raise UnknownId(f"unknown node {nid!r}", id=nid)
        if depth < 0:
            raise InvariantViolation("depth must be >= 0", depth=depth)
        visited = set(seeds)
        frontier = set(seeds)
        for _ in range(depth):
            nxt = set()
            for nid in frontier:
                for edge in self.live_edges_from(nid) + self.live_edges_to(nid):
                    for other in (edge.src, edge.dst):
                        if other not in visited:
                            nxt.add(other)
            visited |= nxt
            frontier = nxt
            if not frontier:
                break
        fragment = GraphFragment()
        for nid in sorted(visited):
            fragment.add_node(self.fragment_node(nid))
        if depth > 0:
            for edge in self.edges():
                if edge.src in visited and edge.dst in visited:
                    fragment.add_edge(FragmentEdge(
                        id=edge.id, kind=edge.kind.value,
                        src=edge.src, dst=edge.dst, role=edge.role,
                    ))
        fragment.sort()
        return fragment

    # ------------------------------------------------------------------
    # integrity
    # ------------------------------------------------------------------

    def validate(self) -> list[str]:
        """Full invariant sweep; returns human-readable violations."""
        problems: list[str] = []
        for cid, node in self._concepts.items():
            if not node.lemmas:
                problems.append(f"concept {cid} has no lemmas")
        for edge in self._edges.values():
            for endpoint, side in ((edge.src, "src"), (edge.dst, "dst")):
                if endpoint.startswith("s_") and edge.kind == EdgeKind.HAS_STATE:
                    continue
                if endpoint not in self._concepts and endpoint not in self._positions:
                    problems.append(
                        f"edge {edge.id} has dangling {side} endpoint {endpoint}")
        # is-a acyclicity via iterative DFS over live edges
        state: dict[str, int] = {}
        for start in self._concepts:
            if state.get(start):
                continue
            stack: list[tuple[str, Iterator[Edge]]] = [
                (start, iter(self.live_edges_from(start, EdgeKind.IS_A)))]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                advanced = False
                for edge in it:
                    mark = state.get(edge.dst, 0)
                    if mark == 1:
                        problems.append(
                            f"is-a cycle through {edge.dst} (edge {edge.id})")
                    elif mark == 0:
                        state[edge.dst] = 1
                        stack.append(
                            (edge.dst, iter(self.live_edges_from(edge.dst, EdgeKind.IS_A))))
                        advanced = True
                        break
                if not advanced:
                    state[node] = 2
                    stack.pop()
        for iid in self._positions:
            io_edges = self.live_edges_from(iid, EdgeKind.INSTANCE_OF)
            if len(io_edges) != 1:
                problems.append(
                    f"instance {iid} has {len(io_edges)} live instance-of edges")
            ct = [e for k in CONTAINMENT_KINDS for e in self.live_edges_from(iid, k)]
            if len(ct) > 1:
                problems.append(f"instance {iid} has {len(ct)} containment edges")
            try:
                self.containment_chain(iid)
            except InvariantViolation as exc:
                problems.append(f"instance {iid}: {exc.message}")
        return problems

    def check(self) -> None:
        problems = self.validate()
        if problems:
            raise InvariantViolation("; ".join(problems), problems=problems)

    # ------------------------------------------------------------------
    # comparison support for round-trip tests
    # ------------------------------------------------------------------

    def live_state(self) -> tuple:
        """Canonical hashable view of everything reasoning can observe."""
        concepts = tuple(
            (cid, tuple(self._concepts[cid].lemmas)) for cid in sorted(self._concepts))
        edges = tuple(
            (e.id, e.kind.value, e.src, e.dst, e.role) for e in self.edges())
        positions = tuple(
            (iid, self._positions[iid]) for iid in sorted(self._positions))
        return concepts, edges, positions
