"""Node and edge types of the knowledge graph.

ID conventions (opaque strings, unique within a graph, never reused):

* concepts  ``c_*``   abstract knowledge, grouping synonym lemmas
* instances ``i_*``   grounded short-term-memory objects from the scene
* edges     ``e_*``   typed links, soft-deletable
* states    ``s_*``   virtual nodes for flat state tags ("yellow", "open")

The prefixes are a convention of the shipped files, not enforced; what is
enforced is that the three ID spaces never collide within one graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class EdgeKind(str, Enum):
    IS_A = "is_a"                    # child concept -> parent concept
    ACTION_PATTERN = "action_pattern"  # concept -> action concept, with role
    INSTANCE_OF = "instance_of"      # instance -> concept
    IN = "in"                        # instance -> containing instance
    ON = "on"                        # instance -> supporting instance
    HAS_STATE = "has_state"          # instance -> state tag node


#: Edge kinds that represent curated knowledge and may be soft-deleted
#: through the repair API.  The remaining kinds mirror simulator ground
#: truth and are maintained exclusively by the STM sync path.
DELETABLE_KINDS = frozenset({EdgeKind.IS_A, EdgeKind.ACTION_PATTERN})

#: Containment kinds; "in" and "on" are reasoned over identically.
CONTAINMENT_KINDS = frozenset({EdgeKind.IN, EdgeKind.ON})

PATTERN_ROLES = ("object", "location", "tool")


def state_node_id(tag: str) -> str:
    return f"s_{tag}"


@dataclass
class ConceptNode:
    id: str
    lemmas: list[str]  # non-empty; lemmas[0] is the display lemma

    @property
    def display(self) -> str:
        return self.lemmas[0]


@dataclass
class InstanceNode:
    """Assembled view of a grounded object; the authoritative container,
    concept and state data live on edges."""

    id: str
    concept: str | None
    states: set[str]
    container: str | None
    rel: str | None  # "in" or "on" w.r.t. container
    position: tuple[float, float]


@dataclass
class Edge:
    id: str
    kind: EdgeKind
    src: str
    dst: str
    role: str | None = None   # action-pattern role
    note: str | None = None   # free-form annotation from the file
    deleted: bool = False


@dataclass
class DeletionReceipt:
    edge_id: str
    timestamp: str
    undo_token: str


@dataclass
class FragmentNode:
    id: str
    label: str
    node_class: str  # utterance | parameter | concept | instance_result | function


@dataclass
class FragmentEdge:
    id: str
    kind: str
    src: str
    dst: str
    role: str | None = None
    synthetic: bool = False  # argument wiring, not a graph edge


@dataclass
class Path:
    """One justification: an edge walk from an anchor node to an output."""

    output: str
    anchor: str
    filter: str  # object | action | state | location | count
    edges: list[str] = field(default_factory=list)


@dataclass
class GraphFragment:
    """Self-contained excerpt of the graph: every edge endpoint is a node."""

    nodes: list[FragmentNode] = field(default_factory=list)
    edges: list[FragmentEdge] = field(default_factory=list)
    paths: list[Path] = field(default_factory=list)

    def node_ids(self) -> set[str]:
        return {n.id for n in self.nodes}

    def add_node(self, node: FragmentNode) -> None:
        if node.id not in self.node_ids():
            self.nodes.append(node)

    def add_edge(self, edge: FragmentEdge) -> None:
        if all(e.id != edge.id for e in self.edges):
            self.edges.append(edge)

    def sort(self) -> None:
        self.nodes.sort(key=lambda n: n.id)
        self.edges.sort(key=lambda e: e.id)
        self.paths.sort(key=lambda p: (p.output, p.filter, p.anchor))

    def to_json(self) -> dict:
        self.sort()
        return {
            "nodes": [
                {"id": n.id, "label": n.label, "node_class": n.node_class}
                for n in self.nodes
            ],
            "edges": [
                {
                    "id": e.id,
                    "kind": e.kind,
                    "src": e.src,
                    "dst": e.dst,
                    **({"role": e.role} if e.role else {}),
                    **({"synthetic": True} if e.synthetic else {}),
                }
                for e in self.edges
            ],
            "paths": [
                {
                    "output": p.output,
                    "anchor": p.anchor,
                    "filter": p.filter,
                    "edges": list(p.edges),
                }
                for p in self.paths
            ],
        }


def normalize_lemma(text: str) -> str:
    """Lowercase + whitespace trim; no stemming (that is the parser's job)."""
    return " ".join(text.lower().split())
