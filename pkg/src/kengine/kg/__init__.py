from .graph import KnowledgeGraph
from .io import canonical_knowledge, load_knowledge, save_knowledge
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
    Path,
    normalize_lemma,
    state_node_id,
)

__all__ = [
    "KnowledgeGraph",
    "canonical_knowledge",
    "load_knowledge",
    "save_knowledge",
    "CONTAINMENT_KINDS",
    "DELETABLE_KINDS",
    "PATTERN_ROLES",
    "ConceptNode",
    "DeletionReceipt",
    "Edge",
    "EdgeKind",
    "FragmentEdge",
    "FragmentNode",
    "GraphFragment",
    "InstanceNode",
    "Path",
    "normalize_lemma",
    "state_node_id",
]
