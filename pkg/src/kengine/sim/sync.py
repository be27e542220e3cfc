"""Mirror simulator state changes into the knowledge graph.

The one rule that matters: a state (position) change updates the edges of
the SAME instance in place.  No instance is ever created here, so an
object that moves can never show up twice.
"""

from __future__ import annotations

from ..errors import UnknownId
from ..kg.graph import KnowledgeGraph


def sync_stm(graph: KnowledgeGraph, event) -> dict:
    """Apply a state-changed event to the graph.

    Replaces the containment edge (old removed, new added), diffs the state
    edges and refreshes the stored position.  Raises UnknownId if the event
    references an instance the graph does not know; the caller turns that
    into an alarm.
    """
    payload = event.payload
    instance = payload.get("instance")
    if not instance or not graph.has_instance(instance):
        raise UnknownId(f"state change for unknown instance {instance!r}",
                        id=instance)
    before = len(graph.instance_ids())
    moved = False
    if payload.get("container"):
        moved = graph.move_instance(instance, payload["container"],
                                    payload.get("rel", "in"))
    states_changed = graph.set_states(instance, payload.get("states", []))
    if payload.get("pos"):
        graph.set_position(instance, tuple(payload["pos"]))
    after = len(graph.instance_ids())
    assert before == after, "instance count changed during sync"
    return {"instance": instance, "moved": moved,
            "states_changed": states_changed,
            "noop": not moved and not states_changed}
