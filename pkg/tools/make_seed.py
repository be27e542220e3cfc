#!/usr/bin/env python3
"""Regenerate the packaged seed knowledge file in canonical form."""

from pathlib import Path

from kengine.kg import KnowledgeGraph, canonical_knowledge

CONCEPTS = [
    ("c_something", ["something", "thing"], []),
    ("c_matter", ["matter"], ["c_something"]),
    ("c_substance", ["substance"], ["c_matter"]),
    ("c_food", ["food"], ["c_substance"]),
    ("c_foodstuff", ["foodstuff"], ["c_food"]),
    ("c_juice", ["juice"], ["c_foodstuff"]),
    ("c_water", ["water"], ["c_substance"]),
    ("c_fruit", ["fruit"], ["c_foodstuff"]),
    ("c_banana", ["banana"], ["c_fruit"]),
    ("c_salmon", ["salmon"], ["c_foodstuff"]),
    ("c_furniture", ["furniture"], ["c_something"]),
    ("c_table", ["table"], ["c_furniture"]),
    ("c_dinner_table", ["dinner table", "dining table"], ["c_table"]),
    ("c_fridge", ["fridge", "refrigerator"], ["c_furniture"]),
    ("c_cutlery", ["cutlery"], ["c_something"]),
    ("c_fork", ["fork"], ["c_cutlery"]),
    ("c_key", ["key"], ["c_something"]),
    ("c_room", ["room"], ["c_something"]),
    ("c_kitchen", ["kitchen"], ["c_room"]),
    ("c_living_room", ["living room", "livingroom", "lounge"], ["c_room"]),
    ("c_robot", ["robot", "agent"], ["c_something"]),
    ("c_action", ["action"], ["c_something"]),
    ("c_drink", ["drink"], ["c_action"]),
    ("c_eat", ["eat"], ["c_action"]),
]

PATTERNS = [
    ("e_drink_juice", "c_drink", "object", "c_juice", None),
    ("e_drink_water", "c_drink", "object", "c_water", None),
    ("e_eat_salmon", "c_eat", "object", "c_salmon", None),
    ("e_eat_banana", "c_eat", "object", "c_banana", None),
    ("e_eat_fork", "c_eat", "object", "c_fork", "seeded-error"),
    ("e_eat_fork_tool", "c_eat", "tool", "c_fork", None),
]


def build() -> KnowledgeGraph:
    graph = KnowledgeGraph()
    for cid, lemmas, _ in CONCEPTS:
        graph.add_concept(cid, lemmas)
    for cid, _, parents in CONCEPTS:
        for parent in parents:
            graph.add_is_a(cid, parent)
    for eid, action, role, concept, note in PATTERNS:
        graph.add_action_pattern(action, role, concept, edge_id=eid, note=note)
    graph.check()
    return graph


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "kengine" / "data" / "knowledge.json"
    out.write_text(canonical_knowledge(build()), encoding="utf-8")
    print(f"wrote {out}")
