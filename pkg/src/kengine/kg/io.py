"""Knowledge file persistence.

File schema (UTF-8 JSON):
  concepts:        [{id, lemmas[], parents[]}]
  action_patterns: [{id, action, role, concept, note?}]

The canonical save form sorts keys and orders both lists by id, so a
load/save round trip is byte-stable.  Soft-deleted edges are dropped on
save: a deletion persists by omission.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import InvariantViolation, LoadError, UnknownId
from .graph import KnowledgeGraph
from .model import EdgeKind


def _parse_json(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LoadError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            path=str(path), line=exc.lineno, column=exc.colno,
        ) from exc
    if not isinstance(data, dict):
        raise LoadError(f"{path}: top level must be an object", path=str(path))
    return data


def _require(record: dict, field: str, where: str, path: Path):
    if field not in record:
        raise LoadError(
            f"{path}: {where} is missing required field {field!r}",
            path=str(path), field=field, where=where,
        )
    return record[field]


def load_knowledge(path: str | Path) -> tuple[KnowledgeGraph, dict]:
    """Build a graph from a knowledge file.  Any invariant violation
    (cycle, dangling endpoint, duplicate id) aborts the load."""
    path = Path(path)
    if not path.exists():
        raise LoadError(f"knowledge file not found: {path}", path=str(path))
    data = _parse_json(path)

    graph = KnowledgeGraph()
    parents: list[tuple[str, str]] = []
    for idx, record in enumerate(data.get("concepts", [])):
        where = f"concepts[{idx}]"
        cid = _require(record, "id", where, path)
        lemmas = _require(record, "lemmas", where, path)
        try:
            graph.add_concept(cid, lemmas)
        except InvariantViolation as exc:
            raise LoadError(f"{path}: {where}: {exc.message}", path=str(path)) from exc
        declared = record.get("parents", [])
        if len(set(declared)) != len(declared):
            raise LoadError(
                f"{path}: {where}: duplicate parent entries", path=str(path))
        for parent in declared:
            parents.append((cid, parent))

    for child, parent in parents:
        try:
            graph.add_is_a(child, parent)
        except (UnknownId, InvariantViolation) as exc:
            raise LoadError(
                f"{path}: is-a edge {child!r} -> {parent!r}: {exc.message}",
                path=str(path), child=child, parent=parent,
            ) from exc

    for idx, record in enumerate(data.get("action_patterns", [])):
        where = f"action_patterns[{idx}]"
        eid = _require(record, "id", where, path)
        action = _require(record, "action", where, path)
        role = _require(record, "role", where, path)
        concept = _require(record, "concept", where, path)
        try:
            graph.add_action_pattern(action, role, concept, edge_id=eid,
                                     note=record.get("note"))
        except (UnknownId, InvariantViolation) as exc:
            raise LoadError(f"{path}: {where}: {exc.message}", path=str(path)) from exc

    problems = graph.validate()
    if problems:
        raise LoadError(f"{path}: " + "; ".join(problems),
                        path=str(path), problems=problems)
    counts = {
        "concepts": len(graph.concept_ids()),
        "edges": sum(1 for _ in graph.edges()),
    }
    return graph, counts


def canonical_knowledge(graph: KnowledgeGraph) -> str:
    concepts = []
    for cid in graph.concept_ids():
        node = graph.concept(cid)
        live_parents = sorted(
            e.dst for e in graph.live_edges_from(cid, EdgeKind.IS_A))
        concepts.append({"id": cid, "lemmas": list(node.lemmas),
                         "parents": live_parents})
    patterns = []
    for edge in graph.edges():
        if edge.kind != EdgeKind.ACTION_PATTERN:
            continue
        record = {"id": edge.id, "action": edge.dst, "role": edge.role,
                  "concept": edge.src}
        if edge.note:
            record["note"] = edge.note
        patterns.append(record)
    patterns.sort(key=lambda r: r["id"])
    data = {"concepts": concepts, "action_patterns": patterns}
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def save_knowledge(graph: KnowledgeGraph, path: str | Path) -> None:
    Path(path).write_text(canonical_knowledge(graph), encoding="utf-8")
