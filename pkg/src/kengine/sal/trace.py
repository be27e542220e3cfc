"""Call records and traces: what was asked, what came out, and the graph
paths that justify every output.

Serialized schema (see docs/trace_schema.md): ``trace_version``, ``calls[]``
in execution order (innermost first), each with ``function``, ``args``,
``outputs[] {id, lemma, node_class}`` and a ``fragment {nodes, edges,
paths}``.  ``node_class`` is one of utterance / parameter / concept /
instance_result / function and drives the UI color legend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..kg.graph import KnowledgeGraph
from ..kg.model import GraphFragment

TRACE_VERSION = 1


@dataclass
class OutputNode:
    id: str
    lemma: str
    node_class: str

    def to_json(self) -> dict:
        return {"id": self.id, "lemma": self.lemma, "node_class": self.node_class}


@dataclass
class ResolvedArg:
    kind: str                 # lemma | id | ids | tag | call
    value: str | None = None
    resolved: list[str] = field(default_factory=list)
    call_index: int | None = None

    def to_json(self) -> dict:
        data: dict = {"kind": self.kind}
        if self.value is not None:
            data["value"] = self.value
        if self.kind != "tag":
            data["resolved"] = sorted(self.resolved)
        if self.call_index is not None:
            data["call_index"] = self.call_index
        return data


@dataclass
class CallRecord:
    function: str
    args: dict[str, ResolvedArg]
    outputs: list[OutputNode]
    fragment: GraphFragment
    embedded: "CallRecord | None" = None  # e.g. the object lookup inside a count
    embeds_index: int | None = None       # position of the embedded record in the trace

    def output_ids(self) -> list[str]:
        return [o.id for o in self.outputs]

    def to_json(self) -> dict:
        data = {
            "function": self.function,
            "args": {slot: arg.to_json() for slot, arg in sorted(self.args.items())},
            "outputs": [o.to_json() for o in self.outputs],
            "fragment": self.fragment.to_json(),
        }
        if self.embeds_index is not None:
            data["embeds"] = {"call_index": self.embeds_index}
        return data


@dataclass
class Trace:
    records: list[CallRecord]
    final: list[OutputNode]

    def final_ids(self) -> list[str]:
        return [o.id for o in self.final]

    def final_lemmas(self) -> list[str]:
        """Deduplicated, sorted display lemmas of the final outputs."""
        return sorted({o.lemma for o in self.final})

    def to_json(self) -> dict:
        return {
            "trace_version": TRACE_VERSION,
            "calls": [r.to_json() for r in self.records],
            "final": [o.to_json() for o in self.final],
        }


def single_call_trace(record: CallRecord) -> Trace:
    """Wrap one record (plus its embedded record, if any) as a full trace."""
    records = []
    if record.embedded is not None:
        records.append(record.embedded)
        record.embeds_index = 0
    records.append(record)
    return Trace(records=records, final=list(record.outputs))


def replay_trace(graph: KnowledgeGraph, trace_json: dict) -> list[str]:
    """Re-walk every highlighted path against the live graph.

    Returns a list of problems; empty means every output of every call is
    still reconstructible from its anchor through existing, non-deleted
    edges of the recorded kinds.
    """
    problems: list[str] = []
    for ci, call in enumerate(trace_json.get("calls", [])):
        fragment = call.get("fragment", {})
        frag_edges = {e["id"]: e for e in fragment.get("edges", [])}
        paths = fragment.get("paths", [])
        covered = {p["output"] for p in paths}
        for out in call.get("outputs", []):
            if out["id"] not in covered:
                problems.append(f"call {ci}: output {out['id']} has no path")
        for pi, path in enumerate(paths):
            where = f"call {ci} path {pi} ({path['output']})"
            cur = path["anchor"]
            ok = True
            for eid in path["edges"]:
                meta = frag_edges.get(eid)
                if meta is None:
                    problems.append(f"{where}: edge {eid} missing from fragment")
                    ok = False
                    break
                if meta.get("synthetic"):
                    problems.append(f"{where}: synthetic edge {eid} in path")
                    ok = False
                    break
                try:
                    edge = graph.edge(eid)
                except Exception:
                    problems.append(f"{where}: edge {eid} not in graph")
                    ok = False
                    break
                if edge.deleted:
                    problems.append(f"{where}: edge {eid} is deleted")
                    ok = False
                    break
                if edge.kind.value != meta.get("kind"):
                    problems.append(f"{where}: edge {eid} kind changed")
                    ok = False
                    break
                if edge.src == cur:
                    cur = edge.dst
                elif edge.dst == cur:
                    cur = edge.src
                else:
                    problems.append(f"{where}: edge {eid} does not touch {cur}")
                    ok = False
                    break
            if ok and cur != path["output"]:
                problems.append(f"{where}: walk ended at {cur}")
    return problems
