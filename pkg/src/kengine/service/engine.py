"""The orchestrator behind both the chat service and the CLI.

One engine owns the graph, the scene, the simulator and all sessions.
Every mutation (chat command, knowledge edit, simulator tick) runs under a
single lock, so observers agree on one mutation order and a reply always
reflects everything that happened before it.  The CLI talks to the same
code path as the HTTP service, which keeps the two from drifting apart.
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field

from ..errors import (
    EngineError,
    NoTrace,
    UnknownId,
    UnknownSession,
    UnknownTurn,
)
from ..kg.graph import KnowledgeGraph
from ..nlparse import (
    Ambiguous,
    ClarificationReply,
    Command,
    DialogueState,
    NoMatch,
    Parser,
    Question,
    Unique,
    Unparseable,
    render_clarification,
    resolve_reference,
)
from ..sal import Trace, eval_call_tree
from ..sim import SceneState, Simulator, execute_command, snapshot

logger = logging.getLogger(__name__)


class EventBus:
    """Globally ordered event log with monotonically increasing sequence
    numbers; subscribers resume from any sequence number."""

    def __init__(self):
        self._seq = 0
        self.log: list[dict] = []

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def current_seq(self) -> int:
        return self._seq

    def emit(self, kind: str, payload: dict) -> dict:
        event = {"seq": self.next_seq(), "kind": kind, "payload": payload,
                 "ts": time.time()}
        self.log.append(event)
        return event

    def record(self, event: dict) -> None:
        """Log an event whose seq was already allocated (simulator events)."""
        self.log.append(event)

    def since(self, seq: int) -> list[dict]:
        return [e for e in self.log if e["seq"] > seq]


@dataclass
class Session:
    id: str
    dialogue: DialogueState = field(default_factory=DialogueState)
    turn_ids: list[int] = field(default_factory=list)


@dataclass
class ChatTurn:
    turn_id: int
    session_id: str
    text: str
    kind: str            # answer | command | clarification | error
    reply: str
    payload: dict
    trace: Trace | None = None
    plan: list | None = None
    highlights: list[str] = field(default_factory=list)
    ts: float = field(default_factory=time.time)

    def to_json(self) -> dict:
        data = {
            "turn_id": self.turn_id,
            "session_id": self.session_id,
            "text": self.text,
            "kind": self.kind,
            "reply": self.reply,
            "payload": self.payload,
            "highlights": list(self.highlights),
            "has_trace": self.trace is not None,
            "ts": self.ts,
        }
        if self.plan is not None:
            data["plan"] = [a.to_json() for a in self.plan]
        return data


class Engine:
    def __init__(self, graph: KnowledgeGraph, scene: SceneState,
                 synchronous: bool = True):
        self.graph = graph
        self.scene = scene
        self.bus = EventBus()
        self.sim = Simulator(scene, graph, seq_source=self.bus.next_seq)
        self.parser = Parser.from_graph(graph)
        self.synchronous = synchronous
        self.lock = threading.RLock()
        self.sessions: dict[str, Session] = {}
        self.turns: dict[int, ChatTurn] = {}
        self._turn_counter = itertools.count(1)
        self._instance_baseline = len(graph.instance_ids())

    # ------------------------------------------------------------------
    # sessions and ticks
    # ------------------------------------------------------------------

    def create_session(self) -> Session:
        with self.lock:
            session = Session(id=uuid.uuid4().hex[:12])
            self.sessions[session.id] = session
            return session

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"unknown session {session_id!r}", id=session_id)
        return session

    def tick(self) -> list[dict]:
        """Advance the simulator one step and publish its events."""
        with self.lock:
            events = [e.to_json() for e in self.sim.tick()]
            for event in events:
                self.bus.record(event)
            self._check_conservation()
            return events

    def run_until_idle(self) -> None:
        with self.lock:
            while self.sim.busy:
                self.tick()

    def _check_conservation(self) -> None:
        count = len(self.graph.instance_ids())
        assert count == self._instance_baseline, (
            f"instance count changed: {self._instance_baseline} -> {count}")

    # ------------------------------------------------------------------
    # chat
    # ------------------------------------------------------------------

    def post_chat(self, session_id: str, text: str) -> ChatTurn:
        with self.lock:
            session = self._session(session_id)
            turn_id = next(self._turn_counter)
            try:
                turn = self._handle(session, turn_id, text)
            except EngineError as exc:
                turn = ChatTurn(
                    turn_id=turn_id, session_id=session.id, text=text,
                    kind="error", reply=exc.message, payload=exc.to_payload())
            self.turns[turn.turn_id] = turn
            session.turn_ids.append(turn.turn_id)
            self._publish_turn(turn)
            return turn

    def _handle(self, session: Session, turn_id: int, text: str) -> ChatTurn:
        result = self.parser.parse(text, session.dialogue)

        if isinstance(result, Question):
            session.dialogue.clear()
            return self._answer_question(session, turn_id, text, result)

        if isinstance(result, Command):
            session.dialogue.clear()
            return self._run_command(session, turn_id, text, result, resolved={})

        if isinstance(result, ClarificationReply):
            pending = session.dialogue.pending
            session.dialogue.clear()
            resolved = dict(pending.resolved)
            resolved[pending.slot] = result.instance_id
            return self._run_command(session, turn_id, text, pending.command,
                                     resolved=resolved)

        # Unparseable: while a clarification is pending, re-ask and keep it
        if session.dialogue.pending is not None:
            pending = session.dialogue.pending
            return ChatTurn(
                turn_id=turn_id, session_id=session.id, text=text,
                kind="clarification", reply=pending.question,
                payload={
                    "kind": "clarification",
                    "candidates": [
                        {"instance": c.instance_id, "feature": c.feature}
                        for c in pending.candidates],
                },
                highlights=[c.instance_id for c in pending.candidates])
        reply = "Sorry, I did not understand that."
        if result.hint:
            reply += f" Closest template: {result.hint!r}."
        return ChatTurn(
            turn_id=turn_id, session_id=session.id, text=text,
            kind="error", reply=reply,
            payload={"code": "PARSE_ERROR", "reason": result.reason,
                     "hint": result.hint, "templates": list(result.templates)})

    def _answer_question(self, session: Session, turn_id: int, text: str,
                         question: Question) -> ChatTurn:
        result, trace = eval_call_tree(self.graph, question.tree)
        lemmas = trace.final_lemmas()
        reply = ", ".join(lemmas) if lemmas else "nothing found"
        highlights = [o.id for o in trace.final if self.graph.has_instance(o.id)]
        turn = ChatTurn(
            turn_id=turn_id, session_id=session.id, text=text,
            kind="answer", reply=reply,
            payload={"kind": "answer", "lemmas": lemmas,
                     "ids": trace.final_ids(),
                     "tree": question.tree.to_json()},
            trace=trace, highlights=highlights)
        return turn

    def _run_command(self, session: Session, turn_id: int, text: str,
                     command: Command, resolved: dict[str, str]) -> ChatTurn:
        slots = [("object", command.object)]
        if command.dest is not None:
            slots.append(("dest", command.dest))
        for slot, ref in slots:
            if slot in resolved:
                continue
            resolution = resolve_reference(ref, self.graph)
            if isinstance(resolution, Unique):
                resolved[slot] = resolution.instance_id
            elif isinstance(resolution, NoMatch):
                return ChatTurn(
                    turn_id=turn_id, session_id=session.id, text=text,
                    kind="error", reply=f"I cannot find that: {resolution.reason}",
                    payload={"code": "UNRESOLVED_REFERENCE", "slot": slot,
                             "reason": resolution.reason})
            else:
                question, pending = render_clarification(
                    resolution, command, slot, resolved)
                session.dialogue.pending = pending
                return ChatTurn(
                    turn_id=turn_id, session_id=session.id, text=text,
                    kind="clarification", reply=question,
                    payload={
                        "kind": "clarification", "slot": slot,
                        "candidates": [
                            {"instance": c.instance_id, "feature": c.feature}
                            for c in resolution.candidates],
                    },
                    highlights=[c.instance_id for c in resolution.candidates])
        plan = execute_command(command.verb, resolved["object"],
                               resolved.get("dest"))
        self.sim.enqueue(plan)
        pieces = [command.verb, self.graph.display_lemma(resolved["object"])]
        if "dest" in resolved:
            pieces += ["to", self.graph.display_lemma(resolved["dest"])]
        reply = "ok: " + " ".join(pieces)
        failures: list[str] = []
        if self.synchronous:
            baseline = len(self.bus.log)
            self.run_until_idle()
            failures = [e["payload"]["code"] for e in self.bus.log[baseline:]
                        if e["kind"] == "action_failed"]
            if failures:
                reply += "; failed: " + ", ".join(failures)
        return ChatTurn(
            turn_id=turn_id, session_id=session.id, text=text,
            kind="command", reply=reply,
            payload={"kind": "command", "verb": command.verb,
                     "targets": resolved, "failures": failures},
            plan=plan,
            highlights=sorted(resolved.values()))

    def _publish_turn(self, turn: ChatTurn) -> None:
        self.bus.emit("chat_turn", turn.to_json())
        if turn.highlights:
            self.sim.set_highlights(turn.highlights)
            self.bus.emit("highlight", {"instances": sorted(turn.highlights),
                                        "source": "chat"})
        if turn.trace is not None:
            self.bus.emit("trace_ready", {"turn_id": turn.turn_id})

    # ------------------------------------------------------------------
    # traces, graph inspection, knowledge repair
    # ------------------------------------------------------------------

    def get_turn(self, turn_id: int) -> ChatTurn:
        turn = self.turns.get(turn_id)
        if turn is None:
            raise UnknownTurn(f"unknown turn {turn_id!r}", turn=turn_id)
        return turn

    def get_trace(self, turn_id: int) -> dict:
        turn = self.get_turn(turn_id)
        if turn.trace is None:
            raise NoTrace(f"turn {turn_id} has no trace (kind={turn.kind})",
                          turn=turn_id)
        with self.lock:
            return {"turn_id": turn_id, **turn.trace.to_json()}

    def get_graph_neighborhood(self, node_id: str, depth: int) -> dict:
        with self.lock:
            fragment = self.graph.subgraph({node_id}, depth)
            return {"node": node_id, "depth": depth, **fragment.to_json()}

    def describe_edge(self, edge_id: str) -> dict:
        edge = self.graph.edge(edge_id)
        return {
            "id": edge.id,
            "kind": edge.kind.value,
            "role": edge.role,
            "deleted": edge.deleted,
            "src": {"id": edge.src, "lemma": self.graph.display_lemma(edge.src)},
            "dst": {"id": edge.dst, "lemma": self.graph.display_lemma(edge.dst)},
            "note": edge.note,
        }

    def delete_edge(self, edge_id: str, confirm: bool) -> dict:
        with self.lock:
            description = self.describe_edge(edge_id)
            if not confirm:
                return {"confirmed": False, "challenge": description}
            receipt = self.graph.delete_edge(edge_id)
            self.bus.emit("knowledge_mutation", {
                "op": "delete", "edge": description,
                "undo_token": receipt.undo_token})
            return {"confirmed": True, "edge_id": receipt.edge_id,
                    "timestamp": receipt.timestamp,
                    "undo_token": receipt.undo_token}

    def restore_edge(self, edge_id: str) -> dict:
        with self.lock:
            self.graph.restore_edge(edge_id)
            description = self.describe_edge(edge_id)
            self.bus.emit("knowledge_mutation", {"op": "restore",
                                                 "edge": description})
            return {"restored": True, "edge_id": edge_id}

    # ------------------------------------------------------------------
    # scene
    # ------------------------------------------------------------------

    def scene_snapshot(self) -> dict:
        with self.lock:
            return snapshot(self.scene)

    def snapshot_with_seq(self) -> tuple[dict, int]:
        with self.lock:
            return snapshot(self.scene), self.bus.current_seq()

    def health(self) -> dict:
        with self.lock:
            return {
                "status": "ok",
                "concepts": len(self.graph.concept_ids()),
                "instances": len(self.graph.instance_ids()),
                "sessions": len(self.sessions),
                "turns": len(self.turns),
                "seq": self.bus.current_seq(),
            }
