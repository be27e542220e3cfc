"""Discrete-time execution of robot actions over the scene.

One driver advances the simulator tick by tick; each tick processes the
current action, emitting events and mutating the scene.  Graph sync runs
inline so after every emitted event the knowledge graph agrees with the
scene (same instance set, same containment).  Movement is straight-line
with a fixed step length; an action's target counts as reached within the
reach radius.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

from ..errors import SimulationError, UnknownId
from ..kg.graph import KnowledgeGraph
from .scene import AGENT_ID, SceneState, distance
from .sync import sync_stm

logger = logging.getLogger(__name__)

REACH_RADIUS = 0.5
STEP_LENGTH = 0.25


class ActionKind(str, Enum):
    WALK_TO = "walk_to"
    GRAB = "grab"
    PUT = "put"
    OPEN = "open"
    CLOSE = "close"
    SWITCH_ON = "switch_on"
    SWITCH_OFF = "switch_off"
    LOOK_AT = "look_at"
    WALK_FORWARD = "walk_forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    TOUCH = "touch"


@dataclass
class AgentAction:
    kind: ActionKind
    target: str | None = None   # instance the action is directed at
    object: str | None = None   # carried/grabbed object (put)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "target": self.target, "object": self.object}


class EventKind(str, Enum):
    ACTION_STARTED = "action_started"
    ACTION_COMPLETED = "action_completed"
    ACTION_FAILED = "action_failed"
    POSITION_UPDATE = "position_update"
    STATE_CHANGED = "state_changed"
    HIGHLIGHT = "highlight"
    ALARM = "alarm"


@dataclass
class SimEvent:
    seq: int
    kind: EventKind
    payload: dict
    ts: float = field(default_factory=time.time)

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind.value,
                "payload": self.payload, "ts": self.ts}


VERB_PLANS = {
    "go": lambda t, d: [AgentAction(ActionKind.WALK_TO, target=t)],
    "bring": lambda t, d: [
        AgentAction(ActionKind.WALK_TO, target=t),
        AgentAction(ActionKind.GRAB, target=t),
        AgentAction(ActionKind.WALK_TO, target=d),
        AgentAction(ActionKind.PUT, target=d, object=t),
    ],
    "grab": lambda t, d: [AgentAction(ActionKind.GRAB, target=t)],
    "put": lambda t, d: [AgentAction(ActionKind.PUT, target=d, object=t)],
    "open": lambda t, d: [AgentAction(ActionKind.OPEN, target=t)],
    "close": lambda t, d: [AgentAction(ActionKind.CLOSE, target=t)],
    "switch on": lambda t, d: [AgentAction(ActionKind.SWITCH_ON, target=t)],
    "switch off": lambda t, d: [AgentAction(ActionKind.SWITCH_OFF, target=t)],
    "look at": lambda t, d: [AgentAction(ActionKind.LOOK_AT, target=t)],
}


def execute_command(verb: str, target: str, dest: str | None = None) -> list[AgentAction]:
    """Expand a resolved chat command into its action plan.  Compound verbs
    (bring, go) expand to several atomic actions; the rest map one to one.
    Failures surface at step time, not here."""
    plan = VERB_PLANS.get(verb)
    if plan is None:
        raise SimulationError(f"unknown command verb {verb!r}", verb=verb)
    return plan(target, dest)


class Simulator:
    def __init__(self, scene: SceneState, graph: KnowledgeGraph,
                 reach: float = REACH_RADIUS, step_length: float = STEP_LENGTH,
                 seq_source: Callable[[], int] | None = None):
        self.scene = scene
        self.graph = graph
        self.reach = reach
        self.step_length = step_length
        self._queue: deque[AgentAction] = deque()
        self._current: AgentAction | None = None
        self._seq = 0
        self._seq_source = seq_source

    # ------------------------------------------------------------------

    def _next_seq(self) -> int:
        if self._seq_source is not None:
            return self._seq_source()
        self._seq += 1
        return self._seq

    def _event(self, kind: EventKind, **payload) -> SimEvent:
        return SimEvent(seq=self._next_seq(), kind=kind, payload=payload)

    @property
    def busy(self) -> bool:
        return self._current is not None or bool(self._queue)

    def enqueue(self, actions: Iterable[AgentAction]) -> None:
        self._queue.extend(actions)

    def set_highlights(self, instance_ids: Iterable[str]) -> None:
        self.scene.highlights = set(instance_ids)

    # ------------------------------------------------------------------

    def tick(self) -> list[SimEvent]:
        """Advance one step; a completed/failed action k always precedes the
        start of action k+1 (the next action begins on a later tick)."""
        events: list[SimEvent] = []
        if self._current is None:
            if not self._queue:
                return events
            self._current = self._queue.popleft()
            events.append(self._event(EventKind.ACTION_STARTED,
                                      action=self._current.to_json()))
        action = self._current
        handler = getattr(self, f"_do_{action.kind.value}")
        done, step_events = handler(action)
        events.extend(step_events)
        if done:
            self._current = None
        return events

    def step(self, action: AgentAction) -> list[SimEvent]:
        """Run a single action to completion (only valid when idle)."""
        if self.busy:
            raise SimulationError("simulator is busy", action=action.to_json())
        self.enqueue([action])
        return self.run_until_idle()

    def run_until_idle(self, max_ticks: int = 100_000) -> list[SimEvent]:
        events: list[SimEvent] = []
        for _ in range(max_ticks):
            if not self.busy:
                return events
            events.extend(self.tick())
        raise SimulationError("simulation did not settle", max_ticks=max_ticks)

    # ------------------------------------------------------------------
    # per-action handlers: return (done, events)
    # ------------------------------------------------------------------

    def _fail(self, action: AgentAction, code: str, reason: str):
        logger.debug("action failed: %s (%s)", code, reason)
        return True, [self._event(EventKind.ACTION_FAILED,
                                  action=action.to_json(), code=code, reason=reason)]

    def _complete(self, action: AgentAction, extra: list[SimEvent] | None = None):
        events = list(extra or ())
        events.append(self._event(EventKind.ACTION_COMPLETED, action=action.to_json()))
        return True, events

    def _target_pos(self, target: str) -> tuple[float, float] | None:
        try:
            return self.scene.position_of(target)
        except KeyError:
            return None

    def _within_reach(self, target: str) -> bool:
        room = self.scene.room_by_instance(target)
        if room is not None:
            return room.contains(self.scene.agent.pos)
        pos = self._target_pos(target)
        return pos is not None and distance(self.scene.agent.pos, pos) <= self.reach

    def _position_update(self) -> SimEvent:
        return self._event(EventKind.POSITION_UPDATE, target=AGENT_ID,
                           pos=list(self.scene.agent.pos),
                           heading=self.scene.agent.heading)

    def _state_changed(self, object_id: str) -> SimEvent:
        obj = self.scene.objects[object_id]
        pos = self.scene.agent.pos if obj.container == AGENT_ID else obj.pos
        event = self._event(
            EventKind.STATE_CHANGED, instance=object_id,
            container=obj.container, rel=obj.rel,
            states=sorted(obj.states), pos=list(pos))
        return event

    def _sync(self, event: SimEvent) -> list[SimEvent]:
        """Mirror a state change into the graph; a rejected sync raises an
        alarm instead of silently diverging."""
        try:
            sync_stm(self.graph, event)
        except UnknownId as exc:
            return [event, self._event(EventKind.ALARM, code=exc.code,
                                       reason=exc.message)]
        return [event]

    def _agent_room_sync(self) -> list[SimEvent]:
        """Keep the agent instance contained in the room it stands in."""
        room = self.scene.room_at(self.scene.agent.pos)
        if room is None:
            return []
        edge = self.graph.container_edge(AGENT_ID)
        if edge is not None and edge.dst == room.instance_id:
            return []
        self.graph.move_instance(AGENT_ID, room.instance_id, "in")
        self.graph.set_position(AGENT_ID, self.scene.agent.pos)
        return []

    def _do_walk_to(self, action: AgentAction):
        target = action.target
        goal = self._target_pos(target) if target else None
        if goal is None:
            return self._fail(action, "UNKNOWN_TARGET", f"no such instance {target!r}")
        if self.scene.room_at(goal) is None:
            return self._fail(action, "UNREACHABLE",
                              f"target {target!r} lies outside all rooms")
        agent = self.scene.agent
        dist = distance(agent.pos, goal)
        if dist <= self.reach:
            return self._complete(action)
        step = min(self.step_length, dist - self.reach * 0.5)
        dx, dy = goal[0] - agent.pos[0], goal[1] - agent.pos[1]
        agent.heading = math.atan2(dy, dx)
        agent.pos = (agent.pos[0] + dx / dist * step, agent.pos[1] + dy / dist * step)
        events = [self._position_update()]
        self._agent_room_sync()
        if distance(agent.pos, goal) <= self.reach:
            done, more = self._complete(action)
            return done, events + more
        return False, events

    def _do_grab(self, action: AgentAction):
        target = action.target
        obj = self.scene.objects.get(target)
        if obj is None:
            return self._fail(action, "UNKNOWN_TARGET", f"no such object {target!r}")
        if not obj.graspable:
            return self._fail(action, "NOT_GRASPABLE",
                              f"{target} is not graspable")
        if self.scene.agent.held is not None:
            return self._fail(action, "HANDS_FULL",
                              f"already holding {self.scene.agent.held}")
        if not self._within_reach(target):
            return self._fail(action, "OUT_OF_REACH", f"{target} is too far away")
        obj.container = AGENT_ID
        obj.rel = "in"
        obj.pos = self.scene.agent.pos
        self.scene.agent.held = target
        events = self._sync(self._state_changed(target))
        return self._complete(action, events)

    def _do_put(self, action: AgentAction):
        obj_id, target = action.object, action.target
        if self.scene.agent.held != obj_id:
            return self._fail(action, "NOT_HOLDING", f"not holding {obj_id!r}")
        room = self.scene.room_by_instance(target)
        dest_obj = self.scene.objects.get(target)
        if room is None and dest_obj is None:
            return self._fail(action, "UNKNOWN_TARGET", f"no such target {target!r}")
        if not self._within_reach(target):
            return self._fail(action, "OUT_OF_REACH", f"{target} is too far away")
        obj = self.scene.objects[obj_id]
        if room is not None:
            obj.container = room.instance_id
            obj.rel = "in"
            obj.pos = self.scene.agent.pos
        else:
            obj.container = target
            obj.rel = dest_obj.put_rel
            obj.pos = dest_obj.pos
        self.scene.agent.held = None
        events = self._sync(self._state_changed(obj_id))
        return self._complete(action, events)

    def _toggle_state(self, action: AgentAction, tag: str, add: bool):
        target = action.target
        obj = self.scene.objects.get(target)
        if obj is None:
            return self._fail(action, "UNKNOWN_TARGET", f"no such object {target!r}")
        if not self._within_reach(target):
            return self._fail(action, "OUT_OF_REACH", f"{target} is too far away")
        changed = (tag not in obj.states) if add else (tag in obj.states)
        events: list[SimEvent] = []
        if changed:
            if add:
                obj.states.add(tag)
            else:
                obj.states.discard(tag)
            events = self._sync(self._state_changed(target))
        return self._complete(action, events)

    def _do_open(self, action):
        return self._toggle_state(action, "open", add=True)

    def _do_close(self, action):
        return self._toggle_state(action, "open", add=False)

    def _do_switch_on(self, action):
        return self._toggle_state(action, "on", add=True)

    def _do_switch_off(self, action):
        return self._toggle_state(action, "on", add=False)

    def _do_look_at(self, action: AgentAction):
        target = action.target
        pos = self._target_pos(target) if target else None
        if pos is None:
            return self._fail(action, "UNKNOWN_TARGET", f"no such instance {target!r}")
        agent = self.scene.agent
        agent.heading = math.atan2(pos[1] - agent.pos[1], pos[0] - agent.pos[0])
        events = [self._event(EventKind.HIGHLIGHT, instances=[target], source="look_at"),
                  self._position_update()]
        return self._complete(action, events)

    def _do_walk_forward(self, action: AgentAction):
        agent = self.scene.agent
        nxt = (agent.pos[0] + math.cos(agent.heading) * self.step_length,
               agent.pos[1] + math.sin(agent.heading) * self.step_length)
        if self.scene.room_at(nxt) is None:
            return self._fail(action, "UNREACHABLE", "next step leaves all rooms")
        agent.pos = nxt
        events = [self._position_update()]
        self._agent_room_sync()
        return self._complete(action, events)

    def _do_turn_left(self, action: AgentAction):
        self.scene.agent.heading += math.pi / 2
        return self._complete(action, [self._position_update()])

    def _do_turn_right(self, action: AgentAction):
        self.scene.agent.heading -= math.pi / 2
        return self._complete(action, [self._position_update()])

    def _do_touch(self, action: AgentAction):
        if action.target and not self._within_reach(action.target):
            return self._fail(action, "OUT_OF_REACH", f"{action.target} is too far away")
        return self._complete(action)
