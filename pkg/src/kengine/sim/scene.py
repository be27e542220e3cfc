"""Scene model and loading.

Scene file schema (UTF-8 JSON):
  rooms[]   {name, rect: [x0, y0, x1, y1]}
  objects[] {id, concept, container|room, rel?, pos, states[], graspable,
             put_rel?}
  agent     {room, pos}

Loading grounds everything into the knowledge graph: each room, object and
the agent becomes an STM instance with instance-of, containment and state
edges.  The scene keeps the geometric ground truth; the graph mirrors the
relational part of it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import LoadError
from ..kg.graph import KnowledgeGraph

AGENT_ID = "i_agent"
AGENT_LEMMA = "robot"

Rect = tuple[float, float, float, float]


@dataclass
class Room:
    name: str
    rect: Rect
    instance_id: str

    def contains(self, pos: tuple[float, float]) -> bool:
        x, y = pos
        x0, y0, x1, y1 = self.rect
        return x0 <= x <= x1 and y0 <= y <= y1

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.rect
        return ((x0 + x1) / 2, (y0 + y1) / 2)


@dataclass
class SceneObject:
    id: str
    concept: str            # resolved concept id
    lemma: str              # concept lemma as written in the file
    pos: tuple[float, float]
    container: str          # instance id (room, furniture or the agent)
    rel: str                # "in" | "on"
    states: set[str]
    graspable: bool
    put_rel: str = "on"     # how things placed onto/into this object relate


@dataclass
class Agent:
    pos: tuple[float, float]
    heading: float = 0.0    # radians, 0 = +x
    held: str | None = None


@dataclass
class SceneState:
    rooms: list[Room]
    objects: dict[str, SceneObject]
    agent: Agent
    highlights: set[str] = field(default_factory=set)

    def room_by_instance(self, instance_id: str) -> Room | None:
        for room in self.rooms:
            if room.instance_id == instance_id:
                return room
        return None

    def room_at(self, pos: tuple[float, float]) -> Room | None:
        for room in self.rooms:
            if room.contains(pos):
                return room
        return None

    def room_of_object(self, object_id: str) -> Room | None:
        """Room at the top of the object's containment chain."""
        cur = object_id
        seen = set()
        while cur in self.objects and cur not in seen:
            seen.add(cur)
            container = self.objects[cur].container
            if container == AGENT_ID:
                return self.room_at(self.agent.pos)
            room = self.room_by_instance(container)
            if room is not None:
                return room
            cur = container
        return self.room_by_instance(cur)

    def position_of(self, instance_id: str) -> tuple[float, float]:
        if instance_id == AGENT_ID:
            return self.agent.pos
        obj = self.objects.get(instance_id)
        if obj is not None:
            if obj.container == AGENT_ID:
                return self.agent.pos
            return obj.pos
        room = self.room_by_instance(instance_id)
        if room is not None:
            return room.center
        raise KeyError(instance_id)


def _slug(name: str) -> str:
    return "_".join(name.lower().split())


def _parse(path: Path) -> dict:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise LoadError(f"scene file not found: {path}", path=str(path))
    except json.JSONDecodeError as exc:
        raise LoadError(
            f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}",
            path=str(path), line=exc.lineno)
    if not isinstance(data, dict):
        raise LoadError(f"{path}: top level must be an object", path=str(path))
    return data


def _resolve_concept(graph: KnowledgeGraph, lemma: str, where: str,
                     path: Path) -> str:
    concepts = sorted(graph.resolve_lemma(lemma))
    if not concepts:
        raise LoadError(
            f"{path}: {where}: concept lemma {lemma!r} is not in the knowledge graph",
            path=str(path), lemma=lemma, where=where)
    return concepts[0]


def load_scene(path: str | Path, graph: KnowledgeGraph) -> SceneState:
    """Build a SceneState and ground every room/object/agent in the graph."""
    path = Path(path)
    data = _parse(path)

    room_specs = data.get("rooms", [])
    if not room_specs:
        raise LoadError(f"{path}: a scene needs at least one room", path=str(path))
    rooms: list[Room] = []
    for idx, spec in enumerate(room_specs):
        where = f"rooms[{idx}]"
        name = spec.get("name")
        rect = spec.get("rect")
        if not name or not rect or len(rect) != 4:
            raise LoadError(f"{path}: {where}: need name and rect[4]",
                            path=str(path), where=where)
        rect = tuple(float(v) for v in rect)
        if rect[0] >= rect[2] or rect[1] >= rect[3]:
            raise LoadError(f"{path}: {where}: degenerate rect", path=str(path))
        room = Room(name=name, rect=rect, instance_id=f"i_{_slug(name)}")
        for other in rooms:
            if (rect[0] < other.rect[2] and other.rect[0] < rect[2]
                    and rect[1] < other.rect[3] and other.rect[1] < rect[3]):
                raise LoadError(
                    f"{path}: rooms {other.name!r} and {name!r} overlap",
                    path=str(path))
        rooms.append(room)
        concept = _resolve_concept(graph, name, where, path)
        graph.add_instance(room.instance_id, concept, room.center)

    room_by_name = {room.name: room for room in rooms}
    objects: dict[str, SceneObject] = {}
    pending: list[tuple[str, str, str]] = []  # (object, container id, rel)
    for idx, spec in enumerate(data.get("objects", [])):
        where = f"objects[{idx}]"
        oid = spec.get("id")
        if not oid:
            raise LoadError(f"{path}: {where}: missing id", path=str(path))
        if oid in objects or oid == AGENT_ID:
            raise LoadError(f"{path}: duplicate object id {oid!r}",
                            path=str(path), id=oid)
        lemma = spec.get("concept", "")
        concept = _resolve_concept(graph, lemma, f"{where} ({oid})", path)
        pos = spec.get("pos")
        if not pos or len(pos) != 2:
            raise LoadError(f"{path}: {where} ({oid}): missing pos",
                            path=str(path), id=oid)
        pos = (float(pos[0]), float(pos[1]))
        if "room" in spec:
            room = room_by_name.get(spec["room"])
            if room is None:
                raise LoadError(f"{path}: {where} ({oid}): unknown room {spec['room']!r}",
                                path=str(path), id=oid)
            container, rel = room.instance_id, "in"
        elif "container" in spec:
            container, rel = spec["container"], spec.get("rel", "in")
        else:
            raise LoadError(f"{path}: {where} ({oid}): needs container or room",
                            path=str(path), id=oid)
        obj = SceneObject(
            id=oid, concept=concept, lemma=lemma, pos=pos,
            container=container, rel=rel,
            states=set(spec.get("states", [])),
            graspable=bool(spec.get("graspable", False)),
            put_rel=spec.get("put_rel", "on"),
        )
        objects[oid] = obj
        graph.add_instance(oid, concept, pos, states=sorted(obj.states))
        pending.append((oid, container, rel))

    for oid, container, rel in pending:
        if container not in objects and not any(r.instance_id == container for r in rooms):
            raise LoadError(
                f"{path}: object {oid!r} is contained in unknown instance {container!r}",
                path=str(path), id=oid)
        graph.move_instance(oid, container, rel)

    agent_spec = data.get("agent")
    if not agent_spec:
        raise LoadError(f"{path}: missing agent", path=str(path))
    agent_room = room_by_name.get(agent_spec.get("room", ""))
    if agent_room is None:
        raise LoadError(f"{path}: agent room {agent_spec.get('room')!r} unknown",
                        path=str(path))
    agent_pos = agent_spec.get("pos") or agent_room.center
    agent = Agent(pos=(float(agent_pos[0]), float(agent_pos[1])))
    concept = _resolve_concept(graph, AGENT_LEMMA, "agent", path)
    graph.add_instance(AGENT_ID, concept, agent.pos)
    graph.move_instance(AGENT_ID, agent_room.instance_id, "in")

    scene = SceneState(rooms=rooms, objects=objects, agent=agent)
    problems = validate_scene(scene)
    if problems:
        raise LoadError(f"{path}: " + "; ".join(problems), path=str(path),
                        problems=problems)
    graph.check()
    return scene


def validate_scene(scene: SceneState) -> list[str]:
    problems = []
    for oid, obj in scene.objects.items():
        room = scene.room_of_object(oid)
        if room is None:
            problems.append(f"object {oid} is not inside any room")
        elif obj.container != AGENT_ID and not room.contains(obj.pos):
            problems.append(
                f"object {oid} position {obj.pos} lies outside room {room.name!r}")
    if scene.room_at(scene.agent.pos) is None:
        problems.append(f"agent position {scene.agent.pos} is outside all rooms")
    held = [oid for oid, o in scene.objects.items() if o.container == AGENT_ID]
    if len(held) > 1:
        problems.append(f"agent holds more than one object: {held}")
    if held and scene.agent.held != held[0]:
        problems.append("agent.held does not match containment")
    return problems


def snapshot(scene: SceneState) -> dict:
    """Serializable ground truth: rooms, object placement, agent pose and
    the current highlight set.  Carried objects report the agent position."""
    agent_room = scene.room_at(scene.agent.pos)
    return {
        "rooms": [
            {"name": r.name, "rect": list(r.rect), "instance": r.instance_id}
            for r in scene.rooms
        ],
        "objects": [
            {
                "id": o.id,
                "concept": o.concept,
                "lemma": o.lemma,
                "pos": list(scene.agent.pos if o.container == AGENT_ID else o.pos),
                "container": o.container,
                "rel": o.rel,
                "states": sorted(o.states),
                "graspable": o.graspable,
            }
            for o in sorted(scene.objects.values(), key=lambda o: o.id)
        ],
        "agent": {
            "id": AGENT_ID,
            "pos": list(scene.agent.pos),
            "heading": scene.agent.heading,
            "held": scene.agent.held,
            "room": agent_room.name if agent_room else None,
        },
        "highlights": sorted(scene.highlights),
    }


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
