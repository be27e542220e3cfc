import json
import random
from dataclasses import dataclass

import pytest

from kengine.errors import LoadError, UnknownId
from kengine.sal import SalArgs, get_count, get_stm_locations
from kengine.sim import (
    AGENT_ID,
    ActionKind,
    AgentAction,
    EventKind,
    SceneReconstructor,
    Simulator,
    execute_command,
    load_scene,
    scene_view,
    snapshot,
    sync_stm,
    validate_scene,
)


@pytest.fixture
def world(seed_world):
    graph, scene = seed_world
    return graph, scene, Simulator(scene, graph)


# ----------------------------------------------------------------------
# scene loading
# ----------------------------------------------------------------------

def test_lab_scene_grounds_everything(seed_world):
    graph, scene = seed_world
    assert [r.name for r in scene.rooms] == ["kitchen", "living room"]
    assert {"i_dinner_table_1", "i_table_2"} <= set(scene.objects)
    assert graph.get_instance("i_juice_1").container == "i_fridge_1"
    assert graph.get_instance(AGENT_ID).container == "i_kitchen"
    assert validate_scene(scene) == []
    assert graph.validate() == []


def test_empty_scene_rejected(tmp_path, seed_graph):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps({"rooms": [], "objects": [], "agent": {}}))
    with pytest.raises(LoadError) as err:
        load_scene(path, seed_graph)
    assert "room" in str(err.value)


def test_unknown_concept_names_object(tmp_path, seed_graph):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps({
        "rooms": [{"name": "kitchen", "rect": [0, 0, 4, 4]}],
        "objects": [{"id": "i_w", "concept": "xyzzy", "room": "kitchen",
                     "pos": [1, 1], "states": [], "graspable": True}],
        "agent": {"room": "kitchen", "pos": [2, 2]},
    }))
    with pytest.raises(LoadError) as err:
        load_scene(path, seed_graph)
    assert "i_w" in str(err.value) and "xyzzy" in str(err.value)


def test_object_outside_room_rejected(tmp_path, seed_graph):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps({
        "rooms": [{"name": "kitchen", "rect": [0, 0, 4, 4]}],
        "objects": [{"id": "i_k", "concept": "key", "room": "kitchen",
                     "pos": [9, 9], "states": [], "graspable": True}],
        "agent": {"room": "kitchen", "pos": [2, 2]},
    }))
    with pytest.raises(LoadError) as err:
        load_scene(path, seed_graph)
    assert "i_k" in str(err.value)


# ----------------------------------------------------------------------
# planning
# ----------------------------------------------------------------------

def test_bring_expands_to_four_actions():
    plan = execute_command("bring", "i_key_1", "i_kitchen")
    assert [a.kind for a in plan] == [
        ActionKind.WALK_TO, ActionKind.GRAB, ActionKind.WALK_TO, ActionKind.PUT]
    assert plan[0].target == "i_key_1"
    assert plan[3].target == "i_kitchen"
    assert plan[3].object == "i_key_1"


def test_go_is_a_single_walk():
    plan = execute_command("go", "i_dinner_table_1")
    assert [a.kind for a in plan] == [ActionKind.WALK_TO]


def test_atomic_verbs_map_one_to_one():
    assert len(execute_command("grab", "i_key_1")) == 1
    assert len(execute_command("open", "i_fridge_1")) == 1


# ----------------------------------------------------------------------
# stepping
# ----------------------------------------------------------------------

def kinds(events):
    return [e.kind for e in events]


def test_walk_to_emits_updates_then_completes(world):
    graph, scene, sim = world
    events = sim.step(AgentAction(ActionKind.WALK_TO, target="i_dinner_table_1"))
    ks = kinds(events)
    assert ks[0] == EventKind.ACTION_STARTED
    assert ks.count(EventKind.POSITION_UPDATE) >= 1
    assert ks[-1] == EventKind.ACTION_COMPLETED
    from kengine.sim import distance
    assert distance(scene.agent.pos, scene.objects["i_dinner_table_1"].pos) <= sim.reach


def test_grab_furniture_fails(world):
    graph, scene, sim = world
    sim.step(AgentAction(ActionKind.WALK_TO, target="i_fridge_1"))
    events = sim.step(AgentAction(ActionKind.GRAB, target="i_fridge_1"))
    failed = [e for e in events if e.kind == EventKind.ACTION_FAILED]
    assert failed and failed[0].payload["code"] == "NOT_GRASPABLE"


def test_grab_with_full_hands_fails(world):
    graph, scene, sim = world
    sim.step(AgentAction(ActionKind.WALK_TO, target="i_key_1"))
    sim.step(AgentAction(ActionKind.GRAB, target="i_key_1"))
    assert scene.agent.held == "i_key_1"
    events = sim.step(AgentAction(ActionKind.GRAB, target="i_banana_1"))
    failed = [e for e in events if e.kind == EventKind.ACTION_FAILED]
    assert failed and failed[0].payload["code"] == "HANDS_FULL"
    # scene unchanged
    assert scene.objects["i_banana_1"].container == "i_table_2"


def test_grab_out_of_reach_fails(world):
    graph, scene, sim = world
    events = sim.step(AgentAction(ActionKind.GRAB, target="i_key_1"))
    failed = [e for e in events if e.kind == EventKind.ACTION_FAILED]
    assert failed and failed[0].payload["code"] == "OUT_OF_REACH"


def test_put_into_room_drops_at_agent(world):
    graph, scene, sim = world
    for action in execute_command("bring", "i_key_1", "i_kitchen"):
        sim.step(action)
    key = scene.objects["i_key_1"]
    assert key.container == "i_kitchen"
    assert key.pos == scene.agent.pos
    assert scene.agent.held is None
    changed = graph.get_instance("i_key_1")
    assert changed.container == "i_kitchen"


def test_open_toggles_state(world):
    graph, scene, sim = world
    sim.step(AgentAction(ActionKind.WALK_TO, target="i_fridge_1"))
    events = sim.step(AgentAction(ActionKind.OPEN, target="i_fridge_1"))
    assert EventKind.STATE_CHANGED in kinds(events)
    assert "open" in scene.objects["i_fridge_1"].states
    assert "open" in graph.get_instance("i_fridge_1").states
    again = sim.step(AgentAction(ActionKind.OPEN, target="i_fridge_1"))
    assert EventKind.STATE_CHANGED not in kinds(again)  # no-op completes quietly


def test_look_at_highlights(world):
    graph, scene, sim = world
    events = sim.step(AgentAction(ActionKind.LOOK_AT, target="i_banana_1"))
    highlight = [e for e in events if e.kind == EventKind.HIGHLIGHT]
    assert highlight and highlight[0].payload["instances"] == ["i_banana_1"]


def test_event_sequence_is_monotonic(world):
    graph, scene, sim = world
    events = []
    for action in execute_command("bring", "i_key_1", "i_kitchen"):
        events.extend(sim.step(action))
    seqs = [e.seq for e in events]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
    # action k's terminal event precedes action k+1's start
    starts = [i for i, e in enumerate(events) if e.kind == EventKind.ACTION_STARTED]
    terminals = [i for i, e in enumerate(events)
                 if e.kind in (EventKind.ACTION_COMPLETED, EventKind.ACTION_FAILED)]
    for start, terminal in zip(starts[1:], terminals):
        assert terminal < start


# ----------------------------------------------------------------------
# STM sync: the no-duplication rule
# ----------------------------------------------------------------------

def test_bring_key_to_kitchen_single_location(world):
    graph, scene, sim = world
    for action in execute_command("bring", "i_key_1", "i_kitchen"):
        sim.step(action)
    locations, _ = get_stm_locations(graph, SalArgs(object="key"))
    assert locations == {"i_kitchen"}
    count, _ = get_count(graph, SalArgs(object="key"))
    assert count == 1


@dataclass
class _FakeEvent:
    payload: dict


def test_sync_rejects_unknown_instance(seed_world):
    graph, _ = seed_world
    with pytest.raises(UnknownId):
        sync_stm(graph, _FakeEvent(payload={"instance": "i_ghost",
                                            "container": "i_kitchen",
                                            "rel": "in", "states": []}))


def test_sync_noop_move(world):
    graph, scene, sim = world
    receipt = sync_stm(graph, _FakeEvent(payload={
        "instance": "i_key_1", "container": "i_table_2", "rel": "on",
        "states": [], "pos": [9.2, 3.0]}))
    assert receipt["noop"] is True


def test_sync_alarm_event_emitted_for_unknown_instance(world):
    graph, scene, sim = world
    scene.objects["i_ghost"] = scene.objects["i_key_1"].__class__(
        id="i_ghost", concept="c_key", lemma="key", pos=(1.0, 1.0),
        container="i_kitchen", rel="in", states=set(), graspable=True)
    sim.scene.agent.pos = (1.0, 1.0)
    events = sim.step(AgentAction(ActionKind.GRAB, target="i_ghost"))
    assert EventKind.ALARM in kinds(events)


def test_hundred_random_moves_conserve_instances(world):
    graph, scene, sim = world
    rng = random.Random(42)
    before = set(graph.instance_ids())
    containers = ["i_kitchen", "i_living_room", "i_fridge_1",
                  "i_dinner_table_1", "i_table_2"]
    movable = [oid for oid, obj in scene.objects.items() if obj.graspable]
    for _ in range(100):
        oid = rng.choice(movable)
        target = rng.choice(containers)
        room = scene.room_by_instance(target)
        pos = room.center if room else scene.objects[target].pos
        obj = scene.objects[oid]
        obj.container, obj.rel, obj.pos = target, "in", pos
        sync_stm(graph, _FakeEvent(payload={
            "instance": oid, "container": target, "rel": "in",
            "states": sorted(obj.states), "pos": list(pos)}))
        assert set(graph.instance_ids()) == before
        assert graph.validate() == []
        chain = [c for c, _ in graph.containment_chain(oid)]
        assert chain[-1] in ("i_kitchen", "i_living_room")


# ----------------------------------------------------------------------
# snapshots and reconstruction
# ----------------------------------------------------------------------

def test_snapshot_matches_scene_file_at_start(seed_world, seed_paths):
    _, scene = seed_world
    snap = snapshot(scene)
    raw = json.loads(seed_paths[1].read_text())
    file_pos = {o["id"]: o["pos"] for o in raw["objects"]}
    for obj in snap["objects"]:
        assert obj["pos"] == file_pos[obj["id"]]
    assert snap["agent"]["pos"] == raw["agent"]["pos"]


def test_snapshot_mid_walk_interpolates(world):
    graph, scene, sim = world
    start = scene.agent.pos
    goal = scene.objects["i_dinner_table_1"].pos
    sim.enqueue([AgentAction(ActionKind.WALK_TO, target="i_dinner_table_1")])
    sim.tick()
    sim.tick()
    snap = snapshot(scene)
    pos = tuple(snap["agent"]["pos"])
    assert pos != start and pos != goal
    from kengine.sim import distance
    assert distance(pos, goal) < distance(start, goal)
    sim.run_until_idle()


def test_carried_object_tracks_agent(world):
    graph, scene, sim = world
    sim.step(AgentAction(ActionKind.WALK_TO, target="i_key_1"))
    sim.step(AgentAction(ActionKind.GRAB, target="i_key_1"))
    sim.enqueue([AgentAction(ActionKind.WALK_TO, target="i_kitchen")])
    sim.tick()
    sim.tick()
    snap = snapshot(scene)
    key = next(o for o in snap["objects"] if o["id"] == "i_key_1")
    assert key["pos"] == snap["agent"]["pos"]
    sim.run_until_idle()


def test_reconstruction_equals_direct_snapshot(world):
    graph, scene, sim = world
    initial = snapshot(scene)
    rebuilt = SceneReconstructor(initial)
    for action in execute_command("bring", "i_key_1", "i_kitchen"):
        for event in sim.step(action):
            rebuilt.apply(event.kind.value, event.payload)
    assert rebuilt.state() == scene_view(snapshot(scene))


def test_ground_truth_agreement_each_event(world):
    graph, scene, sim = world
    plan = (execute_command("bring", "i_key_1", "i_fridge_1")
            + execute_command("bring", "i_banana_1", "i_kitchen")
            + execute_command("go", "i_table_2"))
    sim.enqueue(plan)
    while sim.busy:
        sim.tick()
        for oid, obj in scene.objects.items():
            assert graph.get_instance(oid).container == obj.container
        agent_room = scene.room_at(scene.agent.pos)
        if agent_room is not None:
            assert graph.get_instance(AGENT_ID).container == agent_room.instance_id
