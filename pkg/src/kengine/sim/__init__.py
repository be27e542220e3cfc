from .replay import SceneReconstructor, scene_view
from .scene import (
    AGENT_ID,
    Agent,
    Room,
    SceneObject,
    SceneState,
    distance,
    load_scene,
    snapshot,
    validate_scene,
)
from .simulator import (
    REACH_RADIUS,
    STEP_LENGTH,
    ActionKind,
    AgentAction,
    EventKind,
    SimEvent,
    Simulator,
    execute_command,
)
from .sync import sync_stm

__all__ = [
    "SceneReconstructor",
    "scene_view",
    "AGENT_ID",
    "Agent",
    "Room",
    "SceneObject",
    "SceneState",
    "distance",
    "load_scene",
    "snapshot",
    "validate_scene",
    "REACH_RADIUS",
    "STEP_LENGTH",
    "ActionKind",
    "AgentAction",
    "EventKind",
    "SimEvent",
    "Simulator",
    "execute_command",
    "sync_stm",
]
