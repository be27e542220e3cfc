"""Rebuild scene state from a snapshot plus an event stream.

A subscriber that joins mid-run gets the current snapshot and applies the
deltas that follow; this module is the reference for what that client-side
reconstruction must produce.
"""

from __future__ import annotations

import copy

from .scene import AGENT_ID


class SceneReconstructor:
    def __init__(self, snapshot: dict):
        self._objects = {o["id"]: copy.deepcopy(o) for o in snapshot["objects"]}
        self._agent = copy.deepcopy(snapshot["agent"])
        self._highlights = set(snapshot.get("highlights", []))

    def apply(self, kind: str, payload: dict) -> None:
        if kind == "position_update":
            if payload.get("target") == AGENT_ID:
                self._agent["pos"] = list(payload["pos"])
                if "heading" in payload:
                    self._agent["heading"] = payload["heading"]
            elif payload.get("target") in self._objects:
                self._objects[payload["target"]]["pos"] = list(payload["pos"])
        elif kind == "state_changed":
            obj = self._objects.get(payload.get("instance"))
            if obj is None:
                return
            obj["container"] = payload.get("container", obj["container"])
            obj["rel"] = payload.get("rel", obj["rel"])
            obj["states"] = sorted(payload.get("states", obj["states"]))
            if payload.get("pos"):
                obj["pos"] = list(payload["pos"])
        elif kind == "highlight":
            self._highlights = set(payload.get("instances", []))

    def state(self) -> dict:
        """Normalized comparable view; carried objects sit at the agent."""
        held = [oid for oid, o in self._objects.items()
                if o.get("container") == AGENT_ID]
        objects = {}
        for oid, obj in sorted(self._objects.items()):
            pos = self._agent["pos"] if oid in held else obj["pos"]
            objects[oid] = {
                "pos": [round(v, 9) for v in pos],
                "container": obj["container"],
                "rel": obj["rel"],
                "states": sorted(obj["states"]),
            }
        return {
            "objects": objects,
            "agent": {
                "pos": [round(v, 9) for v in self._agent["pos"]],
                "heading": round(self._agent.get("heading", 0.0), 9),
                "held": held[0] if held else None,
            },
            "highlights": sorted(self._highlights),
        }


def scene_view(snapshot: dict) -> dict:
    """The same normalized view, taken directly from a snapshot."""
    return SceneReconstructor(snapshot).state()
