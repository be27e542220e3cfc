"""kengine: a knowledge engine for an explainable household robot.

Layers: knowledge graph (kg), traced reasoning queries (sal), natural
language parsing (nlparse), 2D household simulator (sim), HTTP/WebSocket
service (service) and a command line interface (cli).
"""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def default_knowledge_path() -> Path:
    """Packaged seed knowledge file."""
    return Path(resources.files("kengine").joinpath("data/knowledge.json"))


def default_scene_path() -> Path:
    """Packaged lab scene fixture."""
    return Path(resources.files("kengine").joinpath("data/lab.json"))
