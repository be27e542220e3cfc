import pytest

from kengine import default_knowledge_path, default_scene_path
from kengine.kg import load_knowledge
from kengine.sim import load_scene


@pytest.fixture
def seed_graph():
    graph, _ = load_knowledge(default_knowledge_path())
    return graph


@pytest.fixture
def seed_world():
    """(graph, scene) with the lab fixture grounded."""
    graph, _ = load_knowledge(default_knowledge_path())
    scene = load_scene(default_scene_path(), graph)
    return graph, scene


@pytest.fixture
def seed_paths():
    return default_knowledge_path(), default_scene_path()
