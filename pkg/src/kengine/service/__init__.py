from .app import create_app
from .engine import ChatTurn, Engine, EventBus, Session

__all__ = ["create_app", "ChatTurn", "Engine", "EventBus", "Session"]
