"""Machine-readable errors shared by the engine, service and CLI.

Every failure the reasoning stack can produce carries a stable ``code``
string so the service and UI can render it without parsing prose.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class; ``code`` is stable, ``message`` is for humans."""

    code = "ENGINE_ERROR"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_payload(self) -> dict:
        payload = {"code": self.code, "message": self.message}
        if self.details:
            payload["details"] = self.details
        return payload


class UnresolvedLemma(EngineError):
    code = "UNRESOLVED_LEMMA"


class UnknownId(EngineError):
    code = "UNKNOWN_ID"


class BadArgument(EngineError):
    """An argument of the wrong kind for its slot (e.g. an instance ID
    where an action concept is required)."""

    code = "BAD_ARG"


class BadCallTree(EngineError):
    code = "BAD_TREE"


class UnknownEdge(EngineError):
    code = "UNKNOWN_EDGE"


class EdgeAlreadyDeleted(EngineError):
    code = "EDGE_ALREADY_DELETED"


class EdgeNotDeleted(EngineError):
    code = "EDGE_NOT_DELETED"


class EdgeProtected(EngineError):
    """Ground-truth edges (instance-of, containment, state) cannot be
    deleted through the knowledge-repair API."""

    code = "EDGE_PROTECTED"


class LoadError(EngineError):
    code = "LOAD_ERROR"


class InvariantViolation(EngineError):
    code = "INVARIANT_VIOLATION"


class UnknownTurn(EngineError):
    code = "UNKNOWN_TURN"


class NoTrace(EngineError):
    code = "NO_TRACE"


class UnknownSession(EngineError):
    code = "UNKNOWN_SESSION"


class SimulationError(EngineError):
    code = "SIM_ERROR"
