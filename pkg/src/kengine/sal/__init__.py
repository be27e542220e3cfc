from .core import (
    FUNCTIONS,
    CallTree,
    SalArgs,
    eval_call_tree,
    get_count,
    get_stm_actions,
    get_stm_locations,
    get_stm_objects,
)
from .trace import (
    TRACE_VERSION,
    CallRecord,
    OutputNode,
    ResolvedArg,
    Trace,
    replay_trace,
    single_call_trace,
)

__all__ = [
    "FUNCTIONS",
    "CallTree",
    "SalArgs",
    "eval_call_tree",
    "get_count",
    "get_stm_actions",
    "get_stm_locations",
    "get_stm_objects",
    "TRACE_VERSION",
    "CallRecord",
    "OutputNode",
    "ResolvedArg",
    "Trace",
    "replay_trace",
    "single_call_trace",
]
