"""Reasoning queries over the knowledge graph.

The four query functions (`get_stm_objects`, `get_stm_locations`,
`get_stm_actions`, `get_count`) share the argument slots object / action /
location / state.  A slot holds a lemma, a node ID, or a set of IDs
produced by a nested call; lemmas are resolved to concepts first, then the
hierarchy is explored downward until grounded instances match.  Every
surviving result is justified by a recorded edge path, and `eval_call_tree`
evaluates nested calls innermost-first, feeding outputs into the enclosing
argument slot.

All functions are pure with respect to the graph snapshot and return
canonically ordered results, so identical inputs give identical traces.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from ..errors import BadArgument, BadCallTree, EngineError, UnresolvedLemma
from ..kg.graph import KnowledgeGraph
from ..kg.model import (
    EdgeKind,
    FragmentEdge,
    FragmentNode,
    GraphFragment,
    Path,
    state_node_id,
)
from .trace import CallRecord, OutputNode, ResolvedArg, Trace

SLOTS = ("object", "action", "location", "state")
FUNCTIONS = ("get_stm_objects", "get_stm_locations", "get_stm_actions", "get_count")

ArgValue = "str | frozenset[str] | None"


@dataclass
class SalArgs:
    object: str | frozenset | None = None
    action: str | frozenset | None = None
    location: str | frozenset | None = None
    state: str | None = None

    def present(self) -> list[str]:
        return [s for s in SLOTS if getattr(self, s) is not None]


@dataclass
class CallTree:
    """Nested query: any of object/action/location may itself be a call."""

    function: str
    args: dict  # slot -> str literal or CallTree

    @staticmethod
    def from_json(data: dict, pos: str = "root") -> "CallTree":
        if not isinstance(data, dict) or "function" not in data:
            raise BadCallTree(f"{pos}: call must be an object with a 'function' key",
                              tree_position=pos)
        fn = data["function"]
        if fn not in FUNCTIONS:
            raise BadCallTree(f"{pos}: unknown function {fn!r}", tree_position=pos)
        args = {}
        for slot, value in (data.get("args") or {}).items():
            if slot not in SLOTS:
                raise BadCallTree(f"{pos}: unknown argument slot {slot!r}",
                                  tree_position=pos)
            if isinstance(value, dict):
                args[slot] = CallTree.from_json(value, f"{pos}.{slot}")
            elif isinstance(value, str):
                args[slot] = value
            else:
                raise BadCallTree(
                    f"{pos}.{slot}: argument must be a string or a nested call",
                    tree_position=f"{pos}.{slot}")
        if not args:
            raise BadCallTree(f"{pos}: call has no arguments", tree_position=pos)
        return CallTree(function=fn, args=args)

    def to_json(self) -> dict:
        return {
            "function": self.function,
            "args": {
                slot: (value.to_json() if isinstance(value, CallTree) else value)
                for slot, value in self.args.items()
            },
        }


# ----------------------------------------------------------------------
# argument resolution
# ----------------------------------------------------------------------

@dataclass
class Anchor:
    node: str          # concept or instance id the filter hangs from
    is_instance: bool


@dataclass
class ResolvedSlot:
    anchors: list[Anchor]
    arg: ResolvedArg


def _resolve_slot(graph: KnowledgeGraph, slot: str, value,
                  allow_instances: bool) -> ResolvedSlot:
    if isinstance(value, (set, frozenset, list, tuple)):
        anchors = []
        for node_id in sorted(value):
            if graph.has_concept(node_id):
                anchors.append(Anchor(node_id, False))
            elif graph.has_instance(node_id):
                if not allow_instances:
                    raise BadArgument(
                        f"instance {node_id!r} cannot fill the {slot} slot",
                        slot=slot, id=node_id)
                anchors.append(Anchor(node_id, True))
            else:
                raise BadArgument(f"unknown id {node_id!r} in {slot} slot",
                                  slot=slot, id=node_id)
        return ResolvedSlot(anchors, ResolvedArg(
            kind="ids", resolved=[a.node for a in anchors]))
    if not isinstance(value, str):
        raise BadArgument(f"{slot} argument must be a string or id set", slot=slot)
    if graph.has_concept(value):
        return ResolvedSlot([Anchor(value, False)],
                            ResolvedArg(kind="id", value=value, resolved=[value]))
    if graph.has_instance(value):
        if not allow_instances:
            raise BadArgument(
                f"instance {value!r} cannot fill the {slot} slot",
                slot=slot, id=value)
        return ResolvedSlot([Anchor(value, True)],
                            ResolvedArg(kind="id", value=value, resolved=[value]))
    concepts = graph.resolve_lemma(value)
    if not concepts:
        raise UnresolvedLemma(f"no concept matches the lemma {value!r}",
                              lemma=value, slot=slot)
    return ResolvedSlot([Anchor(c, False) for c in sorted(concepts)],
                        ResolvedArg(kind="lemma", value=value,
                                    resolved=sorted(concepts)))


# ----------------------------------------------------------------------
# justification paths
# ----------------------------------------------------------------------

#: an edge walk with its node sequence, kept until the fragment is built
Walk = tuple[tuple[str, ...], tuple[str, ...]]  # (edge ids, node ids)


def _shortest_isa_walk(graph: KnowledgeGraph, start: str, goal: str,
                       downward: bool) -> Walk | None:
    """Cheapest is-a walk start->goal; ties broken by edge-id sequence.

    Downward walks follow is-a edges child-ward (ancestor to descendant),
    upward walks parent-ward.
    """
    if start == goal:
        return (), (start,)
    heap: list[tuple[int, tuple[str, ...], tuple[str, ...], str]] = [(0, (), (start,), start)]
    seen: set[str] = set()
    while heap:
        cost, edges, nodes, cur = heapq.heappop(heap)
        if cur in seen:
            continue
        seen.add(cur)
        if cur == goal:
            return edges, nodes
        if downward:
            steps = [(e.id, e.src) for e in graph.live_edges_to(cur, EdgeKind.IS_A)]
        else:
            steps = [(e.id, e.dst) for e in graph.live_edges_from(cur, EdgeKind.IS_A)]
        for eid, nxt in steps:
            if nxt not in seen:
                heapq.heappush(heap, (cost + 1, edges + (eid,), nodes + (nxt,), nxt))
    return None


def _best(walks: list[Walk]) -> Walk | None:
    if not walks:
        return None
    return min(walks, key=lambda w: (len(w[0]), w[0]))


class _Matcher:
    """Per-query filter evaluation with memoized closures."""

    def __init__(self, graph: KnowledgeGraph):
        self.graph = graph
        self._desc: dict[str, set[str]] = {}
        self._anc: dict[str, set[str]] = {}

    def descendants(self, concept: str) -> set[str]:
        if concept not in self._desc:
            self._desc[concept] = self.graph.descendants_of(concept)
        return self._desc[concept]

    def ancestors(self, concept: str) -> set[str]:
        if concept not in self._anc:
            self._anc[concept] = self.graph.ancestors_of(concept)
        return self._anc[concept]

    def instance_concept(self, instance: str) -> str | None:
        pair = self.graph.concept_of(instance)
        return pair[0] if pair else None

    # -- object ---------------------------------------------------------

    def object_walk(self, instance: str, anchors: list[Anchor]) -> Walk | None:
        concept = self.instance_concept(instance)
        walks: list[Walk] = []
        for anchor in anchors:
            if anchor.is_instance:
                if anchor.node == instance:
                    walks.append(((), (instance,)))
                continue
            if concept is None or concept not in self.descendants(anchor.node):
                continue
            isa = _shortest_isa_walk(self.graph, anchor.node, concept, downward=True)
            if isa is None:
                continue
            io_edge = self.graph.concept_of(instance)[1]
            walks.append((isa[0] + (io_edge,), isa[1] + (instance,)))
        return _best(walks)

    # -- action ---------------------------------------------------------

    def action_walk(self, instance: str, anchors: list[Anchor]) -> Walk | None:
        concept = self.instance_concept(instance)
        if concept is None:
            return None
        ancestors = self.ancestors(concept)
        walks: list[Walk] = []
        for anchor in anchors:
            if anchor.is_instance:
                continue
            for carrier, ap_edge in self.graph.patterns_for_action(anchor.node, "object"):
                if carrier not in ancestors:
                    continue
                down = _shortest_isa_walk(self.graph, carrier, concept, downward=True)
                if down is None:
                    continue
                io_edge = self.graph.concept_of(instance)[1]
                walks.append((
                    (ap_edge,) + down[0] + (io_edge,),
                    (anchor.node,) + down[1] + (instance,),
                ))
        return _best(walks)

    # -- state ----------------------------------------------------------

    def state_walk(self, instance: str, tag: str) -> Walk | None:
        edge_id = self.graph.states_of(instance).get(tag)
        if edge_id is None:
            return None
        return (edge_id,), (state_node_id(tag), instance)

    # -- location -------------------------------------------------------

    def chain(self, instance: str) -> list[tuple[str, str]]:
        return self.graph.containment_chain(instance)

    def location_walk(self, instance: str, anchors: list[Anchor]) -> Walk | None:
        chain = self.chain(instance)
        chain_nodes = [c for c, _ in chain]
        walks: list[Walk] = []
        for anchor in anchors:
            if anchor.is_instance:
                if anchor.node in chain_nodes:
                    walks.append(self._chain_descent(instance, chain, anchor.node,
                                                     (), (anchor.node,)))
                continue
            targets = self.descendants(anchor.node)
            for node in chain_nodes:
                node_concept = self.instance_concept(node)
                if node_concept is None or node_concept not in targets:
                    continue
                isa = _shortest_isa_walk(self.graph, anchor.node, node_concept,
                                         downward=True)
                if isa is None:
                    continue
                io_edge = self.graph.concept_of(node)[1]
                walks.append(self._chain_descent(
                    instance, chain, node,
                    isa[0] + (io_edge,), isa[1] + (node,)))
        return _best(walks)

    def _chain_descent(self, instance: str, chain: list[tuple[str, str]],
                       from_node: str, edges: tuple, nodes: tuple) -> Walk:
        """Extend a walk ending at `from_node` down the containment chain
        to the instance itself."""
        idx = [c for c, _ in chain].index(from_node)
        below = chain[: idx + 1]  # (container, edge) pairs from instance upward
        for container, edge_id in reversed(below):
            edges = edges + (edge_id,)
        hops = [instance] + [c for c, _ in below]
        nodes = nodes + tuple(reversed(hops[:-1]))
        return edges, nodes

    def chain_ascent(self, instance: str, upto: str) -> Walk:
        """Containment walk from the instance up to `upto` (inclusive)."""
        chain = self.chain(instance)
        edges: tuple = ()
        nodes: tuple = (instance,)
        for container, edge_id in chain:
            edges = edges + (edge_id,)
            nodes = nodes + (container,)
            if container == upto:
                break
        return edges, nodes


# ----------------------------------------------------------------------
# record assembly
# ----------------------------------------------------------------------

def _arg_wiring(fragment: GraphFragment, slot: str, arg: ResolvedArg,
                graph: KnowledgeGraph) -> None:
    """Synthetic utterance/parameter nodes showing how each argument bound
    to knowledge; these edges never participate in justification paths."""
    param_id = f"p_{slot}"
    fragment.add_node(FragmentNode(id=param_id, label=slot, node_class="parameter"))
    if arg.kind in ("lemma", "id", "tag") and arg.value is not None:
        utt_id = f"u_{slot}"
        fragment.add_node(FragmentNode(id=utt_id, label=arg.value,
                                       node_class="utterance"))
        fragment.add_edge(FragmentEdge(
            id=f"v_{slot}_arg", kind="argument", src=utt_id, dst=param_id,
            synthetic=True))
    if arg.kind == "tag" and arg.value is not None:
        target = state_node_id(arg.value)
        fragment.add_node(FragmentNode(id=target, label=arg.value,
                                       node_class="concept"))
        fragment.add_edge(FragmentEdge(
            id=f"v_{slot}_res_{target}", kind="resolves_to",
            src=param_id, dst=target, synthetic=True))
        return
    for node_id in arg.resolved:
        fragment.add_node(graph.fragment_node(node_id))
        fragment.add_edge(FragmentEdge(
            id=f"v_{slot}_res_{node_id}", kind="resolves_to",
            src=param_id, dst=node_id, synthetic=True))


def _walk_into_fragment(graph: KnowledgeGraph, fragment: GraphFragment,
                        walk: Walk, output: str, anchor: str,
                        filter_name: str) -> None:
    edge_ids, node_ids = walk
    for node_id in node_ids:
        fragment.add_node(graph.fragment_node(node_id))
    for eid in edge_ids:
        edge = graph.edge(eid)
        fragment.add_edge(FragmentEdge(id=edge.id, kind=edge.kind.value,
                                       src=edge.src, dst=edge.dst, role=edge.role))
    fragment.paths.append(Path(output=output, anchor=anchor,
                               filter=filter_name, edges=list(edge_ids)))


def _make_record(graph: KnowledgeGraph, function: str,
                 args: dict[str, ResolvedArg],
                 outputs: list[OutputNode],
                 walks: list[tuple[Walk, str, str, str]]) -> CallRecord:
    fragment = GraphFragment()
    for slot, arg in args.items():
        _arg_wiring(fragment, slot, arg, graph)
    for walk, output, anchor, filter_name in walks:
        _walk_into_fragment(graph, fragment, walk, output, anchor, filter_name)
    fragment.sort()
    return CallRecord(function=function, args=args, outputs=outputs,
                      fragment=fragment)


def _instance_output(graph: KnowledgeGraph, instance: str) -> OutputNode:
    return OutputNode(id=instance, lemma=graph.display_lemma(instance),
                      node_class="instance_result")


def _concept_output(graph: KnowledgeGraph, concept: str) -> OutputNode:
    return OutputNode(id=concept, lemma=graph.display_lemma(concept),
                      node_class="concept")


# ----------------------------------------------------------------------
# the query functions
# ----------------------------------------------------------------------

def _match_instances(graph: KnowledgeGraph, args: SalArgs, matcher: _Matcher,
                     require_object: bool = False):
    """Shared filter pipeline.  Returns (matches, resolved arg envelopes)
    where matches maps instance -> {filter: walk}."""
    if not args.present():
        raise BadArgument("at least one of object/action/location/state is required")
    if require_object and args.object is None:
        raise BadArgument("the object argument is required", slot="object")

    resolved: dict[str, ResolvedSlot] = {}
    if args.object is not None:
        resolved["object"] = _resolve_slot(graph, "object", args.object,
                                           allow_instances=True)
    if args.action is not None:
        resolved["action"] = _resolve_slot(graph, "action", args.action,
                                           allow_instances=False)
    if args.location is not None:
        resolved["location"] = _resolve_slot(graph, "location", args.location,
                                             allow_instances=True)
    if args.state is not None and not isinstance(args.state, str):
        raise BadArgument("state argument must be a tag string", slot="state")

    matches: dict[str, dict[str, Walk]] = {}
    for instance in graph.instance_ids():
        if matcher.instance_concept(instance) is None:
            continue
        walks: dict[str, Walk] = {}
        if "object" in resolved:
            walk = matcher.object_walk(instance, resolved["object"].anchors)
            if walk is None:
                continue
            walks["object"] = walk
        if "action" in resolved:
            walk = matcher.action_walk(instance, resolved["action"].anchors)
            if walk is None:
                continue
            walks["action"] = walk
        if args.state is not None:
            walk = matcher.state_walk(instance, args.state)
            if walk is None:
                continue
            walks["state"] = walk
        if "location" in resolved:
            walk = matcher.location_walk(instance, resolved["location"].anchors)
            if walk is None:
                continue
            walks["location"] = walk
        matches[instance] = walks

    envelopes = {slot: rs.arg for slot, rs in resolved.items()}
    if args.state is not None:
        envelopes["state"] = ResolvedArg(kind="tag", value=args.state)
    return matches, envelopes, resolved


def get_stm_objects(graph: KnowledgeGraph, args: SalArgs) -> tuple[set[str], CallRecord]:
    """Grounded instances matching every given filter, each justified by
    one path per filter."""
    matcher = _Matcher(graph)
    matches, envelopes, _ = _match_instances(graph, args, matcher)
    outputs = [_instance_output(graph, i) for i in sorted(matches)]
    walks = []
    for instance in sorted(matches):
        for filter_name in ("object", "action", "state", "location"):
            walk = matches[instance].get(filter_name)
            if walk is not None:
                walks.append((walk, instance, walk[1][0], filter_name))
    record = _make_record(graph, "get_stm_objects", envelopes, outputs, walks)
    return set(matches), record


def get_stm_locations(graph: KnowledgeGraph, args: SalArgs) -> tuple[set[str], CallRecord]:
    """Union of the containment chains (direct container up to the room) of
    every matching object; paths extend the object justification with
    containment hops."""
    matcher = _Matcher(graph)
    matches, envelopes, _ = _match_instances(graph, args, matcher)
    best: dict[str, tuple[Walk, str]] = {}  # location -> (walk, anchor)
    for instance in sorted(matches):
        walks = matches[instance]
        base = next(
            (walks[f] for f in ("object", "action", "state", "location") if f in walks),
            ((), (instance,)),
        )
        for container, _ in matcher.chain(instance):
            ascent = matcher.chain_ascent(instance, container)
            combined: Walk = (base[0] + ascent[0], base[1] + ascent[1][1:])
            key = (len(combined[0]), combined[0])
            if container not in best or key < (len(best[container][0][0]),
                                               best[container][0][0]):
                best[container] = (combined, combined[1][0])
    outputs = [_instance_output(graph, l) for l in sorted(best)]
    walks = [(walk, location, anchor, "containment")
             for location, (walk, anchor) in sorted(best.items())]
    record = _make_record(graph, "get_stm_locations", envelopes, outputs, walks)
    return set(best), record


def get_stm_actions(graph: KnowledgeGraph, args: SalArgs) -> tuple[set[str], CallRecord]:
    """Action concepts applicable (via object-role patterns) to any
    ancestor-or-self of a matching instance's concept."""
    matcher = _Matcher(graph)
    matches, envelopes, resolved = _match_instances(graph, args, matcher,
                                                    require_object=True)
    object_anchors = resolved["object"].anchors
    best: dict[str, Walk] = {}
    for instance in sorted(matches):
        concept = matcher.instance_concept(instance)
        # walk from an object anchor to the instance's concept (the action
        # pattern hangs off the concept level, not the instance)
        prefixes: list[Walk] = []
        for anchor in object_anchors:
            if anchor.is_instance:
                if anchor.node == instance:
                    io_edge = graph.concept_of(instance)[1]
                    prefixes.append(((io_edge,), (instance, concept)))
            elif concept in matcher.descendants(anchor.node):
                isa = _shortest_isa_walk(graph, anchor.node, concept,
                                         downward=True)
                if isa is not None:
                    prefixes.append(isa)
        prefix = _best(prefixes)
        if prefix is None:
            continue
        for carrier in sorted(matcher.ancestors(concept)):
            for action, ap_edge in sorted(graph.patterns_on_concept(carrier, "object")):
                up = _shortest_isa_walk(graph, concept, carrier, downward=False)
                if up is None:
                    continue
                combined: Walk = (
                    prefix[0] + up[0] + (ap_edge,),
                    prefix[1] + up[1][1:] + (action,),
                )
                key = (len(combined[0]), combined[0])
                if action not in best or key < (len(best[action][0]), best[action][0]):
                    best[action] = combined
    outputs = [_concept_output(graph, a) for a in sorted(best)]
    walks = [(walk, action, walk[1][0], "action") for action, walk in sorted(best.items())]
    record = _make_record(graph, "get_stm_actions", envelopes, outputs, walks)
    return set(best), record


def get_count(graph: KnowledgeGraph, args: SalArgs) -> tuple[int, CallRecord]:
    """Cardinality of the matching object set; the object lookup record is
    embedded for the trace."""
    ids, obj_record = get_stm_objects(graph, args)
    count = len(ids)
    node = OutputNode(id=f"count_{count}", lemma=str(count),
                      node_class="instance_result")
    fragment = GraphFragment()
    fragment.add_node(FragmentNode(id=node.id, label=node.lemma,
                                   node_class=node.node_class))
    fragment.paths.append(Path(output=node.id, anchor=node.id,
                               filter="count", edges=[]))
    record = CallRecord(function="get_count", args=dict(obj_record.args),
                        outputs=[node], fragment=fragment, embedded=obj_record)
    return count, record


_DISPATCH = {
    "get_stm_objects": get_stm_objects,
    "get_stm_locations": get_stm_locations,
    "get_stm_actions": get_stm_actions,
    "get_count": get_count,
}


def eval_call_tree(graph: KnowledgeGraph, tree: CallTree) -> tuple[set[str] | int, Trace]:
    """Evaluate children first, substitute their outputs (ID form) into the
    parent's argument slot, and record every call innermost-first."""
    records: list[CallRecord] = []

    def _eval(node: CallTree, pos: str):
        sal_args = SalArgs()
        child_indexes: dict[str, int] = {}
        for slot, value in node.args.items():
            if isinstance(value, CallTree):
                child_result = _eval(value, f"{pos}.{slot}")
                if isinstance(child_result, int):
                    raise BadCallTree(
                        f"{pos}.{slot}: a count cannot feed an argument slot",
                        tree_position=f"{pos}.{slot}")
                setattr(sal_args, slot, frozenset(child_result))
                child_indexes[slot] = len(records) - 1
            else:
                setattr(sal_args, slot, value)
        try:
            result, record = _DISPATCH[node.function](graph, sal_args)
        except EngineError as exc:
            exc.details.setdefault("tree_position", pos)
            raise
        for slot, index in child_indexes.items():
            record.args[slot] = ResolvedArg(kind="call", call_index=index,
                                            resolved=record.args[slot].resolved)
        if record.embedded is not None:
            records.append(record.embedded)
            record.embeds_index = len(records) - 1
        records.append(record)
        return result

    result = _eval(tree, "root")
    return result, Trace(records=records, final=list(records[-1].outputs))
