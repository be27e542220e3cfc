import random

import pytest

from kengine.errors import BadArgument, BadCallTree, UnresolvedLemma
from kengine.sal import (
    CallTree,
    SalArgs,
    eval_call_tree,
    get_count,
    get_stm_actions,
    get_stm_locations,
    get_stm_objects,
    replay_trace,
    single_call_trace,
)
from oracle import BruteForce
from randgen import random_graph, random_instances, random_query

DRINK_QUESTION = CallTree.from_json({
    "function": "get_stm_locations",
    "args": {"object": {
        "function": "get_stm_objects",
        "args": {"object": "something", "action": "drink"},
    }},
})


# ----------------------------------------------------------------------
# get_stm_objects
# ----------------------------------------------------------------------

def test_yellow_fruit_is_the_banana(seed_world):
    graph, _ = seed_world
    ids, record = get_stm_objects(graph, SalArgs(object="fruit", state="yellow"))
    assert ids == {"i_banana_1"}
    assert record.outputs[0].lemma == "banana"
    assert record.outputs[0].node_class == "instance_result"


def test_something_drinkable(seed_world):
    graph, _ = seed_world
    ids, _ = get_stm_objects(graph, SalArgs(object="something", action="drink"))
    assert ids == {"i_juice_1", "i_water_1"}


def test_purple_fruit_matches_nothing(seed_world):
    graph, _ = seed_world
    ids, record = get_stm_objects(graph, SalArgs(object="fruit", state="purple"))
    assert ids == set()
    assert record.outputs == []


def test_unresolvable_lemma_names_the_lemma(seed_world):
    graph, _ = seed_world
    with pytest.raises(UnresolvedLemma) as err:
        get_stm_objects(graph, SalArgs(object="unicorn"))
    assert err.value.details["lemma"] == "unicorn"


def test_instance_id_rejected_in_action_slot(seed_world):
    graph, _ = seed_world
    with pytest.raises(BadArgument):
        get_stm_objects(graph, SalArgs(object="key", action="i_fork_1"))


def test_no_arguments_rejected(seed_world):
    graph, _ = seed_world
    with pytest.raises(BadArgument):
        get_stm_objects(graph, SalArgs())


def test_object_justification_path_walks_the_hierarchy(seed_world):
    graph, _ = seed_world
    _, record = get_stm_objects(graph, SalArgs(object="something", action="drink"))
    juice_paths = [p for p in record.fragment.paths if p.output == "i_juice_1"]
    by_filter = {p.filter: p for p in juice_paths}
    assert set(by_filter) == {"object", "action"}
    # the object path descends the chain and ends on the instance-of edge
    assert by_filter["object"].anchor == "c_something"
    assert by_filter["object"].edges[-1] == "e_io_i_juice_1"
    assert by_filter["action"].edges[0] == "e_drink_juice"


# ----------------------------------------------------------------------
# get_stm_locations
# ----------------------------------------------------------------------

def test_where_is_something_to_drink(seed_world):
    graph, _ = seed_world
    ids, record = get_stm_locations(
        graph, SalArgs(object="something", action="drink"))
    assert ids == {"i_kitchen", "i_fridge_1", "i_dinner_table_1"}
    lemmas = {o.lemma for o in record.outputs}
    assert lemmas == {"kitchen", "fridge", "dinner table"}


def test_object_directly_in_room(seed_world):
    graph, _ = seed_world
    ids, _ = get_stm_locations(graph, SalArgs(object="fridge"))
    assert ids == {"i_kitchen"}


def test_no_matching_objects_no_locations(seed_world):
    graph, _ = seed_world
    ids, _ = get_stm_locations(graph, SalArgs(object="fruit", state="purple"))
    assert ids == set()


# ----------------------------------------------------------------------
# get_stm_actions
# ----------------------------------------------------------------------

def test_juice_is_drinkable(seed_world):
    graph, _ = seed_world
    ids, _ = get_stm_actions(graph, SalArgs(object="juice"))
    assert ids == {"c_drink"}


def test_fork_loses_eat_after_repair(seed_world):
    graph, _ = seed_world
    ids, _ = get_stm_actions(graph, SalArgs(object="fork"))
    assert ids == {"c_eat"}
    graph.delete_edge("e_eat_fork")
    ids, _ = get_stm_actions(graph, SalArgs(object="fork"))
    assert ids == set()


def test_concept_without_patterns(seed_world):
    graph, _ = seed_world
    ids, _ = get_stm_actions(graph, SalArgs(object="key"))
    assert ids == set()


def test_actions_require_object(seed_world):
    graph, _ = seed_world
    with pytest.raises(BadArgument):
        get_stm_actions(graph, SalArgs(action="eat"))


# ----------------------------------------------------------------------
# get_count
# ----------------------------------------------------------------------

def test_count_keys_in_kitchen_initially_zero(seed_world):
    graph, _ = seed_world
    count, record = get_count(graph, SalArgs(object="key", location="kitchen"))
    assert count == 0
    assert record.outputs[0].lemma == "0"
    assert record.embedded is not None
    assert record.embedded.function == "get_stm_objects"


def test_count_unresolvable_lemma(seed_world):
    graph, _ = seed_world
    with pytest.raises(UnresolvedLemma):
        get_count(graph, SalArgs(object="unicorn-lemma"))


@pytest.mark.parametrize("seed", range(4))
def test_count_equals_object_cardinality(seed, seed_world):
    graph, _ = seed_world
    rng = random.Random(4000 + seed)
    for _ in range(25):
        args = random_query(rng, graph)
        kwargs = {k if k != "obj" else "object": v for k, v in args.items()}
        sal_args = SalArgs(**kwargs)
        count, _ = get_count(graph, sal_args)
        ids, _ = get_stm_objects(graph, sal_args)
        assert count == len(ids)


# ----------------------------------------------------------------------
# call trees
# ----------------------------------------------------------------------

def test_drink_question_two_calls(seed_world):
    graph, _ = seed_world
    result, trace = eval_call_tree(graph, DRINK_QUESTION)
    assert result == {"i_kitchen", "i_fridge_1", "i_dinner_table_1"}
    assert [r.function for r in trace.records] == [
        "get_stm_objects", "get_stm_locations"]
    assert trace.records[1].args["object"].kind == "call"
    assert trace.records[1].args["object"].call_index == 0
    assert trace.final_lemmas() == ["dinner table", "fridge", "kitchen"]


def test_single_node_tree_equals_direct_call(seed_world):
    graph, _ = seed_world
    tree = CallTree.from_json({
        "function": "get_stm_objects",
        "args": {"object": "fruit", "state": "yellow"},
    })
    result, trace = eval_call_tree(graph, tree)
    direct_ids, direct_record = get_stm_objects(
        graph, SalArgs(object="fruit", state="yellow"))
    assert result == direct_ids
    assert len(trace.records) == 1
    assert trace.records[0].to_json() == direct_record.to_json()


def test_empty_inner_call_yields_empty_outer(seed_world):
    graph, _ = seed_world
    tree = CallTree.from_json({
        "function": "get_stm_locations",
        "args": {"object": {
            "function": "get_stm_objects",
            "args": {"object": "fruit", "state": "purple"},
        }},
    })
    result, trace = eval_call_tree(graph, tree)
    assert result == set()
    assert len(trace.records) == 2
    assert trace.records[1].outputs == []


def test_count_root_flattens_embedded_record(seed_world):
    graph, _ = seed_world
    tree = CallTree.from_json({
        "function": "get_count",
        "args": {"object": "table", "location": "kitchen"},
    })
    result, trace = eval_call_tree(graph, tree)
    assert result == 1
    assert [r.function for r in trace.records] == ["get_stm_objects", "get_count"]
    assert trace.records[1].embeds_index == 0
    assert trace.final_lemmas() == ["1"]


def test_child_error_carries_tree_position(seed_world):
    graph, _ = seed_world
    tree = CallTree.from_json({
        "function": "get_stm_locations",
        "args": {"object": {
            "function": "get_stm_objects", "args": {"object": "wug"},
        }},
    })
    with pytest.raises(UnresolvedLemma) as err:
        eval_call_tree(graph, tree)
    assert err.value.details["tree_position"] == "root.object"


def test_count_cannot_feed_an_argument(seed_world):
    graph, _ = seed_world
    tree = CallTree.from_json({
        "function": "get_stm_objects",
        "args": {"object": {
            "function": "get_count", "args": {"object": "key"},
        }},
    })
    with pytest.raises(BadCallTree):
        eval_call_tree(graph, tree)


def test_malformed_tree_rejected():
    with pytest.raises(BadCallTree):
        CallTree.from_json({"function": "frobnicate", "args": {"object": "x"}})
    with pytest.raises(BadCallTree):
        CallTree.from_json({"function": "get_stm_objects", "args": {"shape": "x"}})


# ----------------------------------------------------------------------
# trace soundness
# ----------------------------------------------------------------------

def test_trace_replays_cleanly(seed_world):
    graph, _ = seed_world
    _, trace = eval_call_tree(graph, DRINK_QUESTION)
    assert replay_trace(graph, trace.to_json()) == []


def test_replay_flags_deleted_edges(seed_world):
    graph, _ = seed_world
    _, record = get_stm_objects(graph, SalArgs(object="fork", action="eat"))
    trace = single_call_trace(record)
    assert replay_trace(graph, trace.to_json()) == []
    graph.delete_edge("e_eat_fork")
    problems = replay_trace(graph, trace.to_json())
    assert any("e_eat_fork" in p for p in problems)


# ----------------------------------------------------------------------
# properties against the brute-force oracle
# ----------------------------------------------------------------------

def _as_sal_args(query: dict) -> SalArgs:
    return SalArgs(object=query.get("object"), action=query.get("action"),
                   location=query.get("location"), state=query.get("state"))


def _as_oracle_args(query: dict) -> dict:
    return {"obj": query.get("object"), "action": query.get("action"),
            "location": query.get("location"), "state": query.get("state")}


@pytest.mark.parametrize("seed", range(6))
def test_oracle_equivalence_randomized(seed):
    rng = random.Random(5000 + seed)
    graph = random_graph(rng, n_concepts=rng.randint(3, 100))
    random_instances(rng, graph, n_instances=rng.randint(2, 50))
    oracle = BruteForce(graph)
    for _ in range(40):
        query = random_query(rng, graph)
        sal_args, oracle_args = _as_sal_args(query), _as_oracle_args(query)
        objects, record = get_stm_objects(graph, sal_args)
        assert objects == oracle.objects(**oracle_args)
        locations, _ = get_stm_locations(graph, sal_args)
        assert locations == oracle.locations(**oracle_args)
        if query.get("object") is not None:
            actions, _ = get_stm_actions(graph, sal_args)
            assert actions == oracle.actions(**oracle_args)
        count, _ = get_count(graph, sal_args)
        assert count == len(objects)
        trace = single_call_trace(record)
        assert replay_trace(graph, trace.to_json()) == []


@pytest.mark.parametrize("seed", range(3))
def test_deletion_is_monotonic(seed):
    rng = random.Random(6000 + seed)
    graph = random_graph(rng, n_concepts=40)
    random_instances(rng, graph, n_instances=20)
    queries = [random_query(rng, graph) for _ in range(15)]
    from kengine.kg import EdgeKind
    deletable = [e.id for e in graph.edges()
                 if e.kind in (EdgeKind.IS_A, EdgeKind.ACTION_PATTERN)]
    rng.shuffle(deletable)
    before = [get_stm_objects(graph, _as_sal_args(q))[0] for q in queries]
    for edge in deletable[:10]:
        graph.delete_edge(edge)
        after = [get_stm_objects(graph, _as_sal_args(q))[0] for q in queries]
        for prev, cur in zip(before, after):
            assert cur <= prev
        before = after


def test_identical_inputs_identical_traces(seed_world):
    graph, _ = seed_world
    _, trace_a = eval_call_tree(graph, DRINK_QUESTION)
    _, trace_b = eval_call_tree(graph, DRINK_QUESTION)
    assert trace_a.to_json() == trace_b.to_json()
