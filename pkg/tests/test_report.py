import json

from kengine.report import (
    compact_trace_lines,
    export_trace_bundle,
    format_args,
    write_calls_tsv,
)
from kengine.sal import CallTree, eval_call_tree
from kengine.service import Engine
from kengine.sim import snapshot


def drink_trace(seed_world) -> dict:
    graph, _ = seed_world
    tree = CallTree.from_json({
        "function": "get_stm_locations",
        "args": {"object": {
            "function": "get_stm_objects",
            "args": {"object": "something", "action": "drink"},
        }},
    })
    _, trace = eval_call_tree(graph, tree)
    return {"turn_id": 1, **trace.to_json()}


def test_format_args_compact(seed_world):
    trace = drink_trace(seed_world)
    inner, outer = trace["calls"]
    assert format_args(inner["args"]) == (
        "object=something->c_something, action=drink->c_drink")
    assert format_args(outer["args"]) == "object=#0"


def test_compact_lines_cover_all_calls(seed_world):
    trace = drink_trace(seed_world)
    lines = compact_trace_lines(trace)
    assert len(lines) == 2
    assert "get_stm_objects" in lines[0]
    assert "i_kitchen" in lines[1]


def test_tsv_has_one_row_per_call(seed_world, tmp_path):
    trace = drink_trace(seed_world)
    out = tmp_path / "calls.tsv"
    write_calls_tsv(trace, out)
    rows = out.read_text().strip().splitlines()
    assert len(rows) == 3
    first = rows[1].split("\t")
    assert first[1] == "get_stm_objects"
    assert "i_juice_1" in first[3]


def test_export_bundle_writes_figures(seed_world, tmp_path):
    graph, scene = seed_world
    engine = Engine(graph, scene, synchronous=True)
    session = engine.create_session()
    turn = engine.post_chat(session.id, "where is something to drink?")
    trace = {"turn_id": turn.turn_id, **turn.trace.to_json()}
    written = export_trace_bundle(trace, engine.scene_snapshot(),
                                  tmp_path / "bundle")
    names = sorted(p.name for p in written)
    assert names == ["calls.tsv", "scene.png", "trace.json", "trace.png"]
    for path in written:
        assert path.exists() and path.stat().st_size > 0
    reread = json.loads((tmp_path / "bundle" / "trace.json").read_text())
    assert reread == trace


def test_scene_figure_renders_highlights(seed_world, tmp_path):
    graph, scene = seed_world
    scene.highlights = {"i_banana_1", "i_kitchen"}
    from kengine.report import render_scene_figure
    out = tmp_path / "scene.png"
    render_scene_figure(snapshot(scene), out)
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
