"""Trace/scene export: delimited call tables and rendered figures.

`export_trace_bundle` writes, next to each other, the raw trace JSON, a
TSV with one row per executed call, a figure of the call sequence with its
reasoning subgraphs, and a top-down view of the scene with the current
highlights.  Figure rendering imports matplotlib lazily so the chat paths
stay light.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

SLOT_ORDER = ("object", "action", "location", "state")

NODE_COLORS = {
    "utterance": "#ffffff",
    "parameter": "#7ec96f",
    "concept": "#f2d65c",
    "instance_result": "#e05252",
    "function": "#9db8d2",
}


# ----------------------------------------------------------------------
# compact text forms (shared with the REPL)
# ----------------------------------------------------------------------

def format_arg(slot: str, arg: dict) -> str:
    kind = arg.get("kind")
    if kind == "lemma":
        return f"{slot}={arg['value']}->{','.join(arg.get('resolved', []))}"
    if kind == "id":
        return f"{slot}={arg['value']}"
    if kind == "tag":
        return f"{slot}={arg['value']}"
    if kind == "call":
        return f"{slot}=#{arg['call_index']}"
    return f"{slot}=[{','.join(arg.get('resolved', []))}]"


def format_args(args: dict) -> str:
    parts = [format_arg(slot, args[slot]) for slot in SLOT_ORDER if slot in args]
    return ", ".join(parts)


def format_outputs(outputs: list[dict]) -> str:
    if not outputs:
        return "-"
    return ", ".join(f"{o['lemma']}({o['id']})" for o in outputs)


def compact_trace_lines(trace: dict) -> list[str]:
    lines = []
    for index, call in enumerate(trace.get("calls", [])):
        lines.append(
            f"  [{index}] {call['function']}({format_args(call['args'])})"
            f" -> {format_outputs(call['outputs'])}")
    return lines


# ----------------------------------------------------------------------
# delimited output
# ----------------------------------------------------------------------

def write_calls_tsv(trace: dict, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, delimiter="\t")
        writer.writerow(["call", "function", "args", "output_ids",
                         "output_lemmas"])
        for index, call in enumerate(trace.get("calls", [])):
            outputs = call.get("outputs", [])
            writer.writerow([
                index,
                call["function"],
                format_args(call["args"]),
                ",".join(o["id"] for o in outputs),
                ",".join(o["lemma"] for o in outputs),
            ])


# ----------------------------------------------------------------------
# figures
# ----------------------------------------------------------------------

def _layer_nodes(call: dict) -> dict[str, int]:
    """Depth per fragment node: argument wiring on top, then the knowledge
    layers in path-walk order, outputs at the bottom."""
    fragment = call.get("fragment", {})
    edges = {e["id"]: e for e in fragment.get("edges", [])}
    depth: dict[str, int] = {}
    for node in fragment.get("nodes", []):
        if node["node_class"] == "utterance":
            depth[node["id"]] = 0
        elif node["node_class"] == "parameter":
            depth[node["id"]] = 1
    base = 2
    deepest = base
    for path in fragment.get("paths", []):
        cur = path["anchor"]
        depth[cur] = max(depth.get(cur, base), base)
        level = depth[cur]
        for eid in path["edges"]:
            meta = edges.get(eid)
            if meta is None:
                continue
            cur = meta["dst"] if meta["src"] == cur else meta["src"]
            level += 1
            depth[cur] = max(depth.get(cur, level), level)
            deepest = max(deepest, depth[cur])
    for node in fragment.get("nodes", []):
        depth.setdefault(node["id"], base)
    for out in call.get("outputs", []):
        if out["id"] in depth:
            depth[out["id"]] = deepest + 1
    return depth


def render_trace_figure(trace: dict, path: Path, title: str = "") -> None:
    """One block per executed call: a function bar on top of its layered
    reasoning subgraph, justification paths drawn in red."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    calls = trace.get("calls", [])
    n = max(1, len(calls))
    fig, axes = plt.subplots(n, 1, figsize=(10, 4.5 * n), squeeze=False)
    for index, call in enumerate(calls):
        ax = axes[index][0]
        ax.set_title(f"[{index}] {call['function']}({format_args(call['args'])})",
                     loc="left", fontsize=10, family="monospace")
        fragment = call.get("fragment", {})
        nodes = {node["id"]: node for node in fragment.get("nodes", [])}
        depth = _layer_nodes(call)
        layers: dict[int, list[str]] = {}
        for nid, d in depth.items():
            layers.setdefault(d, []).append(nid)
        positions: dict[str, tuple[float, float]] = {}
        max_depth = max(layers) if layers else 0
        for d, members in layers.items():
            members.sort()
            for k, nid in enumerate(members):
                x = (k + 1) / (len(members) + 1)
                positions[nid] = (x, max_depth - d)
        path_edges = {eid for p in fragment.get("paths", [])
                      for eid in p["edges"]}
        for edge in fragment.get("edges", []):
            src, dst = positions.get(edge["src"]), positions.get(edge["dst"])
            if src is None or dst is None:
                continue
            if edge["id"] in path_edges:
                style = {"color": "#d03030", "lw": 1.8, "zorder": 2}
            elif edge.get("synthetic"):
                style = {"color": "#bbbbbb", "lw": 0.8, "ls": "--", "zorder": 1}
            else:
                style = {"color": "#999999", "lw": 1.0, "zorder": 1}
            ax.plot([src[0], dst[0]], [src[1], dst[1]], **style)
        for nid, (x, y) in positions.items():
            node = nodes.get(nid, {"node_class": "concept", "label": nid})
            color = NODE_COLORS.get(node["node_class"], "#cccccc")
            ax.scatter([x], [y], s=260, c=color, edgecolors="#333333", zorder=3)
            ax.annotate(f"{node.get('label', nid)}\n{nid}", (x, y),
                        textcoords="offset points", xytext=(0, -22),
                        ha="center", fontsize=6, zorder=4)
        ax.set_xlim(0, 1)
        ax.set_ylim(-1, (max(layers) if layers else 1) + 1)
        ax.axis("off")
    if title:
        fig.suptitle(title, fontsize=11)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_scene_figure(snapshot: dict, path: Path, title: str = "") -> None:
    """Top-down view: rooms, furniture, objects, agent pose and highlights."""
    import matplotlib
    matplotlib.use("Agg")
    import math

    import matplotlib.pyplot as plt
    from matplotlib.patches import Circle, Rectangle

    fig, ax = plt.subplots(figsize=(9, 5))
    for room in snapshot.get("rooms", []):
        x0, y0, x1, y1 = room["rect"]
        ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False,
                               edgecolor="#444444", lw=1.5))
        ax.annotate(room["name"], (x0 + 0.15, y1 - 0.35), fontsize=9,
                    color="#444444")
    highlights = set(snapshot.get("highlights", []))
    room_by_instance = {r["instance"]: r for r in snapshot.get("rooms", [])}
    for obj in snapshot.get("objects", []):
        x, y = obj["pos"]
        color = "#7ec96f" if obj.get("graspable") else "#9db8d2"
        marker = "o" if obj.get("graspable") else "s"
        size = 60 if obj.get("graspable") else 170
        ax.scatter([x], [y], s=size, marker=marker, c=color,
                   edgecolors="#333333", zorder=3)
        ax.annotate(obj.get("lemma", obj["id"]), (x, y),
                    textcoords="offset points", xytext=(0, 7),
                    ha="center", fontsize=7)
        if obj["id"] in highlights:
            ax.add_patch(Circle((x, y), 0.35, fill=False,
                                edgecolor="#ff9a00", lw=2.0, zorder=4))
    for instance in highlights & set(room_by_instance):
        x0, y0, x1, y1 = room_by_instance[instance]["rect"]
        ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False,
                               edgecolor="#ff9a00", lw=2.5, zorder=4))
    agent = snapshot.get("agent")
    if agent:
        x, y = agent["pos"]
        heading = agent.get("heading", 0.0)
        ax.scatter([x], [y], s=160, marker=(3, 0, math.degrees(heading) - 90),
                   c="#e05252", edgecolors="#333333", zorder=5)
        ax.annotate("robot", (x, y), textcoords="offset points",
                    xytext=(0, 9), ha="center", fontsize=8)
    ax.set_aspect("equal")
    ax.autoscale()
    ax.axis("off")
    if title:
        ax.set_title(title, fontsize=11)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def export_trace_bundle(trace: dict, snapshot: dict, out_dir: Path) -> list[Path]:
    """Write trace.json, calls.tsv, trace.png and scene.png into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    trace_json = out_dir / "trace.json"
    trace_json.write_text(json.dumps(trace, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    written.append(trace_json)
    tsv = out_dir / "calls.tsv"
    write_calls_tsv(trace, tsv)
    written.append(tsv)
    turn = trace.get("turn_id", "?")
    trace_png = out_dir / "trace.png"
    render_trace_figure(trace, trace_png, title=f"reasoning trace, turn {turn}")
    written.append(trace_png)
    scene_png = out_dir / "scene.png"
    render_scene_figure(snapshot, scene_png, title="scene")
    written.append(scene_png)
    return written
