"""Static SVG figures: episode maps and loss curves.

Output is byte-stable: a fixed hash salt for element ids and no date metadata.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "ddace"
matplotlib.rcParams["svg.fonttype"] = "none"

_MARKERS = {"robot": "o", "goal": "*", "object": "s"}
_META = {"Date": None}


def _save(fig, path):
    fig.savefig(Path(path), format="svg", metadata=_META)
    plt.close(fig)


def render_episode(trace, spec, path, demo=None) -> None:
    """Node glyphs at their start positions, demonstrated paths dashed, generated paths solid."""
    fig, ax = plt.subplots(figsize=(6, 6))
    x0, y0, x1, y1 = spec.bounds
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_aspect("equal")
    colors = plt.get_cmap("tab10")
    for i, nid in enumerate(spec.node_ids):
        node = spec.node(nid)
        px, py = spec.initial[nid]
        ax.plot(px, py, _MARKERS[node.kind], color=colors(i % 10), ms=9 if node.kind == "goal" else 7)
        ax.annotate(str(nid), (px, py), textcoords="offset points", xytext=(5, 5), fontsize=8)
        if demo is not None and node.kind == "robot":
            j = demo.index_of(nid)
            ax.plot(demo.positions[:, j, 0], demo.positions[:, j, 1], "--", lw=1,
                    color=colors(i % 10), alpha=0.7)
        for p in trace.motions.get(nid, []):
            ax.plot(p[:, 0], p[:, 1], "-", lw=1.5, color=colors(i % 10))
    for g in spec.goals:
        ax.plot(*g.position, "x", color="black", ms=5)
    ax.set_title(f"{trace.scenario} ({trace.halt_reason})")
    _save(fig, path)


def render_losses(series: dict, path, title: str = "training loss") -> None:
    """One line per named loss history, log-scaled."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, hist in series.items():
        ax.plot(np.arange(1, len(hist) + 1), hist, lw=1.2, label=str(name))
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    _save(fig, path)


def render_trace_csv(rows, path) -> None:
    """Tick paths from an exported trace CSV (rows of clock, node, x, y, action)."""
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.set_aspect("equal")
    by_node: dict = {}
    for _, nid, x, y, _ in rows:
        by_node.setdefault(nid, []).append((x, y))
    for nid, pts in sorted(by_node.items()):
        pts = np.array(pts)
        ax.plot(pts[:, 0], pts[:, 1], "-", lw=1.2, label=str(nid))
        ax.plot(*pts[0], "o", ms=4)
    ax.legend(fontsize=7)
    _save(fig, path)
